#include "statiocl/num/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "statiocl/error.hpp"

namespace statiocl::num {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void require_rank(const Var& v, std::size_t rank, const char* op) {
    if (v.shape().size() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             ", got shape " + shape_string(v.shape()));
    }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                             " vs " + shape_string(b.shape()));
    }
}

void require_same_tape(const Var& a, const Var& b, const char* op) {
    if (&a.tape() != &b.tape()) {
        throw ContractError(std::string(op) + ": operands live on different tapes");
    }
}

template <typename F>
Var unary(Var x, Tensor out, F&& local_grad) {
    const NodeId xid = x.id();
    return x.tape().record(std::move(out), {xid},
                           [xid, local_grad = std::forward<F>(local_grad)](
                               Tape& tape, std::span<const double> g) {
                               if (!tape.requires_grad(xid)) return;
                               auto gx = tape.grad_buffer(xid);
                               local_grad(tape, g, gx);
                           });
}

}  // namespace

Var matmul(Var a, Var b) {
    require_same_tape(a, b, "matmul");
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) {
        throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) +
                             " . " + shape_string(b.shape()));
    }
    Tensor out({m, n});
    const auto& av = a.value().data();
    const auto& bv = b.value().data();
    auto ov = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            const double* brow = &bv[p * n];
            double* orow = &ov[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    const NodeId aid = a.id(), bid = b.id();
    return a.tape().record(std::move(out), {aid, bid},
                           [aid, bid, m, k, n](Tape& tape, std::span<const double> g) {
                               const auto av = tape.value(aid).data();
                               const auto bv = tape.value(bid).data();
                               if (tape.requires_grad(aid)) {
                                   auto ga = tape.grad_buffer(aid);  // g . b^T
                                   for (std::size_t i = 0; i < m; ++i)
                                       for (std::size_t p = 0; p < k; ++p) {
                                           double acc = 0.0;
                                           for (std::size_t j = 0; j < n; ++j)
                                               acc += g[i * n + j] * bv[p * n + j];
                                           ga[i * k + p] += acc;
                                       }
                               }
                               if (tape.requires_grad(bid)) {
                                   auto gb = tape.grad_buffer(bid);  // a^T . g
                                   for (std::size_t i = 0; i < m; ++i)
                                       for (std::size_t p = 0; p < k; ++p) {
                                           const double aip = av[i * k + p];
                                           for (std::size_t j = 0; j < n; ++j)
                                               gb[p * n + j] += aip * g[i * n + j];
                                       }
                               }
                           });
}

Var transpose(Var a) {
    require_rank(a, 2, "transpose");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    Tensor out({n, m});
    const auto av = a.value().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
    return unary(a, std::move(out), [m, n](Tape&, std::span<const double> g, std::span<double> ga) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
}

namespace {

Var add_scaled(Var a, Var b, double sign, const char* op) {
    require_same_tape(a, b, op);
    require_same_shape(a, b, op);
    Tensor out = a.value();
    const auto bv = b.value().data();
    auto ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += sign * bv[i];
    const NodeId aid = a.id(), bid = b.id();
    return a.tape().record(std::move(out), {aid, bid},
                           [aid, bid, sign](Tape& tape, std::span<const double> g) {
                               if (tape.requires_grad(aid)) {
                                   auto ga = tape.grad_buffer(aid);
                                   for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                               }
                               if (tape.requires_grad(bid)) {
                                   auto gb = tape.grad_buffer(bid);
                                   for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
                               }
                           });
}

}  // namespace

Var add(Var a, Var b) { return add_scaled(a, b, 1.0, "add"); }

Var sub(Var a, Var b) { return add_scaled(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
    require_same_tape(a, b, "mul");
    require_same_shape(a, b, "mul");
    Tensor out = a.value();
    const auto bv = b.value().data();
    auto ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
    const NodeId aid = a.id(), bid = b.id();
    return a.tape().record(std::move(out), {aid, bid},
                           [aid, bid](Tape& tape, std::span<const double> g) {
                               const auto av = tape.value(aid).data();
                               const auto bv = tape.value(bid).data();
                               if (tape.requires_grad(aid)) {
                                   auto ga = tape.grad_buffer(aid);
                                   for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                               }
                               if (tape.requires_grad(bid)) {
                                   auto gb = tape.grad_buffer(bid);
                                   for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                               }
                           });
}

Var scale(Var a, double factor) {
    Tensor out = a.value();
    for (double& v : out.data()) v *= factor;
    return unary(a, std::move(out), [factor](Tape&, std::span<const double> g, std::span<double> ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
    });
}

Var add_bias(Var x, Var bias) {
    require_same_tape(x, bias, "add_bias");
    require_rank(bias, 1, "add_bias");
    const Shape& xs = x.shape();
    if ((xs.size() != 2 && xs.size() != 3) || xs[1] != bias.shape()[0]) {
        throw DimensionError("add_bias: bias " + shape_string(bias.shape()) +
                             " does not match input " + shape_string(xs));
    }
    const std::size_t rows = xs[0], features = xs[1], inner = xs.size() == 3 ? xs[2] : 1;
    Tensor out = x.value();
    const auto bv = bias.value().data();
    auto ov = out.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t f = 0; f < features; ++f) {
            double* o = &ov[(r * features + f) * inner];
            for (std::size_t t = 0; t < inner; ++t) o[t] += bv[f];
        }
    const NodeId xid = x.id(), bid = bias.id();
    return x.tape().record(std::move(out), {xid, bid},
                           [xid, bid, rows, features, inner](Tape& tape, std::span<const double> g) {
                               if (tape.requires_grad(xid)) {
                                   auto gx = tape.grad_buffer(xid);
                                   for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                               }
                               if (tape.requires_grad(bid)) {
                                   auto gb = tape.grad_buffer(bid);
                                   for (std::size_t r = 0; r < rows; ++r)
                                       for (std::size_t f = 0; f < features; ++f) {
                                           const double* gr = &g[(r * features + f) * inner];
                                           double acc = 0.0;
                                           for (std::size_t t = 0; t < inner; ++t) acc += gr[t];
                                           gb[f] += acc;
                                       }
                               }
                           });
}

Var relu(Var x) {
    Tensor out = x.value();
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    const NodeId xid = x.id();
    return unary(x, std::move(out), [xid](Tape& tape, std::span<const double> g, std::span<double> gx) {
        const auto xv = tape.value(xid).data();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (xv[i] > 0.0) gx[i] += g[i];
    });
}

Var exp(Var x) {
    Tensor out = x.value();
    for (double& v : out.data()) v = std::exp(v);
    std::vector<double> saved = out.values();
    return unary(x, std::move(out),
                 [saved = std::move(saved)](Tape&, std::span<const double> g, std::span<double> gx) {
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * saved[i];
                 });
}

Var log(Var x) {
    Tensor out = x.value();
    for (double& v : out.data()) {
        if (!(v > 0.0)) {
            throw ContractError("log: non-positive input " + std::to_string(v));
        }
        v = std::log(v);
    }
    const NodeId xid = x.id();
    return unary(x, std::move(out), [xid](Tape& tape, std::span<const double> g, std::span<double> gx) {
        const auto xv = tape.value(xid).data();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
    });
}

Var sum(Var x) {
    double total = 0.0;
    for (double v : x.value().data()) total += v;
    return unary(x, Tensor::scalar(total), [](Tape&, std::span<const double> g, std::span<double> gx) {
        for (double& v : gx) v += g[0];
    });
}

Var mean(Var x) {
    const std::size_t n = x.value().size();
    double total = 0.0;
    for (double v : x.value().data()) total += v;
    return unary(x, Tensor::scalar(total / static_cast<double>(n)),
                 [n](Tape&, std::span<const double> g, std::span<double> gx) {
                     const double share = g[0] / static_cast<double>(n);
                     for (double& v : gx) v += share;
                 });
}

Var sum_rows(Var x) {
    require_rank(x, 2, "sum_rows");
    const std::size_t rows = x.shape()[0], cols = x.shape()[1];
    Tensor out({rows});
    const auto xv = x.value().data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r] += xv[r * cols + c];
    return unary(x, std::move(out), [rows, cols](Tape&, std::span<const double> g, std::span<double> gx) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r];
    });
}

Var diag(Var x) {
    require_rank(x, 2, "diag");
    const std::size_t n = x.shape()[0];
    if (x.shape()[1] != n) {
        throw DimensionError("diag: matrix is not square, " + shape_string(x.shape()));
    }
    Tensor out({n});
    for (std::size_t i = 0; i < n; ++i) out[i] = x.value()[i * n + i];
    return unary(x, std::move(out), [n](Tape&, std::span<const double> g, std::span<double> gx) {
        for (std::size_t i = 0; i < n; ++i) gx[i * n + i] += g[i];
    });
}

Var conv1d(Var x, Var kernel, std::size_t stride, std::size_t padding) {
    require_same_tape(x, kernel, "conv1d");
    require_rank(x, 3, "conv1d");
    require_rank(kernel, 3, "conv1d");
    if (stride == 0) {
        throw ContractError("conv1d: stride must be positive");
    }
    const std::size_t batch = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
    const std::size_t cout = kernel.shape()[0], width = kernel.shape()[2];
    if (kernel.shape()[1] != cin) {
        throw DimensionError("conv1d: kernel " + shape_string(kernel.shape()) +
                             " expects a different channel count than input " +
                             shape_string(x.shape()));
    }
    if (len + 2 * padding < width) {
        throw DimensionError("conv1d: kernel width " + std::to_string(width) +
                             " exceeds padded input length " + std::to_string(len + 2 * padding));
    }
    const std::size_t out_len = (len + 2 * padding - width) / stride + 1;
    const std::size_t taps = cin * width;

    // Per-sample column matrix [cin*width x out_len]: entry (ci*width + k, t) holds
    // x[b, ci, t*stride + k - padding], zero where that index falls in the padding.
    // One GEMM per sample keeps every output independent of the batch composition.
    auto for_each_tap = [=](std::size_t b, auto&& visit) {
        for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t k = 0; k < width; ++k) {
                const std::size_t row = ci * width + k;
                for (std::size_t t = 0; t < out_len; ++t) {
                    const std::size_t pos = t * stride + k;
                    if (pos < padding || pos - padding >= len) continue;
                    visit(row * out_len + t, (b * cin + ci) * len + pos - padding);
                }
            }
    };
    auto im2col = [=](std::span<const double> xv, std::size_t b, std::vector<double>& col) {
        col.assign(taps * out_len, 0.0);
        for_each_tap(b, [&](std::size_t c, std::size_t xi) { col[c] = xv[xi]; });
    };
    const auto rows_out = static_cast<Eigen::Index>(cout);
    const auto rows_tap = static_cast<Eigen::Index>(taps);
    const auto cols = static_cast<Eigen::Index>(out_len);

    Tensor out({batch, cout, out_len});
    {
        ConstMatrixMap w_mat(kernel.value().data().data(), rows_out, rows_tap);
        std::vector<double> col;
        for (std::size_t b = 0; b < batch; ++b) {
            im2col(x.value().data(), b, col);
            MatrixMap o_mat(out.data().data() + b * cout * out_len, rows_out, cols);
            o_mat.noalias() = w_mat * ConstMatrixMap(col.data(), rows_tap, cols);
        }
    }

    const NodeId xid = x.id(), kid = kernel.id();
    return x.tape().record(
        std::move(out), {xid, kid},
        [=](Tape& tape, std::span<const double> g) {
            const bool need_x = tape.requires_grad(xid);
            const bool need_w = tape.requires_grad(kid);
            ConstMatrixMap w_mat(tape.value(kid).data().data(), rows_out, rows_tap);
            std::span<double> gw, gx;
            if (need_w) gw = tape.grad_buffer(kid);
            if (need_x) gx = tape.grad_buffer(xid);
            std::vector<double> col;
            RowMatrix gcol(rows_tap, cols);
            for (std::size_t b = 0; b < batch; ++b) {
                ConstMatrixMap g_mat(g.data() + b * cout * out_len, rows_out, cols);
                if (need_w) {
                    im2col(tape.value(xid).data(), b, col);
                    MatrixMap gw_mat(gw.data(), rows_out, rows_tap);
                    gw_mat.noalias() += g_mat * ConstMatrixMap(col.data(), rows_tap, cols).transpose();
                }
                if (need_x) {
                    gcol.noalias() = w_mat.transpose() * g_mat;
                    for_each_tap(b, [&](std::size_t c, std::size_t xi) { gx[xi] += gcol.data()[c]; });
                }
            }
        });
}

Var maxpool1d(Var x, std::size_t window, std::size_t stride) {
    require_rank(x, 3, "maxpool1d");
    if (window == 0 || stride == 0) {
        throw ContractError("maxpool1d: window and stride must be positive");
    }
    const std::size_t rows = x.shape()[0] * x.shape()[1], len = x.shape()[2];
    if (window > len) {
        throw DimensionError("maxpool1d: window " + std::to_string(window) +
                             " larger than length " + std::to_string(len));
    }
    const std::size_t out_len = (len - window) / stride + 1;
    Tensor out({x.shape()[0], x.shape()[1], out_len});
    std::vector<std::size_t> argmax(rows * out_len);
    const auto xv = x.value().data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t t = 0; t < out_len; ++t) {
            std::size_t best = r * len + t * stride;
            for (std::size_t w = 1; w < window; ++w) {
                const std::size_t idx = r * len + t * stride + w;
                if (xv[idx] > xv[best]) best = idx;
            }
            out[r * out_len + t] = xv[best];
            argmax[r * out_len + t] = best;
        }
    return unary(x, std::move(out),
                 [argmax = std::move(argmax)](Tape&, std::span<const double> g, std::span<double> gx) {
                     for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
                 });
}

Var global_maxpool(Var x) {
    require_rank(x, 3, "global_maxpool");
    const std::size_t len = x.shape()[2];
    if (len == 0) {
        throw DimensionError("global_maxpool: empty time axis");
    }
    const std::size_t rows = x.shape()[0] * x.shape()[1];
    Tensor out({x.shape()[0], x.shape()[1]});
    std::vector<std::size_t> argmax(rows);
    const auto xv = x.value().data();
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t best = r * len;
        for (std::size_t t = 1; t < len; ++t)
            if (xv[r * len + t] > xv[best]) best = r * len + t;
        out[r] = xv[best];
        argmax[r] = best;
    }
    return unary(x, std::move(out),
                 [argmax = std::move(argmax)](Tape&, std::span<const double> g, std::span<double> gx) {
                     for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
                 });
}

Var cosine_sim_matrix(Var a, Var b) {
    require_same_tape(a, b, "cosine_sim_matrix");
    require_rank(a, 2, "cosine_sim_matrix");
    require_rank(b, 2, "cosine_sim_matrix");
    const std::size_t na = a.shape()[0], nb = b.shape()[0], d = a.shape()[1];
    if (d == 0 || b.shape()[1] != d) {
        throw DimensionError("cosine_sim_matrix: incompatible embeddings " +
                             shape_string(a.shape()) + " and " + shape_string(b.shape()));
    }
    const auto av = a.value().data();
    const auto bv = b.value().data();
    auto norms = [d](std::span<const double> v, std::size_t rows) {
        std::vector<double> raw(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += v[i * d + k] * v[i * d + k];
            raw[i] = std::sqrt(s);
        }
        return raw;
    };
    std::vector<double> a_norm = norms(av, na), b_norm = norms(bv, nb);
    Tensor out({na, nb});
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < nb; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += av[i * d + k] * bv[j * d + k];
            out[i * nb + j] =
                dot / (std::max(a_norm[i], kCosineEps) * std::max(b_norm[j], kCosineEps));
        }
    std::vector<double> sim = out.values();
    const NodeId aid = a.id(), bid = b.id();
    return a.tape().record(
        std::move(out), {aid, bid},
        [=, sim = std::move(sim), a_norm = std::move(a_norm), b_norm = std::move(b_norm)](
            Tape& tape, std::span<const double> g) {
            const auto av = tape.value(aid).data();
            const auto bv = tape.value(bid).data();
            if (tape.requires_grad(aid)) {
                auto ga = tape.grad_buffer(aid);
                for (std::size_t i = 0; i < na; ++i) {
                    const double ni = std::max(a_norm[i], kCosineEps);
                    const bool floored = a_norm[i] <= kCosineEps;
                    for (std::size_t j = 0; j < nb; ++j) {
                        const double gij = g[i * nb + j];
                        if (gij == 0.0) continue;
                        const double nj = std::max(b_norm[j], kCosineEps);
                        const double s = sim[i * nb + j];
                        for (std::size_t k = 0; k < d; ++k) {
                            double dk = bv[j * d + k] / (ni * nj);
                            if (!floored) dk -= s * av[i * d + k] / (ni * ni);
                            ga[i * d + k] += gij * dk;
                        }
                    }
                }
            }
            if (tape.requires_grad(bid)) {
                auto gb = tape.grad_buffer(bid);
                for (std::size_t j = 0; j < nb; ++j) {
                    const double nj = std::max(b_norm[j], kCosineEps);
                    const bool floored = b_norm[j] <= kCosineEps;
                    for (std::size_t i = 0; i < na; ++i) {
                        const double gij = g[i * nb + j];
                        if (gij == 0.0) continue;
                        const double ni = std::max(a_norm[i], kCosineEps);
                        const double s = sim[i * nb + j];
                        for (std::size_t k = 0; k < d; ++k) {
                            double dk = av[i * d + k] / (ni * nj);
                            if (!floored) dk -= s * bv[j * d + k] / (nj * nj);
                            gb[j * d + k] += gij * dk;
                        }
                    }
                }
            }
        });
}

Var weighted_logsumexp_rows(Var x, const Tensor& weights) {
    require_rank(x, 2, "weighted_logsumexp_rows");
    if (weights.shape() != x.shape()) {
        throw DimensionError("weighted_logsumexp_rows: weights " + shape_string(weights.shape()) +
                             " do not match input " + shape_string(x.shape()));
    }
    const std::size_t rows = x.shape()[0], cols = x.shape()[1];
    const auto xv = x.value().data();
    const auto wv = weights.data();
    Tensor out({rows});
    // Softmax-style responsibilities, reused by the backward pass.
    std::vector<double> resp(rows * cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double shift = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cols; ++c) {
            if (wv[r * cols + c] < 0.0) {
                throw ContractError("weighted_logsumexp_rows: negative weight");
            }
            if (wv[r * cols + c] > 0.0) shift = std::max(shift, xv[r * cols + c]);
        }
        if (shift == -std::numeric_limits<double>::infinity()) {
            throw ContractError("weighted_logsumexp_rows: row " + std::to_string(r) +
                                " has no positive weight (empty denominator)");
        }
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double w = wv[r * cols + c];
            if (w > 0.0) {
                resp[r * cols + c] = w * std::exp(xv[r * cols + c] - shift);
                total += resp[r * cols + c];
            }
        }
        for (std::size_t c = 0; c < cols; ++c) resp[r * cols + c] /= total;
        out[r] = shift + std::log(total);
    }
    return unary(x, std::move(out),
                 [rows, cols, resp = std::move(resp)](Tape&, std::span<const double> g,
                                                      std::span<double> gx) {
                     for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c)
                             gx[r * cols + c] += g[r] * resp[r * cols + c];
                 });
}

}  // namespace statiocl::num
