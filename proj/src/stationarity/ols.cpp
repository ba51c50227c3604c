#include "statiocl/stationarity/ols.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "statiocl/error.hpp"

namespace statiocl::stationarity {

OlsFit ols_fit(const num::Tensor& design, const std::vector<double>& response) {
    if (design.rank() != 2) {
        throw DimensionError("ols_fit: design must be a matrix, got " + num::shape_string(design.shape()));
    }
    const auto n = static_cast<Eigen::Index>(design.dim(0));
    const auto k = static_cast<Eigen::Index>(design.dim(1));
    if (static_cast<std::size_t>(n) != response.size()) {
        throw DimensionError("ols_fit: design has " + std::to_string(n) + " rows, response has " +
                             std::to_string(response.size()));
    }
    if (k == 0 || n <= k) {
        throw DimensionError("ols_fit: need more rows than columns, got " + num::shape_string(design.shape()));
    }

    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMajor> x(design.data().data(), n, k);
    const Eigen::Map<const Eigen::VectorXd> y(response.data(), n);

    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();

    double scale = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) scale = std::max(scale, x.col(j).norm());
    const double tol = 1e-10 * std::max(scale, 1.0);
    for (Eigen::Index j = 0; j < k; ++j) {
        if (std::abs(r(j, j)) <= tol) {
            throw SingularMatrixError("ols_fit: design column " + std::to_string(j) +
                                      " is linearly dependent on earlier columns");
        }
    }

    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - x * beta;
    // (X^T X)^-1 = R^-1 R^-T
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));

    OlsFit fit;
    fit.rss = resid.squaredNorm();
    fit.sigma2 = fit.rss / static_cast<double>(n - k);
    fit.coefficients.assign(beta.data(), beta.data() + k);
    fit.residuals.assign(resid.data(), resid.data() + n);
    fit.standard_errors.resize(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) {
        fit.standard_errors[static_cast<std::size_t>(j)] = std::sqrt(fit.sigma2 * r_inv.row(j).squaredNorm());
    }
    return fit;
}

}  // namespace statiocl::stationarity
