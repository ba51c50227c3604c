#pragma once

#include <cstddef>
#include <vector>

#include "statiocl/num/tensor.hpp"

namespace statiocl::stationarity {

struct OlsFit {
    std::vector<double> coefficients;
    std::vector<double> residuals;
    std::vector<double> standard_errors;
    double rss = 0.0;
    /// RSS / (n - k)
    double sigma2 = 0.0;
};

/// Least squares via Householder QR.
///
/// design is [n x k] with n > k; response has n entries. Standard errors are
/// s * sqrt(diag((X^T X)^-1)) with s^2 = RSS / (n - k). Throws
/// SingularMatrixError naming the first dependent column when the design is
/// rank deficient, DimensionError on shape problems.
OlsFit ols_fit(const num::Tensor& design, const std::vector<double>& response);

}  // namespace statiocl::stationarity
