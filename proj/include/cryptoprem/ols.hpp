#pragma once

#include <cmath>
#include <string_view>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cryptoprem/error.hpp"

namespace cryptoprem {

/// Least-squares fit of one or more responses on a shared design.
struct OlsFit {
    Eigen::MatrixXd coef;       // p x m
    Eigen::MatrixXd residuals;  // n x m
    double condition = 1.0;     // |R_11| / |R_pp| of the pivoted QR
};

inline constexpr double kConditionWarning = 1e8;

/// Solves min ||Y - X B|| with a column-pivoting QR. A design whose numerical
/// rank is below its column count raises NumericalError naming `what`.
inline OlsFit ols(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, std::string_view what) {
    if (X.rows() != Y.rows()) {
        throw NumericalError(fmt::format("{}: design has {} rows, response {}", what, X.rows(),
                                         Y.rows()));
    }
    if (X.rows() < X.cols()) {
        throw NumericalError(fmt::format("{}: {} observations for {} coefficients", what,
                                         X.rows(), X.cols()));
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-12);
    if (qr.rank() < X.cols()) {
        throw NumericalError(fmt::format("{}: rank-deficient design (rank {} of {})", what,
                                         qr.rank(), X.cols()));
    }
    OlsFit fit;
    fit.coef = qr.solve(Y);
    fit.residuals = Y - X * fit.coef;
    const auto& R = qr.matrixR();
    const double first = std::abs(R(0, 0));
    const double last = std::abs(R(X.cols() - 1, X.cols() - 1));
    fit.condition = last > 0 ? first / last : INFINITY;
    return fit;
}

/// Design matrix [1, X].
inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd D(X.rows(), X.cols() + 1);
    D.col(0).setOnes();
    D.rightCols(X.cols()) = X;
    return D;
}

}  // namespace cryptoprem
