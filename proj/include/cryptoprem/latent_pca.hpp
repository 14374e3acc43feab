#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cryptoprem/error.hpp"
#include "cryptoprem/panel.hpp"

namespace cryptoprem {

/// Latent factors estimated by principal components.
///
/// The fitted value of cell (t, i) is `intercepts[i] + factors.row(t) *
/// loadings.row(i)'`. Factor columns are normalized so that U'U/T = I and
/// each loading column has a nonnegative sum.
struct LatentFactorModel {
    MatrixXd factors;      // T x K
    MatrixXd loadings;     // N x K
    VectorXd eigenvalues;  // K, nonincreasing; eigenvalues of X'X/T for demeaned X
    VectorXd intercepts;   // N, column means removed before the decomposition
    int k = 0;

    [[nodiscard]] MatrixXd fitted() const {
        MatrixXd out = factors * loadings.transpose();
        out.rowwise() += intercepts.transpose();
        return out;
    }
};

enum class ImputeInit { zeros, cross_sectional_mean };

struct ImputationConfig {
    double tol = 1e-8;  // relative Frobenius change of the filled matrix
    int max_iter = 500;
    ImputeInit init = ImputeInit::zeros;

    void validate() const {
        if (!(tol > 0)) throw ConfigError("imputation tol must be positive");
        if (max_iter < 1) throw ConfigError("imputation max_iter must be at least 1");
    }
};

struct ImputationReport {
    int iterations = 0;
    bool converged = true;
    double final_delta = 0.0;
    std::vector<double> objective;  // observed-cell squared error per iteration
};

struct ImputedModel {
    LatentFactorModel model;
    ImputationReport report;
    MatrixXd completed;  // observed cells untouched, missing cells filled
};

namespace detail {

inline void check_rank_request(Index T, Index N, int k) {
    if (k < 1) throw ConfigError(fmt::format("number of factors must be >= 1, got {}", k));
    if (k > std::min(T, N)) {
        throw ConfigError(fmt::format("K = {} exceeds min(T, N) = {}", k, std::min(T, N)));
    }
}

// Unit vector orthogonal to the constant and to the first `filled` columns of
// U (scaled so that u'u = T). Only used when the demeaned matrix has fewer
// than k nonzero singular values.
inline VectorXd orthogonal_filler(const MatrixXd& U, Index filled, Index seed) {
    const Index T = U.rows();
    for (Index attempt = 0; attempt < T; ++attempt) {
        VectorXd v = VectorXd::Zero(T);
        v((seed + attempt) % T) = 1.0;
        v.array() -= v.mean();
        for (Index j = 0; j < filled; ++j) {
            v -= U.col(j) * (U.col(j).dot(v) / static_cast<double>(T));
        }
        const double norm = v.norm();
        if (norm > 1e-8) return v * (std::sqrt(static_cast<double>(T)) / norm);
    }
    return VectorXd::Zero(T);
}

}  // namespace detail

/// Principal components of a complete T x N matrix.
///
/// Columns are demeaned (means kept as intercepts), the factors are sqrt(T)
/// times the leading left singular vectors and the loadings are X'U/T. The
/// eigen-decomposition runs on the smaller of the two Gram matrices.
inline LatentFactorModel pca_balanced(const MatrixXd& X, int k) {
    const Index T = X.rows();
    const Index N = X.cols();
    detail::check_rank_request(T, N, k);
    if (!X.allFinite()) throw DataError("pca_balanced: non-finite entries");

    LatentFactorModel m;
    m.k = k;
    m.intercepts = X.colwise().mean().transpose();
    MatrixXd Xc = X.rowwise() - m.intercepts.transpose();
    const double Td = static_cast<double>(T);
    m.factors.resize(T, k);
    m.eigenvalues.resize(k);

    if (T <= N) {
        MatrixXd G = MatrixXd::Zero(T, T);
        G.selfadjointView<Eigen::Lower>().rankUpdate(Xc);
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(G.selfadjointView<Eigen::Lower>());
        if (eig.info() != Eigen::Success) throw NumericalError("PCA eigen-decomposition failed");
        for (int j = 0; j < k; ++j) {
            const Index src = T - 1 - j;
            m.factors.col(j) = eig.eigenvectors().col(src) * std::sqrt(Td);
            m.eigenvalues(j) = std::max(eig.eigenvalues()(src), 0.0) / Td;
        }
    } else {
        MatrixXd G = MatrixXd::Zero(N, N);
        G.selfadjointView<Eigen::Lower>().rankUpdate(Xc.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(G.selfadjointView<Eigen::Lower>());
        if (eig.info() != Eigen::Success) throw NumericalError("PCA eigen-decomposition failed");
        const double top = std::max(eig.eigenvalues()(N - 1), 0.0);
        for (int j = 0; j < k; ++j) {
            const Index src = N - 1 - j;
            const double lambda = std::max(eig.eigenvalues()(src), 0.0);
            m.eigenvalues(j) = lambda / Td;
            if (lambda > 1e-24 * std::max(top, 1e-300) && lambda > 0) {
                m.factors.col(j) = Xc * eig.eigenvectors().col(src) * std::sqrt(Td / lambda);
            } else {
                m.factors.col(j) = detail::orthogonal_filler(m.factors, j, j);
            }
        }
    }
    m.loadings = Xc.transpose() * m.factors / Td;
    for (int j = 0; j < k; ++j) {
        if (m.loadings.col(j).sum() < 0) {
            m.loadings.col(j) *= -1.0;
            m.factors.col(j) *= -1.0;
        }
    }
    return m;
}

namespace detail {

/// Cheap update of a k-factor PCA: `steps` rounds of subspace
/// iteration on Xc Xc' started from `U0`, then Rayleigh-Ritz so the factors
/// come out ordered and scaled like pca_balanced.
inline LatentFactorModel pca_refine(const MatrixXd& X, int k, const MatrixXd& U0, int steps) {
    const Index T = X.rows();
    const double Td = static_cast<double>(T);
    LatentFactorModel m;
    m.k = k;
    m.intercepts = X.colwise().mean().transpose();
    const MatrixXd Xc = X.rowwise() - m.intercepts.transpose();
    MatrixXd Q = U0;
    for (int s = 0; s < steps; ++s) {
        const MatrixXd Z = Xc * (Xc.transpose() * Q);
        Eigen::HouseholderQR<MatrixXd> qr(Z);
        Q = qr.householderQ() * MatrixXd::Identity(T, k);
    }
    const MatrixXd B = Xc.transpose() * Q;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(B.transpose() * B);
    if (eig.info() != Eigen::Success) throw NumericalError("PCA eigen-decomposition failed");
    m.factors.resize(T, k);
    m.eigenvalues.resize(k);
    for (int j = 0; j < k; ++j) {
        const Index src = k - 1 - j;
        m.factors.col(j) = Q * eig.eigenvectors().col(src) * std::sqrt(Td);
        m.eigenvalues(j) = std::max(eig.eigenvalues()(src), 0.0) / Td;
    }
    m.loadings = Xc.transpose() * m.factors / Td;
    for (int j = 0; j < k; ++j) {
        if (m.loadings.col(j).sum() < 0) {
            m.loadings.col(j) *= -1.0;
            m.factors.col(j) *= -1.0;
        }
    }
    return m;
}

}  // namespace detail

/// Squared error of the model over observed cells.
inline double observed_sse(const MatrixXd& X, const Mask& mask, const MatrixXd& fitted) {
    double sse = 0;
    for (Index i = 0; i < X.cols(); ++i) {
        for (Index t = 0; t < X.rows(); ++t) {
            if (mask(t, i)) {
                const double e = X(t, i) - fitted(t, i);
                sse += e * e;
            }
        }
    }
    return sse;
}

/// PCA on an incomplete matrix by iterative imputation.
///
/// Missing cells start at the column mean (`zeros`, i.e. zero after
/// demeaning) or the row mean, then are repeatedly replaced by the current
/// K-factor fitted values until the filled matrix changes by less than
/// `cfg.tol` in relative Frobenius norm. Observed cells are never altered.
inline ImputedModel impute_pca(const MatrixXd& X, const Mask& mask, int k,
                               const ImputationConfig& cfg = {}) {
    cfg.validate();
    const Index T = X.rows();
    const Index N = X.cols();
    detail::check_rank_request(T, N, k);
    if (mask.rows() != T || mask.cols() != N) throw DataError("impute_pca: mask shape mismatch");

    ImputedModel out;
    if (mask.all()) {
        out.model = pca_balanced(X, k);
        out.completed = X;
        out.report.objective.push_back(observed_sse(X, mask, out.model.fitted()));
        return out;
    }
    for (Index t = 0; t < T; ++t) {
        if (!mask.row(t).any()) throw DataError(fmt::format("impute_pca: row {} has no observations", t));
    }
    for (Index i = 0; i < N; ++i) {
        if (!mask.col(i).any()) throw DataError(fmt::format("impute_pca: column {} has no observations", i));
    }

    MatrixXd filled = X;
    if (cfg.init == ImputeInit::zeros) {
        for (Index i = 0; i < N; ++i) {
            double sum = 0;
            Index n = 0;
            for (Index t = 0; t < T; ++t) {
                if (mask(t, i)) { sum += X(t, i); ++n; }
            }
            const double mean = sum / static_cast<double>(n);
            for (Index t = 0; t < T; ++t) {
                if (!mask(t, i)) filled(t, i) = mean;
            }
        }
    } else {
        for (Index t = 0; t < T; ++t) {
            double sum = 0;
            Index n = 0;
            for (Index i = 0; i < N; ++i) {
                if (mask(t, i)) { sum += X(t, i); ++n; }
            }
            const double mean = sum / static_cast<double>(n);
            for (Index i = 0; i < N; ++i) {
                if (!mask(t, i)) filled(t, i) = mean;
            }
        }
    }

    auto& rep = out.report;
    rep.converged = false;
    // Between exact decompositions the leading subspace is tracked by two
    // warm-started subspace-iteration steps; a full decomposition confirms
    // convergence before it is declared.
    bool exact = true;
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        out.model = exact || out.model.factors.cols() != k
                        ? pca_balanced(filled, k)
                        : detail::pca_refine(filled, k, out.model.factors, 2);
        const MatrixXd fit = out.model.fitted();
        rep.objective.push_back(observed_sse(X, mask, fit));
        double change = 0;
        for (Index i = 0; i < N; ++i) {
            for (Index t = 0; t < T; ++t) {
                if (!mask(t, i)) {
                    const double d = fit(t, i) - filled(t, i);
                    change += d * d;
                    filled(t, i) = fit(t, i);
                }
            }
        }
        const double base = filled.norm();
        rep.final_delta = base > 0 ? std::sqrt(change) / base : std::sqrt(change);
        rep.iterations = iter;
        if (rep.final_delta < cfg.tol) {
            if (exact) {
                rep.converged = true;
                break;
            }
            exact = true;
        } else {
            exact = false;
        }
    }
    if (!rep.converged) out.model = pca_balanced(filled, k);
    if (!rep.converged) {
        spdlog::debug("impute_pca: K={} not converged after {} iterations (delta {:.3g})", k,
                     rep.iterations, rep.final_delta);
    }
    out.completed = std::move(filled);
    return out;
}

inline ImputedModel impute_pca(const ReturnPanel& panel, int k, const ImputationConfig& cfg = {}) {
    return impute_pca(panel.returns(), panel.observed(), k, cfg);
}

/// One row of the factor-count table.
struct IcRow {
    int k = 0;
    double v = 0;  // mean squared residual over observed cells
    double icp1 = 0;
    double icp2 = 0;
    double icp3 = 0;
    int iterations = 0;
    bool converged = true;
};

struct FactorCountSelection {
    int k = 0;  // argmin of ICp2
    double v0 = 0;
    std::vector<IcRow> table;
};

/// Number of latent factors by the Bai-Ng ICp2 criterion.
///
/// V(k) is floored at 1e-12 V(0) so that fits exact to machine precision do
/// not produce a spurious -inf log and the penalty decides among them.
inline FactorCountSelection bai_ng_k(const MatrixXd& X, const Mask& mask, int k_max,
                                     const ImputationConfig& cfg = {}) {
    const Index T = X.rows();
    const Index N = X.cols();
    detail::check_rank_request(T, N, k_max);
    const double n_obs = static_cast<double>(mask.count());
    const double Nd = static_cast<double>(N);
    const double Td = static_cast<double>(T);

    FactorCountSelection sel;
    {
        double sse = 0;
        for (Index i = 0; i < N; ++i) {
            double sum = 0;
            Index n = 0;
            for (Index t = 0; t < T; ++t) {
                if (mask(t, i)) { sum += X(t, i); ++n; }
            }
            const double mean = n ? sum / static_cast<double>(n) : 0.0;
            for (Index t = 0; t < T; ++t) {
                if (mask(t, i)) sse += (X(t, i) - mean) * (X(t, i) - mean);
            }
        }
        sel.v0 = sse / n_obs;
    }
    const double floor = 1e-12 * sel.v0;
    const double c2 = std::min(Nd, Td);
    const double ratio = (Nd + Td) / (Nd * Td);

    double best = INFINITY;
    for (int k = 1; k <= k_max; ++k) {
        const auto fit = impute_pca(X, mask, k, cfg);
        IcRow row;
        row.k = k;
        row.v = observed_sse(X, mask, fit.model.fitted()) / n_obs;
        row.iterations = fit.report.iterations;
        row.converged = fit.report.converged;
        const double lv = std::log(std::max(row.v, floor));
        row.icp1 = lv + k * ratio * std::log(1.0 / ratio);
        row.icp2 = lv + k * ratio * std::log(c2);
        row.icp3 = lv + k * std::log(c2) / c2;
        if (row.icp2 < best) {
            best = row.icp2;
            sel.k = k;
        }
        sel.table.push_back(row);
    }
    return sel;
}

inline FactorCountSelection bai_ng_k(const ReturnPanel& panel, int k_max,
                                     const ImputationConfig& cfg = {}) {
    return bai_ng_k(panel.returns(), panel.observed(), k_max, cfg);
}

}  // namespace cryptoprem
