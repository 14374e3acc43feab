#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cryptoprem/error.hpp"
#include "cryptoprem/ols.hpp"
#include "cryptoprem/panel.hpp"
#include "cryptoprem/premia.hpp"

namespace cryptoprem {

/// First-stage time-series betas for the assets with enough history.
struct BetaMatrix {
    std::vector<std::string> factor_names;
    MatrixXd betas;                 // N_kept x L
    VectorXd intercepts;            // N_kept
    std::vector<Index> obs_count;   // T_i per kept asset
    std::vector<Index> asset_index; // column in the panel of each kept asset
    std::vector<std::string> excluded;
    MatrixXd factor_cov;            // L x L, n-1 sample covariance of G
};

struct FMResult {
    std::vector<std::string> factor_names;
    VectorXd lambda_mean;   // L
    MatrixXd lambda_t;      // T x L, NaN rows for skipped weeks
    VectorXd zero_beta_t;   // T
    VectorXd se_fm;
    VectorXd se_shanken;
    VectorXd pvalues;       // two-sided normal on Shanken errors
    VectorXd pvalues_fm;    // two-sided normal on unadjusted errors
    double shanken_multiplier = 1.0;  // 1 + lambda' Sigma_f^{-1} lambda
    Index weeks_used = 0;
    std::vector<Date> skipped_weeks;
};

inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

inline MatrixXd sample_covariance(const MatrixXd& X) {
    const MatrixXd centered = X.rowwise() - X.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(X.rows() - 1);
}

/// Per-asset OLS of returns on a constant and all L factors over the weeks the
/// asset is observed. Assets with fewer than L + 2 weeks are excluded.
inline BetaMatrix ts_betas(const ReturnPanel& panel, const FactorSet& G) {
    G.validate();
    if (G.time_index != panel.time_index()) {
        throw DataError("Fama-MacBeth: factor set and panel are not on the same weeks");
    }
    const Index L = G.factors();
    BetaMatrix out;
    out.factor_names = G.names;
    out.factor_cov = sample_covariance(G.values);
    std::vector<VectorXd> rows;
    for (Index i = 0; i < panel.assets(); ++i) {
        std::vector<Index> weeks;
        for (Index t = 0; t < panel.periods(); ++t) {
            if (panel.observed()(t, i)) weeks.push_back(t);
        }
        const auto Ti = static_cast<Index>(weeks.size());
        if (Ti < L + 2) {
            out.excluded.push_back(panel.asset_ids()[i]);
            continue;
        }
        MatrixXd X(Ti, L + 1);
        VectorXd y(Ti);
        for (Index s = 0; s < Ti; ++s) {
            X(s, 0) = 1.0;
            X.row(s).tail(L) = G.values.row(weeks[s]);
            y(s) = panel.returns()(weeks[s], i);
        }
        try {
            const auto fit = ols(X, y, "time-series beta");
            rows.push_back(fit.coef.col(0));
        } catch (const NumericalError&) {
            out.excluded.push_back(panel.asset_ids()[i]);
            continue;
        }
        out.obs_count.push_back(Ti);
        out.asset_index.push_back(i);
    }
    if (rows.empty()) throw DataError("Fama-MacBeth: every asset lacks the history for betas");
    const auto N = static_cast<Index>(rows.size());
    out.betas.resize(N, L);
    out.intercepts.resize(N);
    for (Index n = 0; n < N; ++n) {
        out.intercepts(n) = rows[n](0);
        out.betas.row(n) = rows[n].tail(L).transpose();
    }
    return out;
}

/// Weekly cross-sectional OLS of returns on a constant and the betas, then the
/// time-series mean of the slopes. Shanken errors scale the beta-uncertainty
/// part of the FM variance by (1 + lambda' Sigma_f^{-1} lambda) and add back
/// Sigma_f / T.
inline FMResult cs_premia(const BetaMatrix& betas, const ReturnPanel& panel) {
    const Index L = betas.betas.cols();
    const auto N = static_cast<Index>(betas.asset_index.size());
    if (N < L + 2) {
        throw DataError(fmt::format("Fama-MacBeth: {} assets for {} factors (need {})", N, L, L + 2));
    }
    const Index T = panel.periods();
    FMResult out;
    out.factor_names = betas.factor_names;
    out.lambda_t = MatrixXd::Constant(T, L, kNaN);
    out.zero_beta_t = VectorXd::Constant(T, kNaN);

    std::vector<Index> members;
    for (Index t = 0; t < T; ++t) {
        members.clear();
        for (Index n = 0; n < N; ++n) {
            if (panel.observed()(t, betas.asset_index[n])) members.push_back(n);
        }
        const auto M = static_cast<Index>(members.size());
        if (M < L + 2) {
            out.skipped_weeks.push_back(panel.time_index()[t]);
            continue;
        }
        MatrixXd X(M, L + 1);
        VectorXd y(M);
        for (Index m = 0; m < M; ++m) {
            X(m, 0) = 1.0;
            X.row(m).tail(L) = betas.betas.row(members[m]);
            y(m) = panel.returns()(t, betas.asset_index[members[m]]);
        }
        try {
            const auto fit = ols(X, y, "weekly cross-section");
            out.zero_beta_t(t) = fit.coef(0, 0);
            out.lambda_t.row(t) = fit.coef.col(0).tail(L).transpose();
        } catch (const NumericalError&) {
            out.skipped_weeks.push_back(panel.time_index()[t]);
        }
    }
    std::vector<Index> used;
    for (Index t = 0; t < T; ++t) {
        if (!std::isnan(out.zero_beta_t(t))) used.push_back(t);
    }
    out.weeks_used = static_cast<Index>(used.size());
    if (out.weeks_used < 2) throw NumericalError("Fama-MacBeth: fewer than two usable weeks");

    MatrixXd lam(out.weeks_used, L);
    for (Index s = 0; s < out.weeks_used; ++s) lam.row(s) = out.lambda_t.row(used[s]);
    out.lambda_mean = lam.colwise().mean().transpose();
    const double Tu = static_cast<double>(out.weeks_used);
    const MatrixXd lam_cov = sample_covariance(lam);
    out.se_fm = (lam_cov.diagonal() / Tu).cwiseSqrt();

    Eigen::LDLT<MatrixXd> sigma(betas.factor_cov);
    if (sigma.info() != Eigen::Success || !sigma.isPositive() ||
        betas.factor_cov.diagonal().minCoeff() <= 0) {
        throw NumericalError("Fama-MacBeth: factor covariance is singular");
    }
    const double c = out.lambda_mean.dot(sigma.solve(out.lambda_mean));
    out.shanken_multiplier = 1.0 + std::max(c, 0.0);
    out.se_shanken.resize(L);
    out.pvalues.resize(L);
    out.pvalues_fm.resize(L);
    for (Index j = 0; j < L; ++j) {
        const double factor_part = betas.factor_cov(j, j) / Tu;
        const double beta_part = std::max(out.se_fm(j) * out.se_fm(j) - factor_part, 0.0);
        out.se_shanken(j) = std::sqrt(out.shanken_multiplier * beta_part + factor_part);
        out.pvalues(j) = normal_two_sided_p(out.lambda_mean(j) / out.se_shanken(j));
        out.pvalues_fm(j) = normal_two_sided_p(out.lambda_mean(j) / out.se_fm(j));
    }
    return out;
}

inline FMResult run_fama_macbeth(const ReturnPanel& panel, const FactorSet& G) {
    return cs_premia(ts_betas(panel, G), panel);
}

inline RiskPremiaEstimate to_estimate(const FMResult& fm) {
    RiskPremiaEstimate est;
    est.method = Method::fama_macbeth;
    est.factor_names = fm.factor_names;
    est.lambda = fm.lambda_mean;
    est.set_pvalues(fm.pvalues);
    for (const auto& d : fm.skipped_weeks) {
        est.warnings.push_back("skipped cross-section " + format_date(d));
    }
    return est;
}

}  // namespace cryptoprem
