#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cryptoprem/error.hpp"
#include "cryptoprem/latent_pca.hpp"
#include "cryptoprem/ols.hpp"
#include "cryptoprem/panel.hpp"
#include "cryptoprem/premia.hpp"

namespace cryptoprem {

/// Regression of the observed factors on the latent ones: g_t = a + Lambda u_t + e_t.
struct FactorMapping {
    MatrixXd lambda;      // L x K
    VectorXd intercepts;  // L
    VectorXd r_squared;   // L
    MatrixXd residuals;   // T x L
    double condition = 1.0;
};

/// Time-series OLS of each observed factor (columns of `G`) on a constant and
/// the latent factors `U`.
inline FactorMapping pass2_map(const MatrixXd& G, const MatrixXd& U,
                               const std::vector<std::string>& names = {}) {
    if (G.rows() != U.rows()) {
        throw DataError(fmt::format("pass 2: {} factor weeks vs {} latent weeks", G.rows(), U.rows()));
    }
    if (G.cols() < 1) throw DataError("pass 2: no observed factors");
    for (Index j = 0; j < G.cols(); ++j) {
        const double centered = (G.col(j).array() - G.col(j).mean()).matrix().norm();
        if (!(centered > 1e-12 * std::max(G.col(j).norm(), 1e-300))) {
            throw NumericalError(fmt::format(
                "pass 2: observed factor {} has zero variance",
                names.empty() ? std::to_string(j) : names[static_cast<std::size_t>(j)]));
        }
    }
    const auto fit = ols(with_intercept(U), G, "pass 2 factor mapping");
    FactorMapping map;
    map.intercepts = fit.coef.row(0).transpose();
    map.lambda = fit.coef.bottomRows(U.cols()).transpose();
    map.residuals = fit.residuals;
    map.condition = fit.condition;
    map.r_squared.resize(G.cols());
    for (Index j = 0; j < G.cols(); ++j) {
        const double sst = (G.col(j).array() - G.col(j).mean()).square().sum();
        const double r2 = 1.0 - fit.residuals.col(j).squaredNorm() / sst;
        map.r_squared(j) = std::clamp(r2, 0.0, 1.0);
    }
    return map;
}

inline FactorMapping pass2_map(const FactorSet& G, const LatentFactorModel& model) {
    G.validate();
    return pass2_map(G.values, model.factors, G.names);
}

/// Each asset's mean return over its own observed weeks.
inline VectorXd asset_mean_returns(const ReturnPanel& panel) {
    VectorXd means(panel.assets());
    for (Index i = 0; i < panel.assets(); ++i) {
        double sum = 0;
        Index n = 0;
        for (Index t = 0; t < panel.periods(); ++t) {
            if (panel.observed()(t, i)) {
                sum += panel.returns()(t, i);
                ++n;
            }
        }
        means(i) = sum / static_cast<double>(n);
    }
    return means;
}

struct CrossSectionPricing {
    VectorXd gamma;         // K
    double zero_beta = 0;   // only with an intercept
    double condition = 1.0;
};

/// Cross-sectional OLS of mean excess returns on the estimated loadings.
inline CrossSectionPricing price_latent_factors(const VectorXd& mean_returns,
                                                const MatrixXd& loadings, bool intercept) {
    if (mean_returns.size() != loadings.rows()) {
        throw DataError("pass 3: loadings and mean returns disagree on N");
    }
    CrossSectionPricing out;
    const MatrixXd design = intercept ? with_intercept(loadings) : loadings;
    const auto fit = ols(design, mean_returns, "pass 3 cross-section");
    out.condition = fit.condition;
    if (intercept) {
        out.zero_beta = fit.coef(0, 0);
        out.gamma = fit.coef.col(0).tail(loadings.cols());
    } else {
        out.gamma = fit.coef.col(0);
    }
    return out;
}

/// Latent prices of risk gamma = (B'B)^{-1} B' rbar.
inline VectorXd pass3_gamma(const ReturnPanel& panel, const LatentFactorModel& model,
                            bool intercept = false) {
    return price_latent_factors(asset_mean_returns(panel), model.loadings, intercept).gamma;
}

struct ThreePassConfig {
    ImputationConfig imputation;
    bool cs_intercept = false;
};

struct ThreePassResult {
    RiskPremiaEstimate estimate;
    LatentFactorModel model;
    FactorMapping mapping;
    CrossSectionPricing pricing;
    ImputationReport imputation;
};

/// Latent PCA, factor mapping, latent pricing, then lambda_g = Lambda gamma.
/// P-values are left unset.
inline ThreePassResult three_pass_detail(const ReturnPanel& panel, const FactorSet& G, int k,
                                         const ThreePassConfig& cfg = {}) {
    G.validate();
    if (G.time_index != panel.time_index()) {
        throw DataError("three-pass: factor set and panel are not on the same weeks");
    }
    ThreePassResult r;
    auto imputed = impute_pca(panel, k, cfg.imputation);
    r.model = std::move(imputed.model);
    r.imputation = std::move(imputed.report);
    r.mapping = pass2_map(G, r.model);
    r.pricing = price_latent_factors(asset_mean_returns(panel), r.model.loadings, cfg.cs_intercept);

    auto& est = r.estimate;
    est.method = Method::three_pass;
    est.factor_names = G.names;
    est.gamma = r.pricing.gamma;
    est.lambda = r.mapping.lambda * r.pricing.gamma;
    est.clear_pvalues();
    if (!r.imputation.converged) {
        est.warnings.push_back(fmt::format("latent PCA did not converge (delta {:.3g})",
                                           r.imputation.final_delta));
    }
    if (r.mapping.condition > kConditionWarning) {
        est.warnings.push_back(
            fmt::format("pass 2 design condition number {:.3g}", r.mapping.condition));
    }
    if (r.pricing.condition > kConditionWarning) {
        est.warnings.push_back(
            fmt::format("pass 3 design condition number {:.3g}", r.pricing.condition));
    }
    return r;
}

inline RiskPremiaEstimate run_three_pass(const ReturnPanel& panel, const FactorSet& G, int k,
                                         const ThreePassConfig& cfg = {}) {
    return three_pass_detail(panel, G, k, cfg).estimate;
}

}  // namespace cryptoprem
