#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cryptoprem/error.hpp"
#include "cryptoprem/panel.hpp"

namespace cryptoprem::sim {

// Synthetic economies with known prices of risk, used to validate the
// estimators.

inline MatrixXd standard_normal(Index rows, Index cols, std::mt19937_64& gen) {
    std::normal_distribution<double> z(0.0, 1.0);
    MatrixXd m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) m(i, j) = z(gen);
    }
    return m;
}

/// Random missingness with probability `rate`, re-drawn until every asset has
/// at least two observations and every week at least one.
inline Mask random_mask(Index T, Index N, double rate, std::mt19937_64& gen) {
    std::bernoulli_distribution miss(rate);
    Mask m(T, N);
    while (true) {
        for (Index i = 0; i < N; ++i) {
            for (Index t = 0; t < T; ++t) m(t, i) = !miss(gen);
        }
        bool ok = true;
        for (Index i = 0; i < N && ok; ++i) ok = m.col(i).count() >= 2;
        for (Index t = 0; t < T && ok; ++t) ok = m.row(t).any();
        if (ok) return m;
    }
}

/// Latent-factor economy:
///   r_it = beta_i'(gamma + v_t) + e_it,   v_t ~ N(0, I_K), beta_i ~ N(0, I_K)
///   g_t  = a + Lambda v_t + w_t,          w_t ~ N(0, g_noise^2 I_L)
/// Idiosyncratic variance is K / snr, so the systematic-to-noise variance
/// ratio of a typical asset equals `snr`. True observed-factor premia are
/// Lambda gamma.
struct EconomySpec {
    Index assets = 100;
    Index periods = 105;
    VectorXd gamma;   // K
    MatrixXd lambda;  // L x K
    double snr = 1.0;
    double missing = 0.0;
    double g_noise = 0.5;
    std::uint64_t seed = 1;
};

struct Economy {
    ReturnPanel panel;
    FactorSet factors;
    VectorXd true_lambda;  // L
    MatrixXd betas;        // N x K
    MatrixXd innovations;  // T x K
};

inline Economy simulate_economy(const EconomySpec& spec) {
    const Index K = spec.gamma.size();
    const Index L = spec.lambda.rows();
    if (K < 1 || spec.lambda.cols() != K) throw ConfigError("economy: Lambda must be L x K");
    std::mt19937_64 gen(spec.seed);
    const Index T = spec.periods;
    const Index N = spec.assets;

    MatrixXd betas = standard_normal(N, K, gen);
    MatrixXd v = standard_normal(T, K, gen);
    const double noise_sd = std::sqrt(static_cast<double>(K) / spec.snr);
    MatrixXd eps = standard_normal(T, N, gen) * noise_sd;
    MatrixXd shocks = v.rowwise() + spec.gamma.transpose();
    MatrixXd returns = shocks * betas.transpose() + eps;

    Mask mask = spec.missing > 0 ? random_mask(T, N, spec.missing, gen) : Mask::Constant(T, N, true);
    MatrixXd g = v * spec.lambda.transpose() + standard_normal(T, L, gen) * spec.g_noise;
    for (Index j = 0; j < L; ++j) g.col(j).array() += 0.1 * static_cast<double>(j);

    ReturnPanel panel = make_panel(returns, mask);
    FactorSet G;
    G.time_index = panel.time_index();
    for (Index j = 0; j < L; ++j) {
        G.names.push_back(fmt::format("g{}", j + 1));
        G.kinds.push_back(FactorKind::tradable);
        G.units.push_back(Unit::percent);
    }
    G.values = std::move(g);
    return Economy{std::move(panel), std::move(G), spec.lambda * spec.gamma, std::move(betas),
                   std::move(v)};
}

/// Observed-factor economy for Fama-MacBeth:
///   r_it = beta_i' lambda + beta_i'(f_t - mu) + e_it,  f_t ~ N(mu, sigma_f^2 I_L)
/// with beta_i ~ N(beta_mean, beta_sd^2) elementwise and a balanced panel.
struct ObservedEconomySpec {
    Index assets = 10;
    Index periods = 2000;
    VectorXd lambda;  // L
    double factor_sd = 1.0;
    double beta_mean = 1.0;
    double beta_sd = 1.0;
    double noise_sd = 1.0;
    std::uint64_t seed = 1;
};

struct ObservedEconomy {
    ReturnPanel panel;
    FactorSet factors;
    MatrixXd betas;
};

inline ObservedEconomy simulate_observed_economy(const ObservedEconomySpec& spec) {
    const Index L = spec.lambda.size();
    std::mt19937_64 gen(spec.seed);
    const Index T = spec.periods;
    const Index N = spec.assets;
    MatrixXd betas = (standard_normal(N, L, gen) * spec.beta_sd).array() + spec.beta_mean;
    MatrixXd f = standard_normal(T, L, gen) * spec.factor_sd;  // f_t - mu
    MatrixXd eps = standard_normal(T, N, gen) * spec.noise_sd;
    MatrixXd returns = (f.rowwise() + spec.lambda.transpose()) * betas.transpose() + eps;
    ReturnPanel panel = make_panel(returns);
    FactorSet G;
    G.time_index = panel.time_index();
    for (Index j = 0; j < L; ++j) {
        G.names.push_back(fmt::format("f{}", j + 1));
        G.kinds.push_back(FactorKind::nontradable);
        G.units.push_back(Unit::level);
    }
    G.values = f.array() + 0.5;  // any mean: only covariances identify the betas
    return ObservedEconomy{std::move(panel), std::move(G), std::move(betas)};
}

}  // namespace cryptoprem::sim
