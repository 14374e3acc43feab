#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cryptoprem/error.hpp"
#include "cryptoprem/panel.hpp"
#include "cryptoprem/three_pass.hpp"

namespace cryptoprem {

struct BootstrapConfig {
    int reps = 1000;
    int block_len = 8;
    std::uint64_t seed = 0;
    int workers = 1;

    void validate(Index T) const {
        if (reps < 1) throw ConfigError("bootstrap reps must be >= 1");
        if (block_len < 1 || block_len > T) {
            throw ConfigError(fmt::format("bootstrap block length {} outside [1, {}]", block_len, T));
        }
        if (workers < 1) throw ConfigError("bootstrap workers must be >= 1");
    }
};

/// Resampled premia: one row of `draws` per successful replication, in
/// replication order (`rep_ids` gives the replication number of each row).
struct BootstrapDistribution {
    std::vector<std::string> factor_names;
    VectorXd point_estimate;
    MatrixXd draws;
    std::vector<int> rep_ids;
    int reps = 0;
    int failed_reps = 0;

    /// More than 5% of replications failed.
    [[nodiscard]] bool flagged() const { return failed_reps * 20 > reps; }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent stream per replication, so results do not depend on the order
/// in which workers pick replications up.
inline std::uint64_t replication_seed(std::uint64_t seed, int rep) {
    return splitmix64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(rep) + 1));
}

/// Uniform integer in [0, n) by rejection; identical on every platform.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = 0;
    do {
        x = gen();
    } while (x >= limit);
    return x % n;
}

/// Moving-block bootstrap time indices (0-based): ceil(T/b) overlapping blocks
/// of b consecutive weeks, starts drawn uniformly from [0, T-b], concatenated
/// and truncated to length T.
inline std::vector<Index> mbb_indices(Index T, const BootstrapConfig& cfg, int rep) {
    cfg.validate(T);
    const Index b = cfg.block_len;
    std::mt19937_64 gen(replication_seed(cfg.seed, rep));
    const auto starts = static_cast<std::uint64_t>(T - b + 1);
    std::vector<Index> idx;
    idx.reserve(static_cast<std::size_t>(T + b));
    while (static_cast<Index>(idx.size()) < T) {
        const auto s = static_cast<Index>(uniform_below(gen, starts));
        for (Index j = 0; j < b; ++j) idx.push_back(s + j);
    }
    idx.resize(static_cast<std::size_t>(T));
    return idx;
}

/// Rows of the panel in the given order, relabelled as a fresh weekly series
/// starting at the original first week. Assets left with fewer than two
/// observations are dropped.
inline ReturnPanel resample_panel(const ReturnPanel& panel, std::span<const Index> rows) {
    const auto T = static_cast<Index>(rows.size());
    MatrixXd r(T, panel.assets()), c(T, panel.assets());
    Mask m(T, panel.assets());
    std::vector<Date> index(rows.size());
    for (Index t = 0; t < T; ++t) {
        r.row(t) = panel.returns().row(rows[t]);
        c.row(t) = panel.market_caps().row(rows[t]);
        m.row(t) = panel.observed().row(rows[t]);
        index[t] = add_weeks(panel.time_index().front(), t);
    }
    return drop_sparse_assets(std::move(index), panel.asset_ids(), r, m, c);
}

inline FactorSet resample_factors(const FactorSet& G, std::span<const Index> rows,
                                  const std::vector<Date>& index) {
    FactorSet out = G;
    out.time_index = index;
    out.values.resize(static_cast<Index>(rows.size()), G.factors());
    for (std::size_t t = 0; t < rows.size(); ++t) {
        out.values.row(static_cast<Index>(t)) = G.values.row(rows[t]);
    }
    return out;
}

/// Reruns the full three-pass estimator (K fixed) on `cfg.reps` moving-block
/// resamples of the weeks. Panel rows and factor rows are resampled with the
/// same indices. Replications that throw are counted and skipped.
inline BootstrapDistribution bootstrap_premia(const ReturnPanel& panel, const FactorSet& G, int k,
                                              const BootstrapConfig& cfg,
                                              const ThreePassConfig& tp = {}) {
    cfg.validate(panel.periods());
    BootstrapDistribution dist;
    dist.factor_names = G.names;
    dist.reps = cfg.reps;
    dist.point_estimate = run_three_pass(panel, G, k, tp).lambda;

    std::vector<std::optional<VectorXd>> results(static_cast<std::size_t>(cfg.reps));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int rep = next++; rep < cfg.reps; rep = next++) {
            try {
                const auto rows = mbb_indices(panel.periods(), cfg, rep);
                const auto p = resample_panel(panel, rows);
                const auto g = resample_factors(G, rows, p.time_index());
                auto lambda = run_three_pass(p, g, k, tp).lambda;
                if (lambda.allFinite()) results[static_cast<std::size_t>(rep)] = std::move(lambda);
            } catch (const std::exception& e) {
                spdlog::debug("bootstrap replication {} failed: {}", rep, e.what());
            }
        }
    };
    const int n_workers = std::min(cfg.workers, cfg.reps);
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }

    int ok = 0;
    for (const auto& r : results) ok += r.has_value();
    dist.failed_reps = cfg.reps - ok;
    dist.draws.resize(ok, G.factors());
    int row = 0;
    for (int rep = 0; rep < cfg.reps; ++rep) {
        if (results[static_cast<std::size_t>(rep)]) {
            dist.draws.row(row++) = results[static_cast<std::size_t>(rep)]->transpose();
            dist.rep_ids.push_back(rep);
        }
    }
    if (dist.flagged()) {
        spdlog::warn("bootstrap: {} of {} replications failed", dist.failed_reps, dist.reps);
    }
    return dist;
}

/// Recentered two-sided p-values: the share of draws with
/// |lambda* - lambda_hat| >= |lambda_hat|.
inline VectorXd recentered_pvalue(const BootstrapDistribution& dist) {
    if (dist.draws.rows() == 0) throw NumericalError("bootstrap: no successful replications");
    const Index L = dist.point_estimate.size();
    VectorXd p(L);
    for (Index j = 0; j < L; ++j) {
        const double hat = dist.point_estimate(j);
        const double threshold = std::abs(hat);
        Index hits = 0;
        for (Index b = 0; b < dist.draws.rows(); ++b) {
            if (std::abs(dist.draws(b, j) - hat) >= threshold) ++hits;
        }
        p(j) = static_cast<double>(hits) / static_cast<double>(dist.draws.rows());
    }
    return p;
}

inline void write_bootstrap_draws(const BootstrapDistribution& dist,
                                  const std::filesystem::path& path) {
    std::string out = "rep,factor,lambda_star\n";
    for (Index b = 0; b < dist.draws.rows(); ++b) {
        for (std::size_t j = 0; j < dist.factor_names.size(); ++j) {
            out += fmt::format("{},{},{}\n", dist.rep_ids[static_cast<std::size_t>(b)],
                               dist.factor_names[j],
                               csv::number(dist.draws(b, static_cast<Index>(j))));
        }
    }
    csv::write_text(path, out);
}

}  // namespace cryptoprem
