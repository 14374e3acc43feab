#pragma once

// Randomized property checks for factor construction. Each check draws
// `cases` random inputs from a seeded generator and returns the worst value
// of its metric, so callers can compare against a tolerance.

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"

namespace testing_support {

struct RandomPanelSpec {
    Index min_t = 6, max_t = 30;
    Index min_n = 4, max_n = 40;
    double missing = 0.15;
    double cap_missing = 0.05;
};

/// Random unbalanced panel with positive caps (a few missing). Every asset
/// keeps at least two observed weeks.
inline cryptoprem::ReturnPanel random_panel(std::mt19937_64& gen, const RandomPanelSpec& s = {}) {
    using namespace cryptoprem;
    std::uniform_int_distribution<Index> tdist(s.min_t, s.max_t), ndist(s.min_n, s.max_n);
    const Index T = tdist(gen), N = ndist(gen);
    std::bernoulli_distribution miss(s.missing), cap_miss(s.cap_missing);
    std::lognormal_distribution<double> cap(20.0, 2.0);
    std::student_t_distribution<double> ret(4.0);
    MatrixXd r(T, N), c(T, N);
    Mask m(T, N);
    for (Index i = 0; i < N; ++i) {
        for (Index t = 0; t < T; ++t) {
            r(t, i) = 5.0 * ret(gen);
            m(t, i) = !miss(gen);
            c(t, i) = cap_miss(gen) ? kNaN : cap(gen);
        }
        m(0, i) = m(T - 1, i) = true;
    }
    return make_panel(r, m, c);
}

/// Max |sum(weights) - 1| and min weight over market and quartile legs in
/// every formable week.
struct WeightReport {
    double worst_sum_error = 0;
    double min_weight = 1;
    int legs_checked = 0;
};

inline WeightReport check_weight_normalization(std::uint64_t seed, int cases) {
    using namespace cryptoprem;
    std::mt19937_64 gen(seed);
    WeightReport rep;
    auto visit = [&](const PortfolioLeg& leg) {
        double sum = 0;
        for (double w : leg.weights) {
            sum += w;
            rep.min_weight = std::min(rep.min_weight, w);
        }
        rep.worst_sum_error = std::max(rep.worst_sum_error, std::abs(sum - 1.0));
        ++rep.legs_checked;
    };
    for (int c = 0; c < cases; ++c) {
        const auto p = random_panel(gen);
        const MatrixXd signal = normal_matrix(p.periods(), p.assets(), gen);
        for (const auto weighting : {Weighting::value, Weighting::equal}) {
            SortSpec spec{"s", 1, Leg::top25, weighting, false, 1};
            for (Index t = 1; t < p.periods(); ++t) {
                if (weighting == Weighting::value) {
                    try {
                        visit(market_weights(p, t));
                    } catch (const DataError&) {
                    }
                }
                try {
                    const auto legs = quartile_legs(p, signal, spec, t);
                    visit(legs.long_leg);
                    visit(legs.short_leg);
                } catch (const DataError&) {
                    // fewer than four eligible assets this week
                }
            }
        }
    }
    return rep;
}

/// Largest absolute difference between long_short on a signal and on a
/// strictly increasing transform of it (several transforms per case).
inline double check_rank_invariance(std::uint64_t seed, int cases) {
    using namespace cryptoprem;
    std::mt19937_64 gen(seed);
    double worst = 0;
    std::uniform_int_distribution<int> pick(0, 3);
    std::bernoulli_distribution coarse(0.3);
    int compared = 0;
    while (compared < cases) {
        auto p = random_panel(gen, {8, 30, 8, 40, 0.1, 0.0});
        MatrixXd s = normal_matrix(p.periods(), p.assets(), gen);
        if (coarse(gen)) s = (s * 2.0).array().round();  // ties, broken by asset id
        MatrixXd ts = s;
        switch (pick(gen)) {
            case 0: ts = s.array().exp(); break;
            case 1: ts = s.array().cube() + s.array(); break;
            case 2: ts = s.array().atan(); break;
            default: ts = (s.array() * 3.5 + 11.0); break;
        }
        SortSpec spec{"s", 1, coarse(gen) ? Leg::bottom25 : Leg::top25,
                      coarse(gen) ? Weighting::equal : Weighting::value, false, 1};
        try {
            const auto a = long_short(p, s, spec);
            const auto b = long_short(p, ts, spec);
            if (a.time_index != b.time_index) return INFINITY;
            for (std::size_t t = 0; t < a.size(); ++t) {
                worst = std::max(worst, std::abs(a.values[t] - b.values[t]));
            }
            ++compared;
        } catch (const DataError&) {
            // panel too thin to form every week; draw another
        }
    }
    return worst;
}

/// Worst |corr(orthogonalize(y, x), x)| and worst mean shift.
struct OrthReport {
    double worst_corr = 0;
    double worst_mean_shift = 0;
};

inline OrthReport check_orthogonalize(std::uint64_t seed, int cases) {
    using namespace cryptoprem;
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> len(3, 200);
    std::normal_distribution<double> coef(0, 3), level(0, 20);
    OrthReport rep;
    for (int c = 0; c < cases; ++c) {
        const int T = len(gen);
        const MatrixXd z = normal_matrix(T, 2, gen);
        std::vector<double> x(T), y(T);
        const double b = coef(gen), mx = level(gen), my = level(gen), sx = std::exp(coef(gen) / 3);
        for (int t = 0; t < T; ++t) {
            x[t] = mx + sx * z(t, 0);
            y[t] = my + b * z(t, 0) + z(t, 1);
        }
        const auto out = orthogonalize(frame(y, "y"), frame(x, "x"));
        const double corr = correlation(out.values, x);
        // correlation of a constant output is undefined; treat it as zero
        if (std::isfinite(corr)) rep.worst_corr = std::max(rep.worst_corr, std::abs(corr));
        const double shift = std::abs(sample_mean(out.values) - sample_mean(y));
        rep.worst_mean_shift = std::max(rep.worst_mean_shift, shift / std::max(1.0, std::abs(my)));
    }
    return rep;
}

/// Worst |slope| of ar1_residual output regressed (with intercept) on the
/// lagged input series.
inline double check_ar1_orthogonality(std::uint64_t seed, int cases) {
    using namespace cryptoprem;
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> len(4, 200);
    std::uniform_real_distribution<double> rho(-0.95, 0.95);
    std::normal_distribution<double> z(0, 1), level(0, 10);
    double worst = 0;
    for (int c = 0; c < cases; ++c) {
        const int T = len(gen);
        const double r = rho(gen), a = level(gen);
        std::vector<double> x(T);
        x[0] = a / (1 - r) + z(gen);
        for (int t = 1; t < T; ++t) x[t] = a + r * x[t - 1] + z(gen);
        const auto e = ar1_residual(frame(x, "x"));
        const std::vector<double> lag(x.begin(), x.end() - 1);
        const double mlag = sample_mean(lag), me = sample_mean(e.values);
        double sxy = 0, sxx = 0;
        for (std::size_t t = 0; t < lag.size(); ++t) {
            sxy += (lag[t] - mlag) * (e.values[t] - me);
            sxx += (lag[t] - mlag) * (lag[t] - mlag);
        }
        worst = std::max(worst, std::abs(sxy / sxx));
    }
    return worst;
}

}  // namespace testing_support
