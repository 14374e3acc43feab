#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cryptoprem/csv.hpp"
#include "cryptoprem/error.hpp"
#include "cryptoprem/panel.hpp"

namespace cryptoprem {

enum class Leg { top25, bottom25 };
enum class Weighting { value, equal };

/// How a long-short quartile portfolio is formed.
///
/// Week t is sorted on signal row `t - signal_lag`. Signals observed at the
/// end of week t-1 (size, TVL/market cap) use lag 1; a signal matrix whose
/// row t already summarizes weeks before t (momentum) uses lag 0.
struct SortSpec {
    std::string signal_name;
    int lookback = 1;  // weeks summarized by the signal
    Leg long_leg = Leg::top25;
    Weighting weighting = Weighting::value;
    bool subtract_rf = false;
    int signal_lag = 1;

    void validate() const {
        if (lookback < 1) throw ConfigError(signal_name + ": lookback must be >= 1");
        if (signal_lag < 0) throw ConfigError(signal_name + ": signal_lag must be >= 0");
    }
};

struct PortfolioLeg {
    std::vector<Index> assets;
    std::vector<double> weights;  // nonnegative, sum to 1

    [[nodiscard]] double return_at(const ReturnPanel& panel, Index t) const {
        double r = 0;
        for (std::size_t j = 0; j < assets.size(); ++j) r += weights[j] * panel.returns()(t, assets[j]);
        return r;
    }
};

struct QuartileLegs {
    PortfolioLeg long_leg;
    PortfolioLeg short_leg;
};

namespace detail {

inline PortfolioLeg make_leg(const ReturnPanel& panel, std::vector<Index> assets, Index t,
                             Weighting w) {
    PortfolioLeg leg;
    leg.assets = std::move(assets);
    if (w == Weighting::equal) {
        leg.weights.assign(leg.assets.size(), 1.0 / static_cast<double>(leg.assets.size()));
        return leg;
    }
    double total = 0;
    for (Index i : leg.assets) total += panel.market_caps()(t - 1, i);
    for (Index i : leg.assets) leg.weights.push_back(panel.market_caps()(t - 1, i) / total);
    return leg;
}

inline Index first_sort_week(const SortSpec& spec) {
    return std::max<Index>(spec.signal_lag, spec.weighting == Weighting::value ? 1 : 0);
}

}  // namespace detail

/// Value weights over assets observed at t with a positive cap at t-1.
inline PortfolioLeg market_weights(const ReturnPanel& panel, Index t) {
    if (t < 1) throw DataError("market weights need a lagged week");
    std::vector<Index> members;
    for (Index i = 0; i < panel.assets(); ++i) {
        if (panel.observed()(t, i) && panel.has_cap(t - 1, i)) members.push_back(i);
    }
    if (members.empty()) {
        throw DataError("no asset with a lagged market cap in week " +
                        format_date(panel.time_index()[t]));
    }
    return detail::make_leg(panel, std::move(members), t, Weighting::value);
}

/// Quartile legs for week t. Eligible assets have the signal, the week-t
/// return and (for value weighting) a positive cap at t-1. Each leg holds
/// floor(n/4) assets; ties in the signal are broken by asset id.
inline QuartileLegs quartile_legs(const ReturnPanel& panel, const MatrixXd& signal,
                                  const SortSpec& spec, Index t) {
    const Index row = t - spec.signal_lag;
    if (row < 0 || (spec.weighting == Weighting::value && t < 1)) {
        throw DataError(fmt::format("{}: week {} has no formation period", spec.signal_name, t));
    }
    std::vector<Index> eligible;
    for (Index i = 0; i < panel.assets(); ++i) {
        if (!std::isfinite(signal(row, i)) || !panel.observed()(t, i)) continue;
        if (spec.weighting == Weighting::value && !panel.has_cap(t - 1, i)) continue;
        eligible.push_back(i);
    }
    if (eligible.size() < 4) {
        throw DataError(fmt::format("{}: only {} eligible assets in week {}", spec.signal_name,
                                    eligible.size(), format_date(panel.time_index()[t])));
    }
    const auto& ids = panel.asset_ids();
    std::sort(eligible.begin(), eligible.end(), [&](Index a, Index b) {
        if (signal(row, a) != signal(row, b)) return signal(row, a) < signal(row, b);
        return ids[a] < ids[b];
    });
    const std::size_t q = eligible.size() / 4;
    std::vector<Index> bottom(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(q));
    std::vector<Index> top(eligible.end() - static_cast<std::ptrdiff_t>(q), eligible.end());
    QuartileLegs legs;
    const bool long_top = spec.long_leg == Leg::top25;
    legs.long_leg = detail::make_leg(panel, long_top ? top : bottom, t, spec.weighting);
    legs.short_leg = detail::make_leg(panel, long_top ? bottom : top, t, spec.weighting);
    return legs;
}

namespace detail {

inline double rf_at(const SeriesFrame* rf, Date week) {
    if (!rf) throw ConfigError("risk-free series required");
    auto it = std::lower_bound(rf->time_index.begin(), rf->time_index.end(), week);
    if (it == rf->time_index.end() || *it != week) {
        throw DataError(fmt::format("risk-free series missing {}", format_date(week)));
    }
    return rf->values[static_cast<std::size_t>(it - rf->time_index.begin())];
}

}  // namespace detail

/// Value-weighted market excess return: weights are caps at t-1 over assets
/// observed at t. The series starts at the panel's second week.
inline SeriesFrame market_factor(const ReturnPanel& panel, const SeriesFrame& rf,
                                 std::string name = "R_C") {
    SeriesFrame out{{}, std::move(name), {}, Unit::percent};
    for (Index t = 1; t < panel.periods(); ++t) {
        const auto w = market_weights(panel, t);
        const Date week = panel.time_index()[t];
        out.time_index.push_back(week);
        out.values.push_back(w.return_at(panel, t) - detail::rf_at(&rf, week));
    }
    return out;
}

/// Long-short quartile factor: long leg minus short leg, less rf when
/// `spec.subtract_rf`. Leading weeks whose signal row is entirely undefined
/// are skipped; from the first formable week on, every week must form.
inline SeriesFrame long_short(const ReturnPanel& panel, const MatrixXd& signal,
                              const SortSpec& spec, const SeriesFrame* rf = nullptr) {
    spec.validate();
    if (signal.rows() != panel.periods() || signal.cols() != panel.assets()) {
        throw DataError(spec.signal_name + ": signal shape does not match the panel");
    }
    if (spec.subtract_rf && !rf) throw ConfigError(spec.signal_name + ": subtract_rf needs rf");
    SeriesFrame out{{}, spec.signal_name, {}, Unit::percent};
    bool started = false;
    for (Index t = detail::first_sort_week(spec); t < panel.periods(); ++t) {
        if (!started) {
            if (!signal.row(t - spec.signal_lag).array().isFinite().any()) continue;
            started = true;
        }
        const auto legs = quartile_legs(panel, signal, spec, t);
        double value = legs.long_leg.return_at(panel, t) - legs.short_leg.return_at(panel, t);
        const Date week = panel.time_index()[t];
        if (spec.subtract_rf) value -= detail::rf_at(rf, week);
        out.time_index.push_back(week);
        out.values.push_back(value);
    }
    if (out.values.empty()) throw DataError(spec.signal_name + ": signal never defined");
    return out;
}

/// Row t holds the compounded return (percent) over weeks t-window..t-1, or
/// NaN unless all of those weeks are observed.
inline MatrixXd momentum_signal(const ReturnPanel& panel, int window = 5) {
    if (window < 1) throw ConfigError("momentum window must be >= 1");
    MatrixXd s = MatrixXd::Constant(panel.periods(), panel.assets(), kNaN);
    for (Index i = 0; i < panel.assets(); ++i) {
        for (Index t = window; t < panel.periods(); ++t) {
            double growth = 1.0;
            bool complete = true;
            for (Index u = t - window; u < t; ++u) {
                if (!panel.observed()(u, i)) {
                    complete = false;
                    break;
                }
                growth *= 1.0 + panel.returns()(u, i) / 100.0;
            }
            if (complete) s(t, i) = (growth - 1.0) * 100.0;
        }
    }
    return s;
}

/// Ratio signal a/b cellwise, NaN where either side is missing or b <= 0.
inline MatrixXd ratio_signal(const MatrixXd& numerator, const MatrixXd& denominator) {
    MatrixXd s = MatrixXd::Constant(numerator.rows(), numerator.cols(), kNaN);
    for (Index t = 0; t < s.rows(); ++t) {
        for (Index i = 0; i < s.cols(); ++i) {
            const double d = denominator(t, i);
            if (std::isfinite(numerator(t, i)) && std::isfinite(d) && d > 0) {
                s(t, i) = numerator(t, i) / d;
            }
        }
    }
    return s;
}

namespace detail {

inline void require_same_index(const SeriesFrame& a, const SeriesFrame& b) {
    if (a.time_index != b.time_index) {
        throw DataError(fmt::format("series {} and {} are not aligned", a.name, b.name));
    }
}

inline double variance_about_mean(std::span<const double> x) {
    const double m = sample_mean(x);
    double ss = 0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size());
}

}  // namespace detail

/// Removes the component of `series` explained by `onto` (OLS with an
/// intercept) while keeping the series mean: mean(series) + residuals.
inline SeriesFrame orthogonalize(const SeriesFrame& series, const SeriesFrame& onto) {
    series.validate();
    onto.validate();
    detail::require_same_index(series, onto);
    if (series.size() < 3) throw DataError(series.name + ": orthogonalize needs T >= 3");
    const double mx = sample_mean(onto.values);
    const double my = sample_mean(series.values);
    double sxx = 0, sxy = 0;
    for (std::size_t t = 0; t < series.size(); ++t) {
        const double dx = onto.values[t] - mx;
        sxx += dx * dx;
        sxy += dx * (series.values[t] - my);
    }
    if (!(sxx > 1e-300) ||
        detail::variance_about_mean(onto.values) <= 1e-28 * std::max(mx * mx, 1e-300)) {
        throw NumericalError(fmt::format("orthogonalize: {} has zero variance", onto.name));
    }
    const double slope = sxy / sxx;
    SeriesFrame out = series;
    for (std::size_t t = 0; t < out.size(); ++t) out.values[t] -= slope * (onto.values[t] - mx);
    return out;
}

/// Residuals of the OLS fit x_t = a + rho x_{t-1} + e_t over t = 2..T; the
/// output starts at the second week.
inline SeriesFrame ar1_residual(const SeriesFrame& series) {
    series.validate();
    const auto T = series.size();
    if (T < 4) throw DataError(series.name + ": AR(1) residual needs T >= 4");
    const std::span<const double> x(series.values);
    const auto lag = x.first(T - 1);
    const auto cur = x.subspan(1);
    const double ml = sample_mean(lag);
    const double mc = sample_mean(cur);
    double sll = 0, slc = 0;
    for (std::size_t t = 0; t + 1 < T; ++t) {
        sll += (lag[t] - ml) * (lag[t] - ml);
        slc += (lag[t] - ml) * (cur[t] - mc);
    }
    const double scale = std::max(std::abs(ml), 1e-300);
    if (!(sll > 0) || std::sqrt(sll / static_cast<double>(T - 1)) <= 1e-14 * scale) {
        throw NumericalError(fmt::format("AR(1) residual: {} has zero variance", series.name));
    }
    const double rho = slc / sll;
    const double a = mc - rho * ml;
    SeriesFrame out{{series.time_index.begin() + 1, series.time_index.end()}, series.name, {},
                    series.unit};
    for (std::size_t t = 0; t + 1 < T; ++t) out.values.push_back(cur[t] - a - rho * lag[t]);
    return out;
}

/// Week-over-week percent change; the output starts at the second week.
inline SeriesFrame percent_change(const SeriesFrame& series) {
    series.validate();
    SeriesFrame out{{}, series.name, {}, Unit::percent};
    for (std::size_t t = 1; t < series.size(); ++t) {
        const double prev = series.values[t - 1];
        if (prev == 0.0) {
            throw DataError(fmt::format("{}: zero level at {} in a percent-change denominator",
                                        series.name, format_date(series.time_index[t - 1])));
        }
        out.time_index.push_back(series.time_index[t]);
        out.values.push_back((series.values[t] / prev - 1.0) * 100.0);
    }
    return out;
}

/// Non-tradable state variables before residualization: hacks as a share of
/// total market cap, percent changes of the two indices, CVX in levels.
inline std::vector<SeriesFrame> nontradable_levels(const SeriesFrame& hacks_usd,
                                                   const SeriesFrame& total_mcap,
                                                   const SeriesFrame& altseason,
                                                   const SeriesFrame& fear_greed,
                                                   const SeriesFrame& cvx) {
    for (const auto* s : {&total_mcap, &altseason, &fear_greed, &cvx}) {
        detail::require_same_index(hacks_usd, *s);
    }
    SeriesFrame hacks{hacks_usd.time_index, "Hacks", {}, Unit::ratio};
    for (std::size_t t = 0; t < hacks_usd.size(); ++t) {
        if (!(total_mcap.values[t] > 0)) {
            throw DataError("hacks: division by zero total market cap at " +
                            format_date(hacks_usd.time_index[t]));
        }
        hacks.values.push_back(hacks_usd.values[t] / total_mcap.values[t]);
    }
    auto alt = percent_change(altseason);
    alt.name = "Altseason";
    auto fg = percent_change(fear_greed);
    fg.name = "FearGreed";
    SeriesFrame vol = cvx;
    vol.name = "CVX";
    vol.unit = Unit::level;
    return {hacks, alt, fg, vol};
}

/// AR(1) innovations of the non-tradable state variables, on their common weeks.
inline FactorSet nontradable_shocks(const SeriesFrame& hacks_usd, const SeriesFrame& total_mcap,
                                    const SeriesFrame& altseason, const SeriesFrame& fear_greed,
                                    const SeriesFrame& cvx) {
    std::vector<SeriesFrame> shocks;
    for (const auto& s : nontradable_levels(hacks_usd, total_mcap, altseason, fear_greed, cvx)) {
        shocks.push_back(ar1_residual(s));
    }
    return align(shocks, common_weeks(shocks),
                 std::vector<FactorKind>(shocks.size(), FactorKind::nontradable));
}

/// Concatenates factor sets column-wise on their common weeks.
inline FactorSet combine(const std::vector<FactorSet>& sets) {
    std::vector<SeriesFrame> frames;
    std::vector<FactorKind> kinds;
    for (const auto& s : sets) {
        for (Index j = 0; j < s.factors(); ++j) {
            frames.push_back(s.column(j));
            kinds.push_back(s.kinds[static_cast<std::size_t>(j)]);
        }
    }
    return align(frames, common_weeks(frames), std::move(kinds));
}

/// Factor file: a `date,<names>` header, a `#meta` row of `kind:unit` per
/// column, then one row per week.
inline void write_factors(const FactorSet& G, const std::filesystem::path& path) {
    G.validate();
    std::string out = "date";
    for (const auto& n : G.names) out += "," + n;
    out += "\n#meta";
    for (std::size_t j = 0; j < G.names.size(); ++j) {
        out += "," + to_string(G.kinds[j]) + ":" + to_string(G.units[j]);
    }
    out += '\n';
    for (Index t = 0; t < G.periods(); ++t) {
        out += format_date(G.time_index[static_cast<std::size_t>(t)]);
        for (Index j = 0; j < G.factors(); ++j) out += "," + csv::number(G.values(t, j));
        out += '\n';
    }
    csv::write_text(path, out);
}

inline FactorSet read_factors(const std::filesystem::path& path) {
    auto table = csv::read(path);
    if (table.header.empty() || table.header[0] != "date" || table.rows.empty() ||
        table.rows[0][0] != "#meta") {
        throw DataError(path.string() + ": not a factor file (missing date header or #meta row)");
    }
    FactorSet G;
    G.names.assign(table.header.begin() + 1, table.header.end());
    for (std::size_t j = 1; j < table.header.size(); ++j) {
        const auto& meta = table.rows[0][j];
        const auto colon = meta.find(':');
        if (colon == std::string::npos) throw DataError(path.string() + ": bad #meta cell " + meta);
        G.kinds.push_back(factor_kind_from_string(meta.substr(0, colon)));
        G.units.push_back(unit_from_string(meta.substr(colon + 1)));
    }
    const auto T = static_cast<Index>(table.rows.size() - 1);
    G.values.resize(T, static_cast<Index>(G.names.size()));
    for (Index t = 0; t < T; ++t) {
        const auto& row = table.rows[static_cast<std::size_t>(t) + 1];
        G.time_index.push_back(parse_date(row[0]));
        for (Index j = 0; j < G.values.cols(); ++j) {
            double v = 0;
            const auto where = fmt::format("{} {} {}", path.string(), row[0], G.names[j]);
            if (!csv::parse_number(row[static_cast<std::size_t>(j) + 1], v, where)) {
                throw DataError("missing factor value at " + where);
            }
            G.values(t, j) = v;
        }
    }
    G.validate();
    return G;
}

}  // namespace cryptoprem
