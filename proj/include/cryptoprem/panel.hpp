#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cryptoprem/csv.hpp"
#include "cryptoprem/date.hpp"
#include "cryptoprem/error.hpp"

namespace cryptoprem {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Unit { percent, level, ratio };

inline std::string to_string(Unit u) {
    switch (u) {
        case Unit::percent: return "percent";
        case Unit::level: return "level";
        case Unit::ratio: return "ratio";
    }
    return "percent";
}

inline Unit unit_from_string(std::string_view s) {
    if (s == "percent") return Unit::percent;
    if (s == "level") return Unit::level;
    if (s == "ratio") return Unit::ratio;
    throw DataError(fmt::format("unknown unit '{}'", s));
}

/// Weekly returns in percent for an unbalanced set of assets.
///
/// Unobserved return cells hold NaN and are flagged false in `observed()`.
/// Market caps use NaN for "not available" independently of the return mask;
/// portfolio formation checks caps where it reads them.
class ReturnPanel {
public:
    ReturnPanel(std::vector<Date> time_index, std::vector<std::string> asset_ids,
                MatrixXd returns, Mask observed, MatrixXd market_caps)
        : time_index_(std::move(time_index)),
          asset_ids_(std::move(asset_ids)),
          returns_(std::move(returns)),
          observed_(std::move(observed)),
          caps_(std::move(market_caps)) {
        const auto T = static_cast<Index>(time_index_.size());
        const auto N = static_cast<Index>(asset_ids_.size());
        if (returns_.rows() != T || returns_.cols() != N || observed_.rows() != T ||
            observed_.cols() != N || caps_.rows() != T || caps_.cols() != N) {
            throw DataError(fmt::format("panel shape mismatch: index {}x{}, returns {}x{}", T, N,
                                        returns_.rows(), returns_.cols()));
        }
        for (Index t = 1; t < T; ++t) {
            const auto gap = (time_index_[t] - time_index_[t - 1]).count();
            if (gap != 7) {
                throw DataError(fmt::format("time index not weekly between {} and {}",
                                            format_date(time_index_[t - 1]),
                                            format_date(time_index_[t])));
            }
        }
        for (Index i = 0; i < N; ++i) {
            Index count = 0;
            for (Index t = 0; t < T; ++t) {
                if (observed_(t, i)) {
                    if (!std::isfinite(returns_(t, i))) {
                        throw DataError(fmt::format("non-finite return for {} at {}",
                                                    asset_ids_[i], format_date(time_index_[t])));
                    }
                    ++count;
                } else {
                    returns_(t, i) = kNaN;
                }
                if (!std::isnan(caps_(t, i)) && !(std::isfinite(caps_(t, i)) && caps_(t, i) >= 0)) {
                    throw DataError(fmt::format("invalid market cap for {} at {}", asset_ids_[i],
                                                format_date(time_index_[t])));
                }
            }
            if (count < 2) {
                throw DataError(fmt::format("asset {} has {} observed weeks (need 2)",
                                            asset_ids_[i], count));
            }
        }
    }

    [[nodiscard]] const std::vector<Date>& time_index() const { return time_index_; }
    [[nodiscard]] const std::vector<std::string>& asset_ids() const { return asset_ids_; }
    [[nodiscard]] const MatrixXd& returns() const { return returns_; }
    [[nodiscard]] const Mask& observed() const { return observed_; }
    [[nodiscard]] const MatrixXd& market_caps() const { return caps_; }
    [[nodiscard]] Index periods() const { return returns_.rows(); }
    [[nodiscard]] Index assets() const { return returns_.cols(); }
    [[nodiscard]] Index observed_count() const { return observed_.count(); }

    [[nodiscard]] bool has_cap(Index t, Index i) const {
        return std::isfinite(caps_(t, i)) && caps_(t, i) > 0.0;
    }

private:
    std::vector<Date> time_index_;
    std::vector<std::string> asset_ids_;
    MatrixXd returns_;
    Mask observed_;
    MatrixXd caps_;
};

/// One named time series. Values are finite; weeks without data are absent
/// from `time_index` rather than stored as NaN.
struct SeriesFrame {
    std::vector<Date> time_index;
    std::string name;
    std::vector<double> values;
    Unit unit = Unit::percent;

    void validate() const {
        if (values.size() != time_index.size()) {
            throw DataError(fmt::format("series {}: {} values for {} dates", name, values.size(),
                                        time_index.size()));
        }
        for (std::size_t t = 0; t < values.size(); ++t) {
            if (!std::isfinite(values[t])) {
                throw DataError(fmt::format("series {}: non-finite value at {}", name,
                                            format_date(time_index[t])));
            }
            if (t > 0 && !(time_index[t - 1] < time_index[t])) {
                throw DataError(fmt::format("series {}: dates not increasing at {}", name,
                                            format_date(time_index[t])));
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return values.size(); }
};

enum class FactorKind { tradable, nontradable };

inline std::string to_string(FactorKind k) {
    return k == FactorKind::tradable ? "tradable" : "nontradable";
}

inline FactorKind factor_kind_from_string(std::string_view s) {
    if (s == "tradable") return FactorKind::tradable;
    if (s == "nontradable") return FactorKind::nontradable;
    throw DataError(fmt::format("unknown factor kind '{}'", s));
}

/// L observed factors on one shared weekly index, no missing values.
struct FactorSet {
    std::vector<Date> time_index;
    std::vector<std::string> names;
    std::vector<FactorKind> kinds;
    std::vector<Unit> units;
    MatrixXd values;  // T x L

    [[nodiscard]] Index periods() const { return values.rows(); }
    [[nodiscard]] Index factors() const { return values.cols(); }

    void validate() const {
        const auto T = static_cast<Index>(time_index.size());
        const auto L = static_cast<Index>(names.size());
        if (values.rows() != T || values.cols() != L || kinds.size() != names.size() ||
            units.size() != names.size()) {
            throw DataError("factor set shape mismatch");
        }
        if (!values.allFinite()) throw DataError("factor set contains non-finite values");
        std::set<std::string> seen;
        for (const auto& n : names) {
            if (!seen.insert(n).second) throw DataError("duplicate factor name " + n);
        }
    }

    [[nodiscard]] Index index_of(std::string_view name) const {
        for (std::size_t j = 0; j < names.size(); ++j) {
            if (names[j] == name) return static_cast<Index>(j);
        }
        throw DataError(fmt::format("no factor named {}", name));
    }

    [[nodiscard]] SeriesFrame column(Index j) const {
        SeriesFrame s{time_index, names[j], {}, units[j]};
        s.values.assign(values.col(j).data(), values.col(j).data() + values.rows());
        return s;
    }
};

/// Summary statistics behind the descriptive tables.
struct StatsRow {
    double mean = 0;
    double std = 0;
    double min = 0;
    double q25 = 0;
    double median = 0;
    double q75 = 0;
    double max = 0;
    double skewness = 0;
    double kurtosis_fisher = 0;
};

// ---------------------------------------------------------------------------
// Statistics

/// Linear interpolation between order statistics (the "type 7" rule).
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DataError("quantile of empty sample");
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

/// Describes a sample. Skewness and kurtosis are the moment (biased)
/// estimators; kurtosis is excess over the normal. Needs at least 4 values
/// and throws NumericalError for a constant sample.
inline StatsRow describe(std::span<const double> x) {
    const auto n = x.size();
    if (n < 4) throw DataError(fmt::format("describe needs at least 4 values, got {}", n));
    for (double v : x) {
        if (!std::isfinite(v)) throw DataError("describe: non-finite value");
    }
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());

    StatsRow row;
    const double nd = static_cast<double>(n);
    row.mean = std::accumulate(x.begin(), x.end(), 0.0) / nd;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        const double d = v - row.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    row.std = std::sqrt(m2 / (nd - 1.0));
    row.min = sorted.front();
    row.max = sorted.back();
    row.q25 = quantile_sorted(sorted, 0.25);
    row.median = quantile_sorted(sorted, 0.5);
    row.q75 = quantile_sorted(sorted, 0.75);

    m2 /= nd;
    m3 /= nd;
    m4 /= nd;
    const double scale = std::max(std::abs(row.mean), row.max - row.min);
    if (m2 <= 0.0 || std::sqrt(m2) <= 1e-14 * std::max(scale, 1e-300)) {
        throw NumericalError("degenerate series: zero variance");
    }
    row.skewness = m3 / std::pow(m2, 1.5);
    row.kurtosis_fisher = m4 / (m2 * m2) - 3.0;
    return row;
}

inline StatsRow describe(const SeriesFrame& series) {
    series.validate();
    try {
        return describe(std::span<const double>(series.values));
    } catch (const NumericalError& e) {
        throw NumericalError(fmt::format("series {}: {}", series.name, e.what()));
    }
}

inline double sample_mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// ---------------------------------------------------------------------------
// Panel construction and transforms

/// A panel from in-memory matrices. `mask` and `caps` default to fully
/// observed / unit caps; asset ids are A0, A1, ...
inline ReturnPanel make_panel(const MatrixXd& returns, Mask mask = {}, MatrixXd caps = {},
                              Date start = parse_date("2023-01-01")) {
    const Index T = returns.rows();
    const Index N = returns.cols();
    if (mask.size() == 0) mask = Mask::Constant(T, N, true);
    if (caps.size() == 0) caps = MatrixXd::Ones(T, N);
    std::vector<Date> index(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) index[t] = add_weeks(start, t);
    std::vector<std::string> ids(static_cast<std::size_t>(N));
    for (Index i = 0; i < N; ++i) ids[i] = fmt::format("A{}", i);
    return ReturnPanel(std::move(index), std::move(ids), returns, std::move(mask),
                       std::move(caps));
}

/// Keeps the assets with at least `min_obs` observed weeks; reports the rest.
inline ReturnPanel drop_sparse_assets(std::vector<Date> time_index,
                                      std::vector<std::string> asset_ids, const MatrixXd& returns,
                                      const Mask& observed, const MatrixXd& caps,
                                      std::vector<std::string>* dropped = nullptr,
                                      Index min_obs = 2) {
    std::vector<Index> keep;
    for (Index i = 0; i < returns.cols(); ++i) {
        if (observed.col(i).count() >= min_obs) {
            keep.push_back(i);
        } else if (dropped) {
            dropped->push_back(asset_ids[i]);
        }
    }
    const auto T = returns.rows();
    const auto K = static_cast<Index>(keep.size());
    MatrixXd r(T, K), c(T, K);
    Mask m(T, K);
    std::vector<std::string> ids;
    ids.reserve(keep.size());
    for (Index j = 0; j < K; ++j) {
        r.col(j) = returns.col(keep[j]);
        c.col(j) = caps.col(keep[j]);
        m.col(j) = observed.col(keep[j]);
        ids.push_back(asset_ids[keep[j]]);
    }
    return ReturnPanel(std::move(time_index), std::move(ids), std::move(r), std::move(m),
                       std::move(c));
}

/// Restricts a panel to the given weeks (each must be present), then drops
/// assets left with fewer than two observations.
inline ReturnPanel restrict_to(const ReturnPanel& panel, const std::vector<Date>& weeks,
                               std::vector<std::string>* dropped = nullptr) {
    const auto& idx = panel.time_index();
    std::vector<Index> rows;
    rows.reserve(weeks.size());
    for (const auto& w : weeks) {
        auto it = std::lower_bound(idx.begin(), idx.end(), w);
        if (it == idx.end() || *it != w) {
            throw DataError("panel has no week " + format_date(w));
        }
        rows.push_back(static_cast<Index>(it - idx.begin()));
    }
    const auto T = static_cast<Index>(rows.size());
    MatrixXd r(T, panel.assets()), c(T, panel.assets());
    Mask m(T, panel.assets());
    for (Index t = 0; t < T; ++t) {
        r.row(t) = panel.returns().row(rows[t]);
        c.row(t) = panel.market_caps().row(rows[t]);
        m.row(t) = panel.observed().row(rows[t]);
    }
    return drop_sparse_assets(weeks, panel.asset_ids(), r, m, c, dropped);
}

/// Subtracts the weekly risk-free rate from every observed return.
inline ReturnPanel to_excess(const ReturnPanel& panel, const SeriesFrame& rf) {
    rf.validate();
    std::map<Date, double> lookup;
    for (std::size_t t = 0; t < rf.size(); ++t) lookup.emplace(rf.time_index[t], rf.values[t]);
    MatrixXd r = panel.returns();
    for (Index t = 0; t < panel.periods(); ++t) {
        auto it = lookup.find(panel.time_index()[t]);
        if (it == lookup.end()) {
            throw DataError(fmt::format("risk-free series {} missing {}", rf.name,
                                        format_date(panel.time_index()[t])));
        }
        for (Index i = 0; i < panel.assets(); ++i) {
            if (panel.observed()(t, i)) r(t, i) -= it->second;
        }
    }
    return ReturnPanel(panel.time_index(), panel.asset_ids(), std::move(r), panel.observed(),
                       panel.market_caps());
}

/// Reindexes each frame onto the panel's weeks. Extra weeks are dropped; a
/// missing week is an error naming the series and the week.
inline FactorSet align(const std::vector<SeriesFrame>& frames, const std::vector<Date>& weeks,
                       std::vector<FactorKind> kinds = {}) {
    if (kinds.empty()) kinds.assign(frames.size(), FactorKind::tradable);
    if (kinds.size() != frames.size()) throw DataError("align: kinds/frames size mismatch");
    FactorSet out;
    out.time_index = weeks;
    out.kinds = std::move(kinds);
    out.values.resize(static_cast<Index>(weeks.size()), static_cast<Index>(frames.size()));
    for (std::size_t j = 0; j < frames.size(); ++j) {
        const auto& f = frames[j];
        f.validate();
        out.names.push_back(f.name);
        out.units.push_back(f.unit);
        std::size_t pos = 0;
        for (std::size_t t = 0; t < weeks.size(); ++t) {
            while (pos < f.size() && f.time_index[pos] < weeks[t]) ++pos;
            if (pos == f.size() || f.time_index[pos] != weeks[t]) {
                throw DataError(
                    fmt::format("series {} missing {}", f.name, format_date(weeks[t])));
            }
            out.values(static_cast<Index>(t), static_cast<Index>(j)) = f.values[pos];
        }
    }
    out.validate();
    return out;
}

inline FactorSet align(const std::vector<SeriesFrame>& frames, const ReturnPanel& panel,
                       std::vector<FactorKind> kinds = {}) {
    return align(frames, panel.time_index(), std::move(kinds));
}

/// Weeks present in every frame, in order.
inline std::vector<Date> common_weeks(const std::vector<SeriesFrame>& frames) {
    if (frames.empty()) return {};
    std::vector<Date> common = frames.front().time_index;
    for (std::size_t j = 1; j < frames.size(); ++j) {
        std::vector<Date> next;
        std::set_intersection(common.begin(), common.end(), frames[j].time_index.begin(),
                              frames[j].time_index.end(), std::back_inserter(next));
        common = std::move(next);
    }
    return common;
}

// ---------------------------------------------------------------------------
// CSV input and output

/// A `date,<column>...` CSV as a matrix; NaN marks blank cells.
struct WideTable {
    std::vector<Date> dates;
    std::vector<std::string> columns;
    MatrixXd values;  // NaN = blank
};

inline WideTable read_wide(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    if (table.header.empty() || table.header[0] != "date") {
        throw DataError(path.string() + ": first column must be 'date'");
    }
    WideTable wf;
    wf.columns.assign(table.header.begin() + 1, table.header.end());
    std::set<std::string> seen;
    for (const auto& c : wf.columns) {
        if (!seen.insert(c).second) {
            throw DataError(fmt::format("{}: duplicate column {}", path.string(), c));
        }
    }
    std::vector<std::pair<Date, std::size_t>> order;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        order.emplace_back(parse_date(table.rows[r][0]), r);
    }
    std::sort(order.begin(), order.end());
    for (std::size_t k = 1; k < order.size(); ++k) {
        if (order[k].first == order[k - 1].first) {
            throw DataError(fmt::format("{}: duplicate time key {}", path.string(),
                                        format_date(order[k].first)));
        }
    }
    const auto T = static_cast<Index>(order.size());
    const auto N = static_cast<Index>(wf.columns.size());
    wf.values = MatrixXd::Constant(T, N, kNaN);
    for (Index t = 0; t < T; ++t) {
        const auto& row = table.rows[order[t].second];
        wf.dates.push_back(order[t].first);
        for (Index i = 0; i < N; ++i) {
            double v = 0;
            const auto where = fmt::format("{} row {} column {}", path.string(), row[0],
                                           wf.columns[i]);
            if (csv::parse_number(row[i + 1], v, where)) wf.values(t, i) = v;
        }
    }
    return wf;
}

namespace detail {

inline std::string format_wide(const std::vector<Date>& dates,
                               const std::vector<std::string>& columns, const MatrixXd& values) {
    std::string out = "date";
    for (const auto& c : columns) out += "," + c;
    out += '\n';
    for (Index t = 0; t < values.rows(); ++t) {
        out += format_date(dates[t]);
        for (Index i = 0; i < values.cols(); ++i) {
            out += ',';
            if (!std::isnan(values(t, i))) out += csv::number(values(t, i));
        }
        out += '\n';
    }
    return out;
}

}  // namespace detail

inline void write_wide(const std::vector<Date>& dates, const std::vector<std::string>& columns,
                       const MatrixXd& values, const std::filesystem::path& path) {
    csv::write_text(path, detail::format_wide(dates, columns, values));
}

/// Loads a returns CSV and a market-cap CSV of the same shape. Rows are sorted
/// by date; assets with fewer than two observed returns are dropped with a
/// warning and listed in `dropped` when provided.
inline ReturnPanel load_panel(const std::filesystem::path& returns_csv,
                              const std::filesystem::path& caps_csv,
                              std::vector<std::string>* dropped = nullptr) {
    auto ret = read_wide(returns_csv);
    auto caps = read_wide(caps_csv);
    if (std::set(ret.columns.begin(), ret.columns.end()) !=
        std::set(caps.columns.begin(), caps.columns.end())) {
        throw DataError("returns and market-cap files list different assets");
    }
    if (ret.dates != caps.dates) throw DataError("returns and market-cap files cover different weeks");
    MatrixXd cap_aligned(caps.values.rows(), caps.values.cols());
    for (std::size_t i = 0; i < ret.columns.size(); ++i) {
        const auto pos = std::find(caps.columns.begin(), caps.columns.end(), ret.columns[i]) -
                         caps.columns.begin();
        cap_aligned.col(static_cast<Index>(i)) = caps.values.col(pos);
    }
    Mask mask = ret.values.array().isFinite();
    std::vector<std::string> local_dropped;
    auto panel = drop_sparse_assets(ret.dates, ret.columns, ret.values, mask, cap_aligned,
                                    &local_dropped);
    for (const auto& id : local_dropped) {
        spdlog::warn("dropping asset {}: fewer than 2 observed weeks", id);
    }
    if (dropped) dropped->insert(dropped->end(), local_dropped.begin(), local_dropped.end());
    return panel;
}

inline void write_panel(const ReturnPanel& panel, const std::filesystem::path& returns_csv,
                        const std::filesystem::path& caps_csv) {
    csv::write_text(returns_csv,
                    detail::format_wide(panel.time_index(), panel.asset_ids(), panel.returns()));
    csv::write_text(caps_csv, detail::format_wide(panel.time_index(), panel.asset_ids(),
                                                  panel.market_caps()));
}

/// Reads a `date, <name>...` CSV into one frame per column. Blank cells leave
/// that week out of the column's frame.
inline std::vector<SeriesFrame> load_frames(const std::filesystem::path& path,
                                            Unit unit = Unit::percent) {
    auto wf = read_wide(path);
    std::vector<SeriesFrame> frames;
    for (std::size_t j = 0; j < wf.columns.size(); ++j) {
        SeriesFrame f{{}, wf.columns[j], {}, unit};
        for (Index t = 0; t < wf.values.rows(); ++t) {
            const double v = wf.values(t, static_cast<Index>(j));
            if (!std::isnan(v)) {
                f.time_index.push_back(wf.dates[t]);
                f.values.push_back(v);
            }
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

inline SeriesFrame load_series(const std::filesystem::path& path, std::string_view column,
                               Unit unit = Unit::percent) {
    for (auto& f : load_frames(path, unit)) {
        if (f.name == column) return f;
    }
    throw DataError(fmt::format("{}: no column {}", path.string(), column));
}

/// Writes frames side by side on the union of their weeks (blank where absent).
inline void write_frames(const std::vector<SeriesFrame>& frames,
                         const std::filesystem::path& path) {
    std::set<Date> all;
    for (const auto& f : frames) all.insert(f.time_index.begin(), f.time_index.end());
    std::vector<Date> dates(all.begin(), all.end());
    MatrixXd values = MatrixXd::Constant(static_cast<Index>(dates.size()),
                                         static_cast<Index>(frames.size()), kNaN);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < frames.size(); ++j) {
        names.push_back(frames[j].name);
        for (std::size_t t = 0; t < frames[j].size(); ++t) {
            const auto pos = std::lower_bound(dates.begin(), dates.end(), frames[j].time_index[t]) -
                             dates.begin();
            values(pos, static_cast<Index>(j)) = frames[j].values[t];
        }
    }
    csv::write_text(path, detail::format_wide(dates, names, values));
}

}  // namespace cryptoprem
