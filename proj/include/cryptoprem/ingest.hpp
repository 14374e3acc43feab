#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cryptoprem/csv.hpp"
#include "cryptoprem/date.hpp"
#include "cryptoprem/error.hpp"
#include "cryptoprem/panel.hpp"

namespace cryptoprem::ingest {

enum class SourceKind {
    prices,
    market_caps,
    tvl,
    hacks_usd,
    altseason_index,
    fear_greed_index,
    cvx_level,
    equity_factors,
    equity_industries
};

inline const std::vector<std::pair<SourceKind, std::string>>& source_kind_names() {
    static const std::vector<std::pair<SourceKind, std::string>> names = {
        {SourceKind::prices, "prices"},
        {SourceKind::market_caps, "market_caps"},
        {SourceKind::tvl, "tvl"},
        {SourceKind::hacks_usd, "hacks_usd"},
        {SourceKind::altseason_index, "altseason_index"},
        {SourceKind::fear_greed_index, "fear_greed_index"},
        {SourceKind::cvx_level, "cvx_level"},
        {SourceKind::equity_factors, "equity_factors"},
        {SourceKind::equity_industries, "equity_industries"},
    };
    return names;
}

inline std::string to_string(SourceKind k) {
    for (const auto& [kind, name] : source_kind_names()) {
        if (kind == k) return name;
    }
    return "unknown";
}

inline SourceKind source_kind_from_string(std::string_view s) {
    for (const auto& [kind, name] : source_kind_names()) {
        if (name == s) return kind;
    }
    throw ConfigError(fmt::format("unknown source kind '{}'", s));
}

enum class RawUnit { usd, index_level, percent };

inline std::string to_string(RawUnit u) {
    switch (u) {
        case RawUnit::usd: return "usd";
        case RawUnit::index_level: return "index_level";
        case RawUnit::percent: return "percent";
    }
    return "usd";
}

inline RawUnit raw_unit_from_string(std::string_view s) {
    if (s == "usd") return RawUnit::usd;
    if (s == "index_level") return RawUnit::index_level;
    if (s == "percent") return RawUnit::percent;
    throw DataError(fmt::format("unknown unit '{}'", s));
}

struct RawObservation {
    Date date;
    std::string entity;
    double value = 0;
    RawUnit unit = RawUnit::usd;

    friend bool operator==(const RawObservation&, const RawObservation&) = default;
};

struct SourceSpec {
    SourceKind kind = SourceKind::prices;
    std::string locator;    // URL or file path
    std::string cache_key;  // file stem inside cache/<kind>/
};

/// FNV-1a, used for cache keys and manifest fingerprints.
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Deterministic cache key for (kind, locator, date range).
inline std::string make_cache_key(SourceKind kind, std::string_view locator, Date start, Date end) {
    const auto fingerprint = fmt::format("{}|{}|{}|{}", to_string(kind), locator,
                                         format_date(start), format_date(end));
    return fmt::format("{}_{:016x}", to_string(kind), fnv1a64(fingerprint));
}

/// Fetches the raw payload behind a locator.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string get(const std::string& locator) = 0;
};

/// Reads locators as paths, relative ones against `root`.
class FileTransport : public Transport {
public:
    explicit FileTransport(std::filesystem::path root = {}) : root_(std::move(root)) {}

    std::string get(const std::string& locator) override {
        std::filesystem::path p(locator);
        if (p.is_relative() && !root_.empty()) p = root_ / p;
        if (!std::filesystem::exists(p)) throw DataError("source unreachable: " + p.string());
        return csv::read_text(p);
    }

private:
    std::filesystem::path root_;
};

/// Parses a `date,entity,value,unit` payload. A missing column is schema
/// drift; a bad value names its row.
inline std::vector<RawObservation> parse_observations(std::string_view payload,
                                                      std::string_view source) {
    if (payload.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw DataError(fmt::format("{}: empty payload", source));
    }
    const auto table = csv::parse(payload, std::string(source));
    const auto cd = table.column("date");
    const auto ce = table.column("entity");
    const auto cv = table.column("value");
    const auto cu = table.column("unit");
    if (cd < 0 || ce < 0 || cv < 0 || cu < 0) {
        throw DataError(fmt::format("{}: schema drift, expected columns date,entity,value,unit",
                                    source));
    }
    if (table.rows.empty()) throw DataError(fmt::format("{}: empty payload", source));
    std::vector<RawObservation> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto where = fmt::format("{} row {}", source, r + 2);
        RawObservation obs;
        try {
            obs.date = parse_date(row[cd]);
            obs.unit = raw_unit_from_string(row[cu]);
        } catch (const DataError& e) {
            throw DataError(fmt::format("schema drift at {}: {}", where, e.what()));
        }
        obs.entity = row[ce];
        if (obs.entity.empty()) throw DataError(fmt::format("schema drift at {}: empty entity", where));
        try {
            if (!csv::parse_number(row[cv], obs.value, where)) {
                throw DataError(fmt::format("schema drift at {}: missing value", where));
            }
        } catch (const DataError& e) {
            throw DataError(fmt::format("schema drift: {}", e.what()));
        }
        out.push_back(std::move(obs));
    }
    return out;
}

inline std::string format_observations(const std::vector<RawObservation>& obs) {
    std::string out = "date,entity,value,unit\n";
    for (const auto& o : obs) {
        out += fmt::format("{},{},{},{}\n", format_date(o.date), o.entity, csv::number(o.value),
                           to_string(o.unit));
    }
    return out;
}

/// Fetch-through cache rooted at `cache/<source_kind>/<cache_key>.csv`.
///
/// A warm cache entry is returned without touching the transport. In offline
/// mode a cold entry is an error naming the source. Writes are serialized per
/// cache key, so distinct sources may be fetched from several threads.
class SourceCache {
public:
    SourceCache(std::filesystem::path root, std::shared_ptr<Transport> transport, bool offline)
        : root_(std::move(root)), transport_(std::move(transport)), offline_(offline) {}

    [[nodiscard]] std::filesystem::path path_for(const SourceSpec& spec) const {
        return root_ / to_string(spec.kind) / (spec.cache_key + ".csv");
    }

    std::vector<RawObservation> fetch(const SourceSpec& spec) {
        if (spec.cache_key.empty()) throw ConfigError("source spec without cache key");
        std::lock_guard lock(key_mutex(spec.cache_key));
        const auto path = path_for(spec);
        if (std::filesystem::exists(path)) {
            return parse_observations(csv::read_text(path), path.string());
        }
        if (offline_) {
            throw DataError(fmt::format("offline: no cached data for source {} ({})",
                                        to_string(spec.kind), spec.locator));
        }
        if (!transport_) throw ConfigError("no transport configured");
        auto obs = parse_observations(transport_->get(spec.locator), spec.locator);
        csv::write_text(path, format_observations(obs));
        return obs;
    }

private:
    std::mutex& key_mutex(const std::string& key) {
        std::lock_guard lock(map_mutex_);
        return key_mutexes_[key];
    }

    std::filesystem::path root_;
    std::shared_ptr<Transport> transport_;
    bool offline_ = false;
    std::mutex map_mutex_;
    std::map<std::string, std::mutex> key_mutexes_;
};

enum class ResampleRule { last, sum };

struct WeeklySeries {
    SeriesFrame series;               // weeks with at least one observation
    std::vector<Date> missing_weeks;  // gaps between the first and last week
};

/// Collapses daily (or finer) observations of one series onto weeks ending
/// Sunday: `last` keeps the latest observation of the week (levels), `sum`
/// adds them up (flows).
inline WeeklySeries weekly_resample(std::vector<RawObservation> obs, ResampleRule rule) {
    if (obs.empty()) throw DataError("weekly_resample: empty input");
    std::stable_sort(obs.begin(), obs.end(),
                     [](const auto& a, const auto& b) { return a.date < b.date; });
    WeeklySeries out;
    out.series.name = obs.front().entity;
    out.series.unit = obs.front().unit == RawUnit::percent ? Unit::percent : Unit::level;
    for (const auto& o : obs) {
        if (o.entity != out.series.name) {
            throw DataError(fmt::format("weekly_resample: mixed entities {} and {}",
                                        out.series.name, o.entity));
        }
        const Date week = week_ending(o.date);
        if (out.series.time_index.empty() || out.series.time_index.back() != week) {
            out.series.time_index.push_back(week);
            out.series.values.push_back(o.value);
        } else if (rule == ResampleRule::sum) {
            out.series.values.back() += o.value;
        } else {
            out.series.values.back() = o.value;
        }
    }
    for (std::size_t t = 1; t < out.series.time_index.size(); ++t) {
        for (Date w = add_weeks(out.series.time_index[t - 1], 1); w < out.series.time_index[t];
             w = add_weeks(w, 1)) {
            out.missing_weeks.push_back(w);
        }
    }
    return out;
}

/// Splits observations by entity, preserving first-appearance order.
inline std::vector<std::pair<std::string, std::vector<RawObservation>>> group_by_entity(
    const std::vector<RawObservation>& obs) {
    std::vector<std::pair<std::string, std::vector<RawObservation>>> groups;
    std::map<std::string, std::size_t> where;
    for (const auto& o : obs) {
        auto [it, inserted] = where.emplace(o.entity, groups.size());
        if (inserted) groups.emplace_back(o.entity, std::vector<RawObservation>{});
        groups[it->second].second.push_back(o);
    }
    return groups;
}

/// Wide weekly matrix on `weeks` x `entities`, NaN where an entity has no
/// observation in that week.
inline MatrixXd pivot_weekly(const std::vector<RawObservation>& obs,
                             const std::vector<std::string>& entities,
                             const std::vector<Date>& weeks, ResampleRule rule) {
    MatrixXd out = MatrixXd::Constant(static_cast<Index>(weeks.size()),
                                      static_cast<Index>(entities.size()), kNaN);
    std::map<std::string, Index> col;
    for (std::size_t j = 0; j < entities.size(); ++j) col[entities[j]] = static_cast<Index>(j);
    for (auto& [entity, group] : group_by_entity(obs)) {
        auto it = col.find(entity);
        if (it == col.end()) continue;
        const auto ws = weekly_resample(group, rule);
        for (std::size_t t = 0; t < ws.series.size(); ++t) {
            auto pos = std::lower_bound(weeks.begin(), weeks.end(), ws.series.time_index[t]);
            if (pos != weeks.end() && *pos == ws.series.time_index[t]) {
                out(pos - weeks.begin(), it->second) = ws.series.values[t];
            }
        }
    }
    return out;
}

/// Union over weeks of the `size` largest assets by that week's market cap,
/// skipping blacklisted ids. Ties rank by asset id.
inline std::set<std::string> top100_universe(const MatrixXd& caps,
                                             const std::vector<std::string>& asset_ids,
                                             const std::set<std::string>& blacklist = {},
                                             std::size_t size = 100) {
    if (caps.size() == 0) throw DataError("top100_universe: empty market-cap matrix");
    std::set<std::string> universe;
    std::vector<Index> ranked;
    for (Index t = 0; t < caps.rows(); ++t) {
        ranked.clear();
        for (Index i = 0; i < caps.cols(); ++i) {
            if (std::isfinite(caps(t, i)) && caps(t, i) > 0 && !blacklist.contains(asset_ids[i])) {
                ranked.push_back(i);
            }
        }
        std::sort(ranked.begin(), ranked.end(), [&](Index a, Index b) {
            if (caps(t, a) != caps(t, b)) return caps(t, a) > caps(t, b);
            return asset_ids[a] < asset_ids[b];
        });
        const auto n = std::min(size, ranked.size());
        for (std::size_t k = 0; k < n; ++k) universe.insert(asset_ids[ranked[k]]);
    }
    return universe;
}

}  // namespace cryptoprem::ingest
