#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "cryptoprem/bootstrap.hpp"
#include "cryptoprem/csv.hpp"
#include "cryptoprem/date.hpp"
#include "cryptoprem/error.hpp"
#include "cryptoprem/factors.hpp"
#include "cryptoprem/ingest.hpp"
#include "cryptoprem/latent_pca.hpp"

namespace cryptoprem {

/// Everything a pipeline run needs, read from one `key = value` file.
///
/// Lines starting with `#` are comments. Relative paths resolve against the
/// directory holding the config file. Unknown keys are rejected so that a
/// typo cannot silently fall back to a default.
struct RunConfig {
    std::filesystem::path base_dir = ".";
    std::filesystem::path cache_dir = "cache";
    std::filesystem::path work_dir = "out";
    std::map<ingest::SourceKind, std::string> sources;  // kind -> locator
    Date start = parse_date("2023-01-01");
    Date end = parse_date("2024-12-29");
    std::set<std::string> stablecoins;
    std::size_t universe_size = 100;
    std::string risk_free_entity = "RF";
    std::optional<int> k;  // nullopt = Bai-Ng selection
    int kmax = 15;
    ImputationConfig imputation;
    bool cs_intercept = false;
    BootstrapConfig bootstrap;
    int momentum_window = 5;
    SortSpec smb{"SMB_C", 1, Leg::bottom25, Weighting::value, true, 1};
    SortSpec mom{"Mom_C", 5, Leg::top25, Weighting::value, false, 0};
    SortSpec tvl{"TVL", 1, Leg::top25, Weighting::value, false, 1};
    std::vector<std::string> factors;  // empty = every constructed factor
    bool offline = false;
    std::string api_key_header = "X-API-Key";

    /// Locator with relative file paths anchored at the config directory.
    [[nodiscard]] std::string locator(ingest::SourceKind kind) const {
        auto it = sources.find(kind);
        if (it == sources.end()) {
            throw ConfigError("no locator configured for source." + ingest::to_string(kind));
        }
        const auto& loc = it->second;
        if (loc.starts_with("http://") || loc.starts_with("https://")) return loc;
        const std::filesystem::path p(loc);
        return p.is_absolute() ? loc : (base_dir / p).lexically_normal().string();
    }

    [[nodiscard]] std::filesystem::path cache_path() const { return resolve(cache_dir); }
    [[nodiscard]] std::filesystem::path work_path() const { return resolve(work_dir); }

    [[nodiscard]] std::filesystem::path resolve(const std::filesystem::path& p) const {
        return p.is_absolute() ? p : (base_dir / p).lexically_normal();
    }

    void validate() const {
        if (end < start) throw ConfigError("end precedes start");
        if (universe_size < 1) throw ConfigError("universe_size must be >= 1");
        if (k && *k < 1) throw ConfigError("k must be >= 1 or auto");
        if (kmax < 1) throw ConfigError("kmax must be >= 1");
        if (momentum_window < 1) throw ConfigError("momentum.window must be >= 1");
        imputation.validate();
        smb.validate();
        mom.validate();
        tvl.validate();
        std::set<std::string> seen;
        for (const auto& f : factors) {
            if (!seen.insert(f).second) throw ConfigError("duplicate factor name " + f);
        }
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_int(std::string_view key, std::string_view v) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, v));
    }
    return out;
}

inline double parse_real(std::string_view key, std::string_view v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, v));
    }
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, v));
}

inline std::vector<std::string> parse_list(std::string_view v) {
    std::vector<std::string> out;
    for (const auto& item : csv::split_line(v)) {
        auto t = trim(item);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

inline void apply_sort_key(SortSpec& spec, std::string_view key, std::string_view field,
                           std::string_view v) {
    if (field == "weighting") {
        if (v == "value") spec.weighting = Weighting::value;
        else if (v == "equal") spec.weighting = Weighting::equal;
        else throw ConfigError(fmt::format("{}: expected value or equal", key));
    } else if (field == "long_leg") {
        if (v == "top25") spec.long_leg = Leg::top25;
        else if (v == "bottom25") spec.long_leg = Leg::bottom25;
        else throw ConfigError(fmt::format("{}: expected top25 or bottom25", key));
    } else if (field == "subtract_rf") {
        spec.subtract_rf = parse_bool(key, v);
    } else {
        throw ConfigError(fmt::format("unknown config key '{}'", key));
    }
}

}  // namespace detail

/// Applies one `key = value` setting.
inline void apply_setting(RunConfig& cfg, std::string_view key, std::string_view v) {
    using detail::parse_bool;
    using detail::parse_int;
    if (key == "cache_dir") cfg.cache_dir = std::string(v);
    else if (key == "work_dir") cfg.work_dir = std::string(v);
    else if (key == "start") cfg.start = week_ending(parse_date(v));
    else if (key == "end") cfg.end = week_ending(parse_date(v));
    else if (key == "stablecoins") {
        auto l = detail::parse_list(v);
        cfg.stablecoins = {l.begin(), l.end()};
    } else if (key == "universe_size") cfg.universe_size = parse_int<std::size_t>(key, v);
    else if (key == "risk_free_entity") cfg.risk_free_entity = std::string(v);
    else if (key == "k") {
        if (v == "auto") cfg.k.reset();
        else cfg.k = parse_int<int>(key, v);
    } else if (key == "kmax") cfg.kmax = parse_int<int>(key, v);
    else if (key == "imputation.tol") cfg.imputation.tol = detail::parse_real(key, v);
    else if (key == "imputation.max_iter") cfg.imputation.max_iter = parse_int<int>(key, v);
    else if (key == "imputation.init") {
        if (v == "zeros") cfg.imputation.init = ImputeInit::zeros;
        else if (v == "cross_sectional_mean") cfg.imputation.init = ImputeInit::cross_sectional_mean;
        else throw ConfigError("imputation.init: expected zeros or cross_sectional_mean");
    } else if (key == "three_pass.cs_intercept") cfg.cs_intercept = parse_bool(key, v);
    else if (key == "bootstrap.reps") cfg.bootstrap.reps = parse_int<int>(key, v);
    else if (key == "bootstrap.block") cfg.bootstrap.block_len = parse_int<int>(key, v);
    else if (key == "bootstrap.seed") cfg.bootstrap.seed = parse_int<std::uint64_t>(key, v);
    else if (key == "bootstrap.workers") cfg.bootstrap.workers = parse_int<int>(key, v);
    else if (key == "momentum.window") {
        cfg.momentum_window = parse_int<int>(key, v);
        cfg.mom.lookback = cfg.momentum_window;
    } else if (key == "factors") cfg.factors = detail::parse_list(v);
    else if (key == "offline") cfg.offline = parse_bool(key, v);
    else if (key == "api_key_header") cfg.api_key_header = std::string(v);
    else if (key.starts_with("source.")) {
        cfg.sources[ingest::source_kind_from_string(key.substr(7))] = std::string(v);
    } else if (key.starts_with("smb.")) detail::apply_sort_key(cfg.smb, key, key.substr(4), v);
    else if (key.starts_with("mom.")) detail::apply_sort_key(cfg.mom, key, key.substr(4), v);
    else if (key.starts_with("tvl.")) detail::apply_sort_key(cfg.tvl, key, key.substr(4), v);
    else throw ConfigError(fmt::format("unknown config key '{}'", key));
}

inline RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                              std::string_view source = "config") {
    RunConfig cfg;
    cfg.base_dir = base_dir;
    std::size_t line_no = 0;
    std::set<std::string, std::less<>> seen;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = detail::trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(fmt::format("{}:{}: expected key = value", source, line_no));
        }
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (!seen.emplace(key).second) {
            throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", source, line_no, key));
        }
        try {
            apply_setting(cfg, key, value);
        } catch (const std::exception& e) {
            throw ConfigError(fmt::format("{}:{}: {}", source, line_no, e.what()));
        }
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    const auto text = csv::read_text(path);
    auto base = path.parent_path();
    if (base.empty()) base = ".";
    return parse_config(text, base, path.string());
}

}  // namespace cryptoprem
