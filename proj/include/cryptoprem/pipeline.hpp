#pragma once

#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cryptoprem/bootstrap.hpp"
#include "cryptoprem/config.hpp"
#include "cryptoprem/csv.hpp"
#include "cryptoprem/error.hpp"
#include "cryptoprem/factors.hpp"
#include "cryptoprem/fama_macbeth.hpp"
#include "cryptoprem/ingest.hpp"
#include "cryptoprem/latent_pca.hpp"
#include "cryptoprem/panel.hpp"
#include "cryptoprem/premia.hpp"
#include "cryptoprem/report.hpp"
#include "cryptoprem/three_pass.hpp"

namespace cryptoprem::pipeline {

// Stage file names inside the work directory.
namespace files {
inline constexpr const char* returns = "returns.csv";
inline constexpr const char* caps = "caps.csv";
inline constexpr const char* tvl = "tvl.csv";
inline constexpr const char* rf = "rf.csv";
inline constexpr const char* series = "series.csv";
inline constexpr const char* factors = "factors.csv";
inline constexpr const char* panel_returns = "panel_returns.csv";
inline constexpr const char* panel_caps = "panel_caps.csv";
inline constexpr const char* latent_diag = "latent_diag.csv";
inline constexpr const char* selected_k = "selected_k.txt";
inline constexpr const char* premia_tp = "premia_three_pass.csv";
inline constexpr const char* premia_fm = "premia_fama_macbeth.csv";
inline constexpr const char* fm_detail = "fama_macbeth_detail.csv";
inline constexpr const char* draws = "bootstrap_draws.csv";
inline constexpr const char* table_md = "premia_table.md";
inline constexpr const char* table_csv = "premia_table.csv";
inline constexpr const char* desc_csv = "descriptives.csv";
inline constexpr const char* desc_md = "descriptives.md";
inline constexpr const char* manifest = "manifest.json";
}  // namespace files

inline constexpr const char* kRiskFreeColumn = "rf_pct_weekly";

// Columns of series.csv that feed the non-tradable factors.
inline constexpr const char* kHacksUsd = "hacks_usd";
inline constexpr const char* kTotalMcap = "total_mcap";
inline constexpr const char* kAltseason = "altseason";
inline constexpr const char* kFearGreed = "fear_greed";
inline constexpr const char* kCvx = "cvx";

/// Weeks fetched before `start`: momentum needs `window` prior returns and
/// the non-tradables lose two weeks to differencing and the AR(1) lag.
inline int warmup_weeks(const RunConfig& cfg) { return std::max(cfg.momentum_window, 2) + 2; }

inline std::vector<Date> week_range(Date first, Date last) {
    std::vector<Date> out;
    for (Date w = first; w <= last; w = add_weeks(w, 1)) out.push_back(w);
    return out;
}

inline std::vector<Date> sample_weeks(const RunConfig& cfg) { return week_range(cfg.start, cfg.end); }

inline std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

inline std::string file_hash(const std::filesystem::path& p) {
    return hash_hex(ingest::fnv1a64(csv::read_text(p)));
}

/// Rethrows any library error with the stage name in front, keeping its type
/// so the exit code still reflects the error class.
template <class F>
auto run_stage(const char* stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", stage, e.what()));
    } catch (const DataError& e) {
        throw DataError(fmt::format("{}: {}", stage, e.what()));
    } catch (const NumericalError& e) {
        throw NumericalError(fmt::format("{}: {}", stage, e.what()));
    } catch (const std::exception& e) {
        throw DataError(fmt::format("{}: {}", stage, e.what()));
    }
}

/// Adds a stage record to manifest.json: hashes of the files read and
/// written, the config hash, the seed, and a timestamp.
inline void record_stage(const RunConfig& cfg, const std::string& config_text,
                         const std::string& stage, const std::vector<std::string>& inputs,
                         const std::vector<std::string>& outputs) {
    const auto work = cfg.work_path();
    const auto path = work / files::manifest;
    nlohmann::json m = nlohmann::json::object();
    if (std::filesystem::exists(path)) {
        try {
            m = nlohmann::json::parse(csv::read_text(path));
        } catch (const nlohmann::json::exception&) {
            m = nlohmann::json::object();
        }
    }
    m["config_hash"] = hash_hex(ingest::fnv1a64(config_text));
    m["seed"] = cfg.bootstrap.seed;
    m["tool"] = "cryptoprem";
    nlohmann::json rec;
    for (const auto& f : inputs) {
        if (std::filesystem::exists(work / f)) rec["inputs"][f] = file_hash(work / f);
    }
    for (const auto& f : outputs) rec["outputs"][f] = file_hash(work / f);
    const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    rec["finished_at"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now);
    m["stages"][stage] = rec;
    csv::write_text(path, m.dump(2) + "\n");
}

/// Pipeline context: the parsed config, its source text (hashed into the
/// manifest) and the transport used by ingest.
struct Context {
    RunConfig cfg;
    std::string config_text;
    std::shared_ptr<ingest::Transport> transport;

    [[nodiscard]] std::filesystem::path work(const char* name) const {
        return cfg.work_path() / name;
    }
};

inline Context make_context(const std::filesystem::path& config_path,
                            std::shared_ptr<ingest::Transport> transport = nullptr) {
    Context ctx{load_config(config_path), csv::read_text(config_path), std::move(transport)};
    if (!ctx.transport) ctx.transport = std::make_shared<ingest::FileTransport>(ctx.cfg.base_dir);
    return ctx;
}

// ---------------------------------------------------------------- ingest

struct IngestSummary {
    std::size_t universe = 0;
    std::size_t weeks = 0;
};

namespace detail {

inline std::vector<Date> dates_of(const std::vector<Date>& weeks, std::size_t from) {
    return {weeks.begin() + static_cast<std::ptrdiff_t>(from), weeks.end()};
}

/// Weekly series of one entity on `weeks` (NaN where absent).
inline std::vector<double> weekly_column(const std::vector<ingest::RawObservation>& obs,
                                         const std::string& entity,
                                         const std::vector<Date>& weeks, ingest::ResampleRule rule) {
    const MatrixXd m = ingest::pivot_weekly(obs, {entity}, weeks, rule);
    return {m.data(), m.data() + m.size()};
}

inline std::vector<std::string> entities_of(const std::vector<ingest::RawObservation>& obs) {
    std::vector<std::string> out;
    for (const auto& [e, _] : ingest::group_by_entity(obs)) out.push_back(e);
    return out;
}

}  // namespace detail

/// Fetches every configured source (through the cache), resamples to weeks
/// ending Sunday and writes the stage CSVs: returns, caps and TVL for the
/// top-`universe_size` universe, the risk-free rate, and the auxiliary series.
inline IngestSummary ingest_stage(const Context& ctx) {
    return run_stage("ingest", [&] {
        using namespace ingest;
        const auto& cfg = ctx.cfg;
        const Date first = add_weeks(cfg.start, -warmup_weeks(cfg));
        const Date fetch_from = add_weeks(first, -1);  // prices one week earlier for returns
        const std::vector<SourceKind> kinds = {
            SourceKind::prices,           SourceKind::market_caps,     SourceKind::tvl,
            SourceKind::hacks_usd,        SourceKind::altseason_index, SourceKind::fear_greed_index,
            SourceKind::cvx_level,        SourceKind::equity_factors,  SourceKind::equity_industries};

        SourceCache cache(cfg.cache_path(), ctx.transport, cfg.offline);
        std::map<SourceKind, std::vector<RawObservation>> raw;
        {
            std::vector<std::optional<std::vector<RawObservation>>> got(kinds.size());
            std::vector<std::exception_ptr> errors(kinds.size());
            std::vector<std::jthread> pool;
            for (std::size_t s = 0; s < kinds.size(); ++s) {
                const auto loc = cfg.locator(kinds[s]);
                const SourceSpec spec{kinds[s], loc,
                                      make_cache_key(kinds[s], loc, fetch_from, cfg.end)};
                pool.emplace_back([&, spec, s] {
                    try {
                        got[s] = cache.fetch(spec);
                    } catch (...) {
                        errors[s] = std::current_exception();
                    }
                });
            }
            pool.clear();  // joins
            for (std::size_t s = 0; s < kinds.size(); ++s) {
                if (errors[s]) std::rethrow_exception(errors[s]);
                raw[kinds[s]] = std::move(*got[s]);
            }
        }

        const auto ext_weeks = week_range(fetch_from, cfg.end);
        const auto weeks = detail::dates_of(ext_weeks, 1);
        const auto sample = sample_weeks(cfg);

        // Market caps decide the universe.
        const auto all_ids = detail::entities_of(raw[SourceKind::market_caps]);
        const MatrixXd all_caps =
            pivot_weekly(raw[SourceKind::market_caps], all_ids, weeks, ResampleRule::last);
        const auto universe_set =
            top100_universe(all_caps.bottomRows(static_cast<Index>(sample.size())), all_ids,
                            cfg.stablecoins, cfg.universe_size);
        const std::vector<std::string> universe(universe_set.begin(), universe_set.end());

        const MatrixXd prices =
            pivot_weekly(raw[SourceKind::prices], universe, ext_weeks, ResampleRule::last);
        MatrixXd returns = MatrixXd::Constant(static_cast<Index>(weeks.size()),
                                              static_cast<Index>(universe.size()), kNaN);
        for (Index t = 0; t < returns.rows(); ++t) {
            for (Index i = 0; i < returns.cols(); ++i) {
                const double p0 = prices(t, i);
                const double p1 = prices(t + 1, i);
                if (std::isfinite(p0) && std::isfinite(p1) && p0 > 0) {
                    returns(t, i) = (p1 / p0 - 1.0) * 100.0;
                }
            }
        }
        const MatrixXd caps =
            pivot_weekly(raw[SourceKind::market_caps], universe, weeks, ResampleRule::last);
        const MatrixXd tvl = pivot_weekly(raw[SourceKind::tvl], universe, weeks, ResampleRule::last);
        write_wide(weeks, universe, returns, ctx.work(files::returns));
        write_wide(weeks, universe, caps, ctx.work(files::caps));
        write_wide(weeks, universe, tvl, ctx.work(files::tvl));

        // Risk-free rate from the equity-factor source.
        auto& eq = raw[SourceKind::equity_factors];
        const auto rf = detail::weekly_column(eq, cfg.risk_free_entity, weeks, ResampleRule::sum);
        write_wide(weeks, {kRiskFreeColumn}, Eigen::Map<const MatrixXd>(rf.data(), rf.size(), 1),
                   ctx.work(files::rf));

        // Auxiliary series: state variables then equity factors and industries.
        std::vector<std::string> names = {kHacksUsd, kTotalMcap, kAltseason, kFearGreed, kCvx};
        std::vector<std::vector<double>> cols;
        {
            auto hacks = raw[SourceKind::hacks_usd];
            for (auto& o : hacks) o.entity = kHacksUsd;
            auto h = hacks.empty() ? std::vector<double>(weeks.size(), kNaN)
                                   : detail::weekly_column(hacks, kHacksUsd, weeks, ResampleRule::sum);
            for (auto& v : h) {
                if (std::isnan(v)) v = 0.0;  // no reported hack that week
            }
            cols.push_back(std::move(h));
            std::vector<double> total(weeks.size(), kNaN);
            for (Index t = 0; t < all_caps.rows(); ++t) {
                double sum = 0;
                bool any = false;
                for (Index i = 0; i < all_caps.cols(); ++i) {
                    if (std::isfinite(all_caps(t, i))) {
                        sum += all_caps(t, i);
                        any = true;
                    }
                }
                if (any) total[static_cast<std::size_t>(t)] = sum;
            }
            cols.push_back(std::move(total));
        }
        for (const auto kind :
             {SourceKind::altseason_index, SourceKind::fear_greed_index, SourceKind::cvx_level}) {
            auto obs = raw[kind];
            for (auto& o : obs) o.entity = "x";
            cols.push_back(detail::weekly_column(obs, "x", weeks, ResampleRule::last));
        }
        for (const auto kind : {SourceKind::equity_factors, SourceKind::equity_industries}) {
            for (const auto& e : detail::entities_of(raw[kind])) {
                if (kind == SourceKind::equity_factors && e == cfg.risk_free_entity) continue;
                names.push_back(e);
                cols.push_back(detail::weekly_column(raw[kind], e, weeks, ResampleRule::sum));
            }
        }
        MatrixXd aux(static_cast<Index>(weeks.size()), static_cast<Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) {
            aux.col(static_cast<Index>(j)) =
                Eigen::Map<const VectorXd>(cols[j].data(), static_cast<Index>(cols[j].size()));
        }
        write_wide(weeks, names, aux, ctx.work(files::series));

        spdlog::info("ingest: {} assets in the universe, {} weeks ({} before the sample)",
                     universe.size(), weeks.size(), weeks.size() - sample.size());
        record_stage(cfg, ctx.config_text, "ingest", {},
                     {files::returns, files::caps, files::tvl, files::rf, files::series});
        return IngestSummary{universe.size(), weeks.size()};
    });
}

// ---------------------------------------------------------------- factors

namespace detail {

inline SeriesFrame on_weeks(const SeriesFrame& s, const std::vector<Date>& weeks) {
    return align({s}, weeks).column(0);
}

/// Cellwise lookup of a wide table on the panel's weeks and assets (NaN when
/// absent).
inline MatrixXd reindex(const WideTable& w, const ReturnPanel& panel) {
    MatrixXd out = MatrixXd::Constant(panel.periods(), panel.assets(), kNaN);
    std::map<std::string, Index> col;
    for (std::size_t j = 0; j < w.columns.size(); ++j) col[w.columns[j]] = static_cast<Index>(j);
    for (Index t = 0; t < panel.periods(); ++t) {
        const auto week = panel.time_index()[static_cast<std::size_t>(t)];
        const auto pos = std::lower_bound(w.dates.begin(), w.dates.end(), week);
        if (pos == w.dates.end() || *pos != week) continue;
        const auto r = pos - w.dates.begin();
        for (Index i = 0; i < panel.assets(); ++i) {
            auto it = col.find(panel.asset_ids()[static_cast<std::size_t>(i)]);
            if (it != col.end()) out(t, i) = w.values(r, it->second);
        }
    }
    return out;
}

inline SeriesFrame find_frame(const std::vector<SeriesFrame>& frames, const std::string& name,
                              Unit unit) {
    for (const auto& f : frames) {
        if (f.name == name) {
            auto out = f;
            out.unit = unit;
            return out;
        }
    }
    throw DataError(fmt::format("{}: no column {}", files::series, name));
}

}  // namespace detail

struct FactorBuild {
    FactorSet factors;
    ReturnPanel panel;  // excess returns on the sample weeks
};

/// Constructs every factor on the sample weeks and the excess-return panel.
inline FactorBuild build_factors(const RunConfig& cfg) {
    const auto work = cfg.work_path();
    std::vector<std::string> dropped;
    const auto total = load_panel(work / files::returns, work / files::caps, &dropped);
    const auto rf = load_series(work / files::rf, kRiskFreeColumn, Unit::percent);
    const auto sample = sample_weeks(cfg);

    std::vector<SeriesFrame> frames;
    std::vector<FactorKind> kinds;
    auto add = [&](SeriesFrame s, FactorKind kind) {
        frames.push_back(detail::on_weeks(s, sample));
        kinds.push_back(kind);
    };

    const auto rc = detail::on_weeks(market_factor(total, rf, "R_C"), sample);
    add(rc, FactorKind::tradable);

    SortSpec smb = cfg.smb;
    smb.signal_name = "SMB_C";
    add(long_short(total, total.market_caps(), smb, &rf), FactorKind::tradable);

    SortSpec mom = cfg.mom;
    mom.signal_name = "Mom_C";
    add(long_short(total, momentum_signal(total, cfg.momentum_window), mom, &rf),
        FactorKind::tradable);

    SortSpec tvl = cfg.tvl;
    tvl.signal_name = "TVL";
    const auto tvl_wide = read_wide(work / files::tvl);
    const auto tvl_signal = ratio_signal(detail::reindex(tvl_wide, total), total.market_caps());
    const auto tvl_raw = detail::on_weeks(long_short(total, tvl_signal, tvl, &rf), sample);
    add(orthogonalize(tvl_raw, rc), FactorKind::tradable);

    const auto series = load_frames(work / files::series, Unit::percent);
    const std::set<std::string> state = {kHacksUsd, kTotalMcap, kAltseason, kFearGreed, kCvx};
    for (const auto& s : series) {
        if (!state.contains(s.name)) add(s, FactorKind::tradable);
    }

    // State variables: levels from two weeks before the sample so that the
    // percent change and the AR(1) lag leave exactly the sample weeks.
    const auto level_weeks = week_range(add_weeks(cfg.start, -2), cfg.end);
    auto level = [&](const char* name, Unit unit) {
        return detail::on_weeks(detail::find_frame(series, name, unit), level_weeks);
    };
    const auto shocks =
        nontradable_shocks(level(kHacksUsd, Unit::level), level(kTotalMcap, Unit::level),
                           level(kAltseason, Unit::level), level(kFearGreed, Unit::level),
                           level(kCvx, Unit::level));
    for (Index j = 0; j < shocks.factors(); ++j) add(shocks.column(j), FactorKind::nontradable);

    FactorSet all = align(frames, sample, kinds);
    if (!cfg.factors.empty()) {
        std::vector<SeriesFrame> keep;
        std::vector<FactorKind> keep_kinds;
        for (const auto& name : cfg.factors) {
            const auto j = all.index_of(name);
            keep.push_back(all.column(j));
            keep_kinds.push_back(all.kinds[static_cast<std::size_t>(j)]);
        }
        all = align(keep, sample, keep_kinds);
    }

    auto panel = to_excess(restrict_to(total, sample, &dropped), rf);
    return FactorBuild{std::move(all), std::move(panel)};
}

inline FactorSet build_factors_stage(const Context& ctx) {
    return run_stage("build-factors", [&] {
        auto built = build_factors(ctx.cfg);
        write_factors(built.factors, ctx.work(files::factors));
        write_panel(built.panel, ctx.work(files::panel_returns), ctx.work(files::panel_caps));
        spdlog::info("build-factors: {} factors over {} weeks, panel of {} assets",
                     built.factors.factors(), built.factors.periods(), built.panel.assets());
        record_stage(ctx.cfg, ctx.config_text, "build-factors",
                     {files::returns, files::caps, files::tvl, files::rf, files::series},
                     {files::factors, files::panel_returns, files::panel_caps});
        return built.factors;
    });
}

// ---------------------------------------------------------------- select-k

inline ReturnPanel load_sample_panel(const RunConfig& cfg) {
    const auto work = cfg.work_path();
    return load_panel(work / files::panel_returns, work / files::panel_caps);
}

inline std::string ic_table_csv(const FactorCountSelection& sel) {
    std::string out = "k,v,icp1,icp2,icp3,iterations,converged\n";
    for (const auto& r : sel.table) {
        out += fmt::format("{},{},{},{},{},{},{}\n", r.k, csv::number(r.v), csv::number(r.icp1),
                           csv::number(r.icp2), csv::number(r.icp3), r.iterations,
                           r.converged ? 1 : 0);
    }
    return out;
}

/// Human-readable IC table with the selected row marked.
inline std::string ic_table_text(const FactorCountSelection& sel) {
    std::string out = fmt::format("{:>3} {:>14} {:>10} {:>10} {:>10}\n", "k", "V(k)", "ICp1",
                                  "ICp2", "ICp3");
    for (const auto& r : sel.table) {
        out += fmt::format("{:>3} {:>14.6g} {:>10.5f} {:>10.5f} {:>10.5f}{}\n", r.k, r.v, r.icp1,
                           r.icp2, r.icp3, r.k == sel.k ? "  <- selected" : "");
    }
    return out;
}

inline FactorCountSelection select_k_stage(const Context& ctx) {
    return run_stage("select-k", [&] {
        const auto panel = load_sample_panel(ctx.cfg);
        const int kmax = std::min<int>(ctx.cfg.kmax, static_cast<int>(std::min(panel.periods(),
                                                                                panel.assets())) - 1);
        if (kmax < 1) throw DataError("panel too small for factor-count selection");
        auto sel = bai_ng_k(panel, kmax, ctx.cfg.imputation);
        csv::write_text(ctx.work(files::latent_diag), ic_table_csv(sel));
        csv::write_text(ctx.work(files::selected_k), fmt::format("{}\n", sel.k));
        spdlog::info("select-k: ICp2 selects k = {}", sel.k);
        record_stage(ctx.cfg, ctx.config_text, "select-k", {files::panel_returns},
                     {files::latent_diag, files::selected_k});
        return sel;
    });
}

/// K from the config, else from a previous select-k, else selected now.
inline int resolve_k(const Context& ctx) {
    if (ctx.cfg.k) return *ctx.cfg.k;
    const auto path = ctx.work(files::selected_k);
    if (std::filesystem::exists(path)) {
        const auto text = csv::read_text(path);
        try {
            return std::stoi(text);
        } catch (const std::exception&) {
            throw DataError(path.string() + ": not an integer");
        }
    }
    return select_k_stage(ctx).k;
}

// ---------------------------------------------------------------- estimate

enum class EstimateWhich { three_pass, fama_macbeth, both };

inline EstimateWhich estimate_which_from_string(std::string_view s) {
    if (s == "three_pass") return EstimateWhich::three_pass;
    if (s == "fama_macbeth") return EstimateWhich::fama_macbeth;
    if (s == "both") return EstimateWhich::both;
    throw ConfigError(fmt::format("unknown method '{}'", s));
}

inline std::string fm_detail_csv(const FMResult& fm) {
    std::string out = "factor,lambda,se_fm,se_shanken,pvalue_fm,pvalue_shanken\n";
    for (std::size_t j = 0; j < fm.factor_names.size(); ++j) {
        const auto i = static_cast<Index>(j);
        out += fmt::format("{},{},{},{},{},{}\n", fm.factor_names[j], csv::number(fm.lambda_mean(i)),
                           csv::number(fm.se_fm(i)), csv::number(fm.se_shanken(i)),
                           csv::number(fm.pvalues_fm(i)), csv::number(fm.pvalues(i)));
    }
    return out;
}

namespace detail {

inline PremiaTable write_premia_tables(const Context& ctx) {
    const auto tp = read_premia_csv(ctx.work(files::premia_tp), Method::three_pass);
    const auto fm = read_premia_csv(ctx.work(files::premia_fm), Method::fama_macbeth);
    auto table = render_premia(tp, fm);
    csv::write_text(ctx.work(files::table_md), premia_markdown(table));
    csv::write_text(ctx.work(files::table_csv), premia_table_csv(table));
    return table;
}

}  // namespace detail

inline ThreePassConfig three_pass_config(const RunConfig& cfg) {
    return ThreePassConfig{cfg.imputation, cfg.cs_intercept};
}

inline void estimate_stage(const Context& ctx, EstimateWhich which) {
    run_stage("estimate", [&] {
        const auto panel = load_sample_panel(ctx.cfg);
        const auto G = read_factors(ctx.work(files::factors));
        std::vector<std::string> outputs;
        if (which != EstimateWhich::fama_macbeth) {
            const int k = resolve_k(ctx);
            const auto est = run_three_pass(panel, G, k, three_pass_config(ctx.cfg));
            for (const auto& w : est.warnings) spdlog::warn("three-pass: {}", w);
            write_premia_csv(est, ctx.work(files::premia_tp));
            outputs.push_back(files::premia_tp);
            spdlog::info("estimate: three-pass premia with k = {}", k);
        }
        if (which != EstimateWhich::three_pass) {
            const auto fm = run_fama_macbeth(panel, G);
            write_premia_csv(to_estimate(fm), ctx.work(files::premia_fm));
            csv::write_text(ctx.work(files::fm_detail), fm_detail_csv(fm));
            outputs.push_back(files::premia_fm);
            outputs.push_back(files::fm_detail);
            spdlog::info("estimate: Fama-MacBeth premia over {} weeks ({} skipped)", fm.weeks_used,
                         fm.skipped_weeks.size());
        }
        if (which == EstimateWhich::both) {
            // three-pass p-values stay blank until the bootstrap stage runs
            detail::write_premia_tables(ctx);
            outputs.push_back(files::table_md);
            outputs.push_back(files::table_csv);
        }
        record_stage(ctx.cfg, ctx.config_text, "estimate",
                     {files::panel_returns, files::factors, files::selected_k}, outputs);
    });
}

// ---------------------------------------------------------------- bootstrap

/// Bootstraps the three-pass premia and rewrites premia_three_pass.csv with
/// recentered p-values.
inline BootstrapDistribution bootstrap_stage(const Context& ctx) {
    return run_stage("bootstrap", [&] {
        const auto panel = load_sample_panel(ctx.cfg);
        const auto G = read_factors(ctx.work(files::factors));
        const int k = resolve_k(ctx);
        auto dist = bootstrap_premia(panel, G, k, ctx.cfg.bootstrap, three_pass_config(ctx.cfg));
        RiskPremiaEstimate est;
        est.method = Method::three_pass;
        est.factor_names = dist.factor_names;
        est.lambda = dist.point_estimate;
        est.set_pvalues(recentered_pvalue(dist));
        write_premia_csv(est, ctx.work(files::premia_tp));
        write_bootstrap_draws(dist, ctx.work(files::draws));
        spdlog::info("bootstrap: {} replications, {} failed", dist.reps, dist.failed_reps);
        record_stage(ctx.cfg, ctx.config_text, "bootstrap",
                     {files::panel_returns, files::factors, files::selected_k},
                     {files::premia_tp, files::draws});
        return dist;
    });
}

// ---------------------------------------------------------------- report

inline PremiaTable report_stage(const Context& ctx) {
    return run_stage("report", [&] {
        const auto G = read_factors(ctx.work(files::factors));
        std::vector<SeriesFrame> cols;
        for (Index j = 0; j < G.factors(); ++j) cols.push_back(G.column(j));
        const auto desc = describe_all(cols);
        csv::write_text(ctx.work(files::desc_csv), descriptives_csv(desc));
        csv::write_text(ctx.work(files::desc_md), descriptives_markdown(desc));
        auto table = detail::write_premia_tables(ctx);
        record_stage(ctx.cfg, ctx.config_text, "report",
                     {files::factors, files::premia_tp, files::premia_fm},
                     {files::desc_csv, files::desc_md, files::table_md, files::table_csv});
        return table;
    });
}

/// Every stage in order.
inline PremiaTable run_all(const Context& ctx) {
    ingest_stage(ctx);
    build_factors_stage(ctx);
    if (!ctx.cfg.k) select_k_stage(ctx);
    estimate_stage(ctx, EstimateWhich::both);
    bootstrap_stage(ctx);
    return report_stage(ctx);
}

}  // namespace cryptoprem::pipeline
