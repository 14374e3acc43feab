// Command-line front end: one subcommand per pipeline stage plus `run`.

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "cryptoprem/cryptoprem.hpp"
#include "cryptoprem/http_transport.hpp"

namespace {

using namespace cryptoprem;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 1;
    if (dynamic_cast<const DataError*>(&e)) return 2;
    if (dynamic_cast<const NumericalError*>(&e)) return 3;
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "cryptoprem: crypto factor construction and risk-premia estimation.\n"
        "Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.\n"
        "Network sources send the API key from $CRYPTOPREM_API_KEY in the header named by "
        "api_key_header."};
    app.require_subcommand(1);

    std::string config_path = "run.cfg";
    bool offline = false;
    bool verbose = false;
    app.add_option("-c,--config", config_path, "key = value run configuration")
        ->capture_default_str();
    app.add_flag("--offline", offline, "forbid network access; cold cache entries are errors");
    app.add_flag("-v,--verbose", verbose, "debug logging");

    auto* ingest = app.add_subcommand("ingest", "fetch sources through the cache and write weekly CSVs");
    auto* build = app.add_subcommand("build-factors", "construct factors and the excess-return panel");

    auto* select = app.add_subcommand("select-k", "choose the number of latent factors (Bai-Ng ICp2)");
    std::optional<int> kmax;
    select->add_option("--kmax", kmax, "largest k considered");

    auto* estimate = app.add_subcommand("estimate", "three-pass and/or Fama-MacBeth point estimates");
    std::string method = "both";
    estimate->add_option("--method", method, "three_pass, fama_macbeth or both")
        ->check(CLI::IsMember({"three_pass", "fama_macbeth", "both"}))
        ->capture_default_str();
    std::optional<int> k_override;
    estimate->add_option("-k", k_override, "number of latent factors (overrides the config)");

    auto* boot = app.add_subcommand("bootstrap", "moving-block bootstrap p-values for three-pass premia");
    std::optional<int> reps, block, workers;
    std::optional<std::uint64_t> seed;
    boot->add_option("--reps", reps, "replications");
    boot->add_option("--block", block, "block length in weeks");
    boot->add_option("--seed", seed, "base seed");
    boot->add_option("--workers", workers, "worker threads");

    auto* report = app.add_subcommand("report", "render premia and descriptive tables");
    auto* run = app.add_subcommand("run", "every stage in order");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        auto cfg = load_config(config_path);
        if (offline) cfg.offline = true;
        if (kmax) cfg.kmax = *kmax;
        if (k_override) cfg.k = *k_override;
        if (reps) cfg.bootstrap.reps = *reps;
        if (block) cfg.bootstrap.block_len = *block;
        if (seed) cfg.bootstrap.seed = *seed;
        if (workers) cfg.bootstrap.workers = *workers;
        cfg.validate();

        pipeline::Context ctx{cfg, csv::read_text(config_path), nullptr};
        ctx.transport = std::make_shared<ingest::HttpTransport>(cfg.base_dir, cfg.api_key_header);

        if (*ingest) {
            pipeline::ingest_stage(ctx);
        } else if (*build) {
            pipeline::build_factors_stage(ctx);
        } else if (*select) {
            const auto sel = pipeline::select_k_stage(ctx);
            std::cout << pipeline::ic_table_text(sel) << "selected k = " << sel.k << "\n";
        } else if (*estimate) {
            pipeline::estimate_stage(ctx, pipeline::estimate_which_from_string(method));
        } else if (*boot) {
            pipeline::bootstrap_stage(ctx);
        } else if (*report) {
            pipeline::report_stage(ctx);
            std::cout << csv::read_text(ctx.work(pipeline::files::table_md));
        } else if (*run) {
            pipeline::run_all(ctx);
            std::cout << csv::read_text(ctx.work(pipeline::files::table_md));
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return exit_code_for(e);
    }
    return 0;
}
