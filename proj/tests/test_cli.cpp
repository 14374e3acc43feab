#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "support.hpp"

using namespace cryptoprem;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string output;
};

CliResult cli(const fs::path& dir, const std::string& args) {
    const auto log = dir / "cli_output.txt";
    const std::string cmd = fmt::format("cd '{}' && '{}' {} > '{}' 2>&1", dir.string(), CRYPTOPREM_CLI,
                                        args, log.string());
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = csv::read_text(log);
    return r;
}

// Copies a bundled fixture without any outputs or cache from earlier runs.
void copy_fixture(const std::string& name, const fs::path& to) {
    const auto from = source_dir() / "fixtures" / name;
    for (const auto& entry : fs::directory_iterator(from)) {
        const auto leaf = entry.path().filename();
        if (leaf == "out" || leaf == "cache") continue;
        fs::copy(entry.path(), to / leaf, fs::copy_options::recursive);
    }
}

}  // namespace

TEST(Config, ParsesEveryKnownKey) {
    const auto cfg = parse_config(
        "# comment\n"
        "cache_dir = c\nwork_dir = /abs/out\nstart = 2023-01-04\nend = 2023-12-31\n"
        "stablecoins = USDT, DAI\nuniverse_size = 50\nrisk_free_entity = TB\nk = 4\nkmax = 9\n"
        "imputation.tol = 1e-6\nimputation.max_iter = 50\nimputation.init = cross_sectional_mean\n"
        "three_pass.cs_intercept = true\nbootstrap.reps = 10\nbootstrap.block = 4\n"
        "bootstrap.seed = 99\nbootstrap.workers = 3\nmomentum.window = 4\nfactors = R_C,SMB_C\n"
        "offline = yes\napi_key_header = Authorization\nsource.prices = raw/p.csv\n"
        "smb.weighting = equal\nmom.long_leg = bottom25\ntvl.subtract_rf = true\n",
        "/base");
    EXPECT_EQ(cfg.cache_path(), fs::path("/base/c"));
    EXPECT_EQ(cfg.work_path(), fs::path("/abs/out"));
    EXPECT_EQ(format_date(cfg.start), "2023-01-08");  // snapped to the week's Sunday
    EXPECT_EQ(cfg.stablecoins, (std::set<std::string>{"USDT", "DAI"}));
    EXPECT_EQ(cfg.universe_size, 50u);
    EXPECT_EQ(cfg.k, 4);
    EXPECT_EQ(cfg.kmax, 9);
    EXPECT_EQ(cfg.imputation.max_iter, 50);
    EXPECT_EQ(cfg.imputation.init, ImputeInit::cross_sectional_mean);
    EXPECT_TRUE(cfg.cs_intercept);
    EXPECT_EQ(cfg.bootstrap.seed, 99u);
    EXPECT_EQ(cfg.bootstrap.workers, 3);
    EXPECT_EQ(cfg.mom.lookback, 4);
    EXPECT_EQ(cfg.factors, (std::vector<std::string>{"R_C", "SMB_C"}));
    EXPECT_TRUE(cfg.offline);
    EXPECT_EQ(cfg.locator(ingest::SourceKind::prices), "/base/raw/p.csv");
    EXPECT_EQ(cfg.smb.weighting, Weighting::equal);
    EXPECT_EQ(cfg.mom.long_leg, Leg::bottom25);
    EXPECT_TRUE(cfg.tvl.subtract_rf);
}

TEST(Config, Defaults) {
    const auto cfg = parse_config("", ".");
    EXPECT_FALSE(cfg.k.has_value());
    EXPECT_EQ(cfg.kmax, 15);
    EXPECT_EQ(cfg.bootstrap.reps, 1000);
    EXPECT_EQ(cfg.bootstrap.block_len, 8);
    EXPECT_EQ(cfg.smb.long_leg, Leg::bottom25);
    EXPECT_TRUE(cfg.smb.subtract_rf);
    EXPECT_EQ(cfg.mom.signal_lag, 0);
    EXPECT_EQ(format_date(cfg.start), "2023-01-01");
    EXPECT_EQ(format_date(cfg.end), "2024-12-29");
    EXPECT_THROW((void)cfg.locator(ingest::SourceKind::tvl), ConfigError);
}

TEST(Config, Rejections) {
    EXPECT_THROW(parse_config("bootstrap.rep = 5\n", "."), ConfigError);
    EXPECT_THROW(parse_config("k = 3\nk = 4\n", "."), ConfigError);
    EXPECT_THROW(parse_config("kmax = ten\n", "."), ConfigError);
    EXPECT_THROW(parse_config("just a line\n", "."), ConfigError);
    EXPECT_THROW(parse_config("start = 2024-01-07\nend = 2023-01-01\n", "."), ConfigError);
    EXPECT_THROW(parse_config("factors = R_C, R_C\n", "."), ConfigError);
    EXPECT_THROW(parse_config("smb.long_leg = middle\n", "."), ConfigError);
    EXPECT_THROW(parse_config("source.weather = x.csv\n", "."), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError);
    try {
        parse_config("kmax = 4\n\nbogus = 1\n", ".", "run.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg:3"), std::string::npos) << e.what();
    }
}

TEST(Cli, EstimateBothWritesPremiaAndTable) {
    TempDir dir("cli_both");
    copy_fixture("sample", dir.path());
    ASSERT_EQ(cli(dir.path(), "ingest").code, 0);
    ASSERT_EQ(cli(dir.path(), "build-factors").code, 0);
    const auto r = cli(dir.path(), "estimate --method both -k 3");
    ASSERT_EQ(r.code, 0) << r.output;
    for (const char* f : {"premia_three_pass.csv", "premia_fama_macbeth.csv", "premia_table.md"}) {
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    }
    const auto tp = read_premia_csv(dir / "out/premia_three_pass.csv", Method::three_pass);
    EXPECT_EQ(tp.factor_names.size(), 22u);
    EXPECT_TRUE(std::isnan(tp.pvalues(0)));
    const auto fm = read_premia_csv(dir / "out/premia_fama_macbeth.csv", Method::fama_macbeth);
    EXPECT_FALSE(std::isnan(fm.pvalues(0)));
    const auto manifest = csv::read_text(dir / "out/manifest.json");
    EXPECT_NE(manifest.find("\"estimate\""), std::string::npos);
    EXPECT_NE(manifest.find("config_hash"), std::string::npos);
}

TEST(Cli, OfflineColdCacheNamesTheSource) {
    TempDir dir("cli_offline");
    copy_fixture("sample", dir.path());
    const auto r = cli(dir.path(), "--offline ingest");
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("ingest"), std::string::npos) << r.output;
    bool named = false;
    for (const char* s : {"prices", "market_caps", "tvl", "hacks_usd", "altseason_index",
                          "fear_greed_index", "cvx_level", "equity_factors", "equity_industries"}) {
        named = named || r.output.find(s) != std::string::npos;
    }
    EXPECT_TRUE(named) << r.output;
    EXPECT_FALSE(fs::exists(dir / "out/returns.csv"));
}

TEST(Cli, SelectKOnSyntheticThreeFactorPanel) {
    TempDir dir("cli_selectk");
    copy_fixture("synthetic3", dir.path());
    const auto r = cli(dir.path(), "select-k --kmax 15");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("selected k = 3"), std::string::npos) << r.output;
    const auto diag = csv::read(dir / "latent_diag.csv");
    EXPECT_EQ(diag.rows.size(), 15u);
    EXPECT_EQ(csv::read_text(dir / "selected_k.txt").substr(0, 1), "3");
}

TEST(Cli, ExitCodes) {
    TempDir dir("cli_codes");
    copy_fixture("synthetic3", dir.path());
    // config error
    write_file(dir / "bad.cfg", "kmax = many\n");
    EXPECT_EQ(cli(dir.path(), "-c bad.cfg select-k").code, 1);
    EXPECT_EQ(cli(dir.path(), "-c missing.cfg select-k").code, 1);
    // data error: no factors.csv yet
    auto r = cli(dir.path(), "estimate --method fama_macbeth");
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("estimate"), std::string::npos) << r.output;
    // numerical error: a constant observed factor cannot be mapped in pass 2
    const auto panel = load_panel(dir / "panel_returns.csv", dir / "panel_caps.csv");
    MatrixXd g(panel.periods(), 2);
    g.col(0).setLinSpaced(panel.periods(), -1.0, 1.0);
    g.col(1).setConstant(0.5);
    write_factors(factor_set(g, panel.time_index().front()), dir / "factors.csv");
    r = cli(dir.path(), "estimate --method three_pass -k 2");
    EXPECT_EQ(r.code, 3) << r.output;
}
