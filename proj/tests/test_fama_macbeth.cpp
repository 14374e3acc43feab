#include <gtest/gtest.h>

#include "support.hpp"

using namespace cryptoprem;
using namespace testing_support;

namespace {

sim::ObservedEconomy economy(std::uint64_t seed, Index N = 25, Index T = 300) {
    sim::ObservedEconomySpec spec;
    spec.assets = N;
    spec.periods = T;
    spec.lambda = Eigen::Vector2d(0.4, -0.2);
    spec.seed = seed;
    return sim::simulate_observed_economy(spec);
}

}  // namespace

TEST(TsBetas, ExactSingleFactorFit) {
    std::mt19937_64 gen(1);
    const MatrixXd g = normal_matrix(30, 1, gen);
    const auto b = ts_betas(make_panel(2.0 * g.replicate(1, 4)), factor_set(g));
    for (Index i = 0; i < 4; ++i) {
        EXPECT_NEAR(b.betas(i, 0), 2.0, 1e-12);
        EXPECT_NEAR(b.intercepts(i), 0.0, 1e-12);
        EXPECT_EQ(b.obs_count[static_cast<std::size_t>(i)], 30);
    }
}

TEST(TsBetas, ShortHistoryExcludedAndListed) {
    std::mt19937_64 gen(2);
    const Index T = 40;
    const MatrixXd g = normal_matrix(T, 8, gen);
    const MatrixXd r = normal_matrix(T, 12, gen);
    Mask m = Mask::Constant(T, 12, true);
    m.col(5).setConstant(false);
    m.col(5).head(3).setConstant(true);
    const auto panel = make_panel(r, m);
    const auto b = ts_betas(panel, factor_set(g));
    ASSERT_EQ(b.excluded.size(), 1u);
    EXPECT_EQ(b.excluded[0], panel.asset_ids()[5]);
    EXPECT_EQ(b.betas.rows(), 11);
    EXPECT_EQ(std::count(b.asset_index.begin(), b.asset_index.end(), 5), 0);
}

TEST(TsBetas, AllExcludedIsDataError) {
    std::mt19937_64 gen(3);
    Mask m = Mask::Constant(20, 3, false);
    m.topRows(4).setConstant(true);
    EXPECT_THROW(ts_betas(make_panel(normal_matrix(20, 3, gen), m), factor_set(normal_matrix(20, 4, gen))),
                 DataError);
}

TEST(TsBetas, RecoversSimulatedBetas) {
    const auto e = economy(4, 25, 2000);
    const auto b = ts_betas(e.panel, e.factors);
    // beta standard error is noise_sd / (factor_sd sqrt(T)) ~ 0.022
    EXPECT_LT((b.betas - e.betas).cwiseAbs().maxCoeff(), 0.1);
}

TEST(CsPremia, BalancedPanelMatchesOneShotRegression) {
    const auto e = economy(5);
    const auto b = ts_betas(e.panel, e.factors);
    const auto fm = cs_premia(b, e.panel);
    const VectorXd rbar = e.panel.returns().colwise().mean().transpose();
    const VectorXd coef = normal_equations(add_constant(b.betas), rbar);
    EXPECT_LT((fm.lambda_mean - coef.tail(2)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(fm.weeks_used, 300);
    EXPECT_TRUE(fm.skipped_weeks.empty());
}

TEST(CsPremia, ShankenMultiplierIdentity) {
    const auto e = economy(6);
    const auto b = ts_betas(e.panel, e.factors);
    const auto fm = cs_premia(b, e.panel);
    // independent route: explicit inverse of the n-1 factor covariance
    const MatrixXd f = e.factors.values.rowwise() - e.factors.values.colwise().mean();
    const MatrixXd sigma = f.transpose() * f / (f.rows() - 1.0);
    const double c = fm.lambda_mean.dot(sigma.inverse() * fm.lambda_mean);
    EXPECT_NEAR(fm.shanken_multiplier, 1.0 + c, 1e-12);
    for (Index j = 0; j < 2; ++j) {
        const double add = sigma(j, j) / 300.0;
        const double want = std::sqrt((1.0 + c) * (fm.se_fm(j) * fm.se_fm(j) - add) + add);
        EXPECT_NEAR(fm.se_shanken(j), want, 1e-12);
        EXPECT_GE(fm.se_shanken(j), fm.se_fm(j));
        EXPECT_NEAR(fm.pvalues(j), std::erfc(std::abs(fm.lambda_mean(j) / want) / std::sqrt(2.0)), 1e-12);
    }
}

TEST(CsPremia, SeFmIsTimeSeriesStandardError) {
    const auto e = economy(7);
    const auto fm = run_fama_macbeth(e.panel, e.factors);
    for (Index j = 0; j < 2; ++j) {
        const VectorXd x = fm.lambda_t.col(j);
        const double m = x.mean();
        const double sd = std::sqrt((x.array() - m).square().sum() / (x.size() - 1.0));
        EXPECT_NEAR(fm.se_fm(j), sd / std::sqrt(300.0), 1e-12);
        EXPECT_NEAR(fm.lambda_mean(j), m, 1e-12);
    }
}

TEST(CsPremia, MultiplierIsOneExactlyWhenPremiaVanish) {
    auto e = economy(8);
    // equalize every asset's mean return: the cross-sectional slope is then 0
    MatrixXd r = e.panel.returns();
    r = (r.rowwise() - r.colwise().mean()).array() + 0.25;
    const auto fm = run_fama_macbeth(make_panel(r), e.factors);
    EXPECT_LT(fm.lambda_mean.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(fm.shanken_multiplier, 1.0, 1e-20);
    for (int seed = 9; seed < 29; ++seed) {
        EXPECT_GT(run_fama_macbeth(economy(static_cast<std::uint64_t>(seed), 12, 60).panel,
                                   economy(static_cast<std::uint64_t>(seed), 12, 60).factors)
                      .shanken_multiplier,
                  1.0);
    }
}

TEST(CsPremia, RescalingAFactor) {
    const auto e = economy(30);
    const auto base_b = ts_betas(e.panel, e.factors);
    const auto base = cs_premia(base_b, e.panel);
    auto G = e.factors;
    const double c = 4.0;
    G.values.col(1) *= c;
    const auto b = ts_betas(e.panel, G);
    const auto fm = cs_premia(b, e.panel);
    EXPECT_LT((b.betas.col(1) - base_b.betas.col(1) / c).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(fm.lambda_mean(1), c * base.lambda_mean(1), 1e-10);
    EXPECT_NEAR(fm.lambda_mean(0), base.lambda_mean(0), 1e-10);
    EXPECT_LT((fm.pvalues - base.pvalues).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CsPremia, ThinWeekSkippedAndReported) {
    auto e = economy(31, 10, 50);
    Mask m = Mask::Constant(50, 10, true);
    m.row(7).tail(7).setConstant(false);  // 3 assets left for 2 factors + intercept
    const auto panel = make_panel(e.panel.returns(), m);
    const auto fm = run_fama_macbeth(panel, e.factors);
    ASSERT_EQ(fm.skipped_weeks.size(), 1u);
    EXPECT_EQ(fm.skipped_weeks[0], panel.time_index()[7]);
    EXPECT_EQ(fm.weeks_used, 49);
    EXPECT_TRUE(std::isnan(fm.lambda_t(7, 0)));
    const auto est = to_estimate(fm);
    EXPECT_EQ(est.method, Method::fama_macbeth);
    ASSERT_EQ(est.warnings.size(), 1u);
}

TEST(CsPremia, TooFewAssets) {
    auto e = economy(32, 3, 40);
    EXPECT_THROW(run_fama_macbeth(e.panel, e.factors), DataError);
}
