#include <gtest/gtest.h>

#include "properties.hpp"

using namespace cryptoprem;
using namespace testing_support;

namespace {

SeriesFrame zeros(Index T) { return frame(std::vector<double>(static_cast<std::size_t>(T), 0.0), "rf"); }

}  // namespace

TEST(MarketFactor, SingleAssetEqualsItsExcessReturn) {
    const auto p = make_panel((MatrixXd(3, 1) << 1.0, 2.0, -3.0).finished());
    const auto rf = frame({0.1, 0.1, 0.2}, "rf");
    const auto m = market_factor(p, rf);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_DOUBLE_EQ(m.values[0], 1.9);
    EXPECT_DOUBLE_EQ(m.values[1], -3.2);
    EXPECT_EQ(m.time_index[0], p.time_index()[1]);
}

TEST(MarketFactor, TwoAssetArithmetic) {
    MatrixXd r(2, 2), c(2, 2);
    r << 0, 0, 4, 0;
    c << 75, 25, 80, 20;
    const auto m = market_factor(make_panel(r, {}, c), zeros(2));
    EXPECT_DOUBLE_EQ(m.values[0], 3.0);
}

TEST(MarketFactor, UsesOnlyAssetsObservedNowWithLaggedCap) {
    MatrixXd r(2, 3), c(2, 3);
    r << 0, 0, 0, 4, 8, 100;
    c << 75, 25, kNaN, 1, 1, 1;
    Mask m = Mask::Constant(2, 3, true);
    const auto f = market_factor(make_panel(r, m, c), zeros(2));
    EXPECT_DOUBLE_EQ(f.values[0], 0.75 * 4 + 0.25 * 8);
}

TEST(MarketFactor, NoLaggedCapIsAnError) {
    MatrixXd c = MatrixXd::Constant(2, 1, kNaN);
    EXPECT_THROW(market_factor(make_panel(MatrixXd::Ones(2, 1), {}, c), zeros(2)), DataError);
}

TEST(MarketFactor, InvariantToCapScale) {
    std::mt19937_64 gen(3);
    for (int rep = 0; rep < 50; ++rep) {
        const auto p = random_panel(gen, {4, 12, 2, 10, 0.1, 0.0});
        const auto q = ReturnPanel(p.time_index(), p.asset_ids(), p.returns(), p.observed(),
                                   p.market_caps() * 37.5);
        const auto a = market_factor(p, zeros(p.periods()));
        const auto b = market_factor(q, zeros(p.periods()));
        for (std::size_t t = 0; t < a.size(); ++t) EXPECT_NEAR(a.values[t], b.values[t], 1e-12);
    }
}

TEST(LongShort, FourAssetSingleQuartiles) {
    MatrixXd r(2, 4), s(2, 4);
    r << 0, 0, 0, 0, 10, 0, 0, 2;
    s << 1, 2, 3, 4, 0, 0, 0, 0;
    SortSpec spec{"x", 1, Leg::top25, Weighting::equal, false, 1};
    const auto f = long_short(make_panel(r), s, spec);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_DOUBLE_EQ(f.values[0], 2.0 - 10.0);
}

TEST(LongShort, IdenticalReturnsGiveZeroOrMinusRf) {
    MatrixXd r = MatrixXd::Constant(3, 8, 1.7);
    std::mt19937_64 gen(1);
    const MatrixXd s = normal_matrix(3, 8, gen);
    const auto rf = frame({0.1, 0.2, 0.3}, "rf");
    SortSpec spec{"x", 1, Leg::bottom25, Weighting::value, false, 1};
    auto f = long_short(make_panel(r), s, spec);
    for (double v : f.values) EXPECT_NEAR(v, 0.0, 1e-14);
    spec.subtract_rf = true;
    f = long_short(make_panel(r), s, spec, &rf);
    EXPECT_NEAR(f.values[0], -0.2, 1e-14);
    EXPECT_NEAR(f.values[1], -0.3, 1e-14);
}

TEST(LongShort, QuartileSizeIsFloorAndTiesBreakById) {
    // 9 eligible assets: floor(9/4) = 2 per leg. Signals tie in pairs.
    MatrixXd r(2, 9), s(2, 9);
    r.row(0).setZero();
    r.row(1) << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    s.row(0) << 1, 1, 2, 2, 3, 3, 4, 4, 4;
    s.row(1).setZero();
    const auto p = make_panel(r);
    SortSpec spec{"x", 1, Leg::top25, Weighting::equal, false, 1};
    const auto legs = quartile_legs(p, s, spec, 1);
    EXPECT_EQ(legs.short_leg.assets, (std::vector<Index>{0, 1}));
    EXPECT_EQ(legs.long_leg.assets, (std::vector<Index>{7, 8}));
}

TEST(LongShort, ValueWeightsUseLaggedCaps) {
    MatrixXd r(2, 4), s(2, 4), c(2, 4);
    r << 0, 0, 0, 0, 1, 3, 5, 7;
    s << 4, 3, 2, 1, 0, 0, 0, 0;  // asset 0 top, asset 3 bottom
    c << 1, 1, 1, 1, 9, 9, 9, 9;
    SortSpec spec{"x", 1, Leg::top25, Weighting::value, false, 1};
    EXPECT_DOUBLE_EQ(long_short(make_panel(r, {}, c), s, spec).values[0], 1.0 - 7.0);
}

TEST(LongShort, FewerThanFourEligibleIsAnError) {
    MatrixXd r = MatrixXd::Ones(3, 4);
    MatrixXd s = MatrixXd::Ones(3, 4);
    s(1, 2) = kNaN;
    SortSpec spec{"x", 1, Leg::top25, Weighting::equal, false, 1};
    EXPECT_THROW(long_short(make_panel(r), s, spec), DataError);
}

TEST(MomentumSignal, ConstantOnePercent) {
    const auto p = make_panel(MatrixXd::Constant(8, 2, 1.0));
    const auto s = momentum_signal(p);
    EXPECT_TRUE(std::isnan(s(4, 0)));
    EXPECT_NEAR(s(5, 0), (std::pow(1.01, 5) - 1) * 100, 1e-12);
    EXPECT_NEAR(s(5, 0), 5.101, 5e-4);
}

TEST(MomentumSignal, MissingWeekMasksAndZeroReturnsGiveZero) {
    Mask m = Mask::Constant(8, 1, true);
    m(3, 0) = false;
    const auto p = make_panel(MatrixXd::Zero(8, 1), m);
    const auto s = momentum_signal(p);
    for (Index t = 4; t <= 8 - 1; ++t) {
        if (t - 5 <= 3 && 3 <= t - 1) EXPECT_TRUE(std::isnan(s(t, 0))) << t;
    }
    const auto z = momentum_signal(make_panel(MatrixXd::Zero(8, 1)));
    EXPECT_EQ(z(7, 0), 0.0);
}

TEST(Orthogonalize, UncorrelatedInputUnchanged) {
    const auto y = frame({1, 2, 3});
    const auto x = frame({1, 0, 1});
    const auto out = orthogonalize(y, x);
    for (int t = 0; t < 3; ++t) EXPECT_NEAR(out.values[t], y.values[t], 1e-10);
}

TEST(Orthogonalize, CollinearSeriesCollapsesToMean) {
    const auto x = frame({1, 4, 2, 8, 5});
    auto y = x;
    for (auto& v : y.values) v *= 2;
    const auto out = orthogonalize(y, x);
    for (double v : out.values) EXPECT_NEAR(v, 8.0, 1e-12);
}

TEST(Orthogonalize, MatchesHandOls) {
    const std::vector<double> y = {2, -1, 4, 0, 3, 5}, x = {1, 3, 0, 2, 2, -1};
    MatrixXd X(6, 2);
    VectorXd Y(6);
    for (int t = 0; t < 6; ++t) { X(t, 0) = 1; X(t, 1) = x[t]; Y(t) = y[t]; }
    const VectorXd b = normal_equations(X, Y);
    const VectorXd resid = Y - X * b;
    const double my = Y.mean();
    const auto out = orthogonalize(frame(y), frame(x));
    for (int t = 0; t < 6; ++t) EXPECT_NEAR(out.values[t], my + resid(t), 1e-12);
}

TEST(Orthogonalize, ZeroVarianceOntoThrows) {
    EXPECT_THROW(orthogonalize(frame({1, 2, 3}), frame({4, 4, 4})), NumericalError);
}

TEST(Ar1Residual, ExactAr1HasZeroResiduals) {
    std::vector<double> x = {64};
    for (int t = 1; t < 12; ++t) x.push_back(0.5 * x.back());
    const auto e = ar1_residual(frame(x));
    ASSERT_EQ(e.size(), 11u);
    for (double v : e.values) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(Ar1Residual, AlternatingSeries) {
    // {1,2,1,2,...}: x_t = 3 - x_{t-1} exactly, so rho = -1 and residuals vanish.
    std::vector<double> x;
    for (int t = 0; t < 10; ++t) x.push_back(t % 2 ? 2.0 : 1.0);
    const auto e = ar1_residual(frame(x));
    for (double v : e.values) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Ar1Residual, ZeroAutocorrelationGivesDemeanedTail) {
    // lag {1,-1,-1,1} and current {-1,-1,1,1} both have mean 0 and cross
    // product -1+1-1+1 = 0, so rho = 0 and a = 0.
    const std::vector<double> x = {1, -1, -1, 1, 1};
    const auto e = ar1_residual(frame(x));
    const std::vector<double> expect = {-1, -1, 1, 1};
    ASSERT_EQ(e.size(), 4u);
    for (int t = 0; t < 4; ++t) EXPECT_NEAR(e.values[t], expect[t], 1e-10);
    EXPECT_EQ(e.time_index.front(), add_weeks(parse_date("2023-01-01"), 1));
}

TEST(Ar1Residual, ZeroVarianceAndShortInput) {
    EXPECT_THROW(ar1_residual(frame({3, 3, 3, 3, 3})), NumericalError);
    EXPECT_THROW(ar1_residual(frame({1, 2, 3})), DataError);
}

TEST(Nontradables, LevelsBeforeResidualization) {
    const auto hacks = frame({1e7, 0, 2e7, 0, 0, 5e6}, "h");
    const auto total = frame(std::vector<double>(6, 1e12), "m");
    const auto flat = frame(std::vector<double>(6, 50.0), "fg");
    const auto alt = frame({40, 44, 33, 33, 66, 60}, "a");
    const auto cvx = frame({60, 62, 61, 65, 59, 58}, "c");
    const auto lv = nontradable_levels(hacks, total, alt, flat, cvx);
    EXPECT_DOUBLE_EQ(lv[0].values[0], 1e-5);
    EXPECT_EQ(lv[0].name, "Hacks");
    for (double v : lv[2].values) EXPECT_EQ(v, 0.0);
    EXPECT_NEAR(lv[1].values[0], 10.0, 1e-12);
    EXPECT_NEAR(lv[1].values[1], -25.0, 1e-12);
    EXPECT_EQ(lv[3].values, cvx.values);
    EXPECT_EQ(lv[3].unit, Unit::level);
}

TEST(Nontradables, ShocksAreAr1ResidualsOnCommonWeeks) {
    std::mt19937_64 gen(6);
    std::vector<double> h(20), m(20, 1e12), a(20), f(20), c(20);
    for (int t = 0; t < 20; ++t) {
        h[t] = std::abs(normal_matrix(1, 1, gen)(0, 0)) * 1e7;
        a[t] = 50 + normal_matrix(1, 1, gen)(0, 0) * 5;
        f[t] = 50 + normal_matrix(1, 1, gen)(0, 0) * 5;
        c[t] = 60 + normal_matrix(1, 1, gen)(0, 0);
    }
    const auto G = nontradable_shocks(frame(h), frame(m), frame(a), frame(f), frame(c));
    EXPECT_EQ(G.names, (std::vector<std::string>{"Hacks", "Altseason", "FearGreed", "CVX"}));
    EXPECT_EQ(G.periods(), 18);  // percent change and AR(1) each drop a week
    const auto cvx_resid = ar1_residual(frame(c));
    EXPECT_NEAR(G.values(17, 3), cvx_resid.values.back(), 1e-12);
    for (auto k : G.kinds) EXPECT_EQ(k, FactorKind::nontradable);
}

TEST(Nontradables, ZeroDenominators) {
    const auto ok = frame({1, 2, 3, 4, 5, 6});
    EXPECT_THROW(nontradable_levels(ok, frame({1, 0, 1, 1, 1, 1}), ok, ok, ok), DataError);
    EXPECT_THROW(nontradable_levels(ok, ok, frame({1, 0, 1, 1, 1, 1}), ok, ok), DataError);
}

TEST(FactorsCsv, RoundTripWithMetadataRow) {
    TempDir dir("factors");
    auto G = factor_set((MatrixXd(3, 2) << 0.1, 1e-7, -2.5, 3, 4, 0).finished());
    G.kinds[1] = FactorKind::nontradable;
    G.units[1] = Unit::ratio;
    write_factors(G, dir / "f.csv");
    const auto H = read_factors(dir / "f.csv");
    EXPECT_EQ(H.names, G.names);
    EXPECT_EQ(H.kinds, G.kinds);
    EXPECT_EQ(H.units, G.units);
    EXPECT_EQ(H.values, G.values);
    const auto text = csv::read_text(dir / "f.csv");
    EXPECT_EQ(text.substr(0, text.find("\n2023")), "date,g1,g2\n#meta,tradable:percent,nontradable:ratio");
}

// Property suites at reduced size; the acceptance binary runs 1000 cases.
TEST(FactorProperties, WeightsSumToOne) {
    const auto r = check_weight_normalization(101, 200);
    EXPECT_GT(r.legs_checked, 1000);
    EXPECT_LT(r.worst_sum_error, 1e-12);
    EXPECT_GE(r.min_weight, 0.0);
}

TEST(FactorProperties, LongShortRankInvariant) { EXPECT_EQ(check_rank_invariance(102, 200), 0.0); }

TEST(FactorProperties, OrthogonalizeOutput) {
    const auto r = check_orthogonalize(103, 200);
    EXPECT_LT(r.worst_corr, 1e-8);
    EXPECT_LT(r.worst_mean_shift, 1e-12);
}

TEST(FactorProperties, Ar1LagOrthogonality) { EXPECT_LT(check_ar1_orthogonality(104, 200), 1e-8); }
