#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "oracles.hpp"
#include "varhardy/errors.hpp"
#include "varhardy/experiments.hpp"
#include "varhardy/varlp.hpp"

using namespace varhardy;

namespace {

TrialConfig config(int depth, ExponentLaw law, double lo, double hi, std::size_t trials,
                   std::uint64_t seed = 5) {
  TrialConfig c;
  c.seed = seed;
  c.trials = trials;
  c.space = {SpaceKind::Dyadic, depth, {}};
  c.exponent = {law, lo, hi};
  return c;
}

std::shared_ptr<const FilteredSpace> dyadic(int depth) {
  return std::make_shared<const FilteredSpace>(build_dyadic_space(depth));
}

}  // namespace

TEST(Generators, MartingaleInvariants) {
  const auto s = std::make_shared<const FilteredSpace>(build_tree_space(2, {0.2, 0.3, 0.5}));
  for (MartingaleLaw law : {MartingaleLaw::Normal, MartingaleLaw::Uniform, MartingaleLaw::TwoPoint}) {
    Rng rng(3);
    const Martingale f = generate_martingale(s, law, rng);
    EXPECT_TRUE(f.invariant_violation(1e-12).empty());
    EXPECT_EQ(f.level(0), Eigen::VectorXd::Zero(9));
    Rng again(3);
    EXPECT_EQ(generate_martingale(s, law, again).terminal(), f.terminal());
  }
}

TEST(Generators, ExponentLaws) {
  const FilteredSpace s = build_dyadic_space(2);
  Rng rng(1);
  EXPECT_EQ(generate_exponent(s, {ExponentLaw::TwoBlock, 1.0, 2.0}, rng).values(),
            Eigen::Vector4d(1, 1, 2, 2));
  EXPECT_EQ(generate_exponent(s, {ExponentLaw::Constant, 1.5, 1.5}, rng).values(),
            Eigen::Vector4d::Constant(1.5));
  const Exponent u = generate_exponent(s, {ExponentLaw::IidUniform, 1.1, 3.0}, rng);
  EXPECT_GE(u.p_minus(), 1.1);
  EXPECT_LE(u.p_plus(), 3.0);
  const TrialConfig c = config(3, ExponentLaw::IidUniform, 1.1, 3.0, 4);
  EXPECT_EQ(config_exponent(c, *build_space(c.space)).values(),
            config_exponent(c, *build_space(c.space)).values());
  EXPECT_EQ(trial_martingale(c, build_space(c.space), 2).terminal(),
            trial_martingale(c, build_space(c.space), 2).terminal());
}

TEST(Generators, ConfigValidationAndMatrix) {
  TrialConfig c = config(2, ExponentLaw::IidUniform, 1.1, 3.0, 0);
  EXPECT_THROW(validate_config(c), ValidationError);
  c.trials = 1;
  c.exponent.lo = 0.0;
  EXPECT_THROW(validate_config(c), ValidationError);
  c.exponent = {ExponentLaw::IidUniform, 3.0, 2.0};
  EXPECT_THROW(validate_config(c), ValidationError);
  EXPECT_EQ(default_matrix(1, 10).size(), 21u);
  EXPECT_EQ(default_matrix(1, 10, 4).size(), 15u);
}

TEST(Generators, PerturbedSpace) {
  const FilteredSpace s = build_dyadic_space(3);
  const auto moved = perturbed_space(s, 1e-6, 11);
  EXPECT_NEAR(moved->probs().sum(), 1.0, 1e-15);
  EXPECT_EQ(moved->levels(), s.levels());
  EXPECT_LE((moved->probs() - s.probs()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NE(moved->probs(), s.probs());
}

TEST(WeakType, FirstPassageGrid) {
  const Martingale f = martingale_from_terminal(dyadic(2), Eigen::Vector4d(1, 1, 3, 7));
  EXPECT_EQ(first_passage_grid(f), (std::vector<double>{1.5, 3, 4, 5, 6, 7}));
}

TEST(WeakType, RoundingNeighboursFormOneLevel) {
  const double x = 0.23732593863500642;
  const double y = std::nextafter(x, 1.0);
  const auto s = dyadic(1);
  const Martingale f(s, {Eigen::Vector2d::Zero(), Eigen::Vector2d(x, -y)});
  EXPECT_EQ(first_passage_grid(f), (std::vector<double>{0.5 * y, y}));
  const Exponent p = Exponent::constant(2, 2.0);
  for (double c : {10.0, 3.0, 1e5}) {
    const Martingale g(s, {Eigen::Vector2d::Zero(), Eigen::Vector2d(c * x, -c * y)});
    const std::vector<double> grid = first_passage_grid(f);
    std::vector<double> scaled_grid;
    for (double l : grid) scaled_grid.push_back(c * l);
    const std::vector<double> a = weak_type_check(f, p, grid).ratios;
    const std::vector<double> b = weak_type_check(g, p, scaled_grid).ratios;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      EXPECT_TRUE(a[i] == b[i] || oracle::rel_close(a[i], b[i], 1e-12)) << c << " " << i;
  }
}

TEST(WeakType, HandComputedRatio) {
  const Martingale f = martingale_from_terminal(dyadic(1), Eigen::Vector2d(1, -1));
  const ConstantReport r = weak_type_check(f, Exponent::constant(2, 2.0), std::vector<double>{0.5});
  ASSERT_EQ(r.ratios.size(), 1u);
  EXPECT_NEAR(r.ratios[0], 0.25, 1e-15);
  EXPECT_EQ(r.checks, 1u);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_THROW(weak_type_check(f, Exponent::constant(2, 2.0), std::vector<double>{0.0}), DomainError);
}

TEST(WeakType, MatchesDirectComputation) {
  const TrialConfig c = config(3, ExponentLaw::IidUniform, 0.6, 3.0, 20);
  const auto s = build_space(c.space);
  const Exponent p = config_exponent(c, *s);
  for (std::size_t t = 0; t < c.trials; ++t) {
    const Martingale f = trial_martingale(c, s, t);
    Eigen::VectorXd mf = Eigen::VectorXd::Zero(8);
    for (int n = 0; n <= f.depth(); ++n) mf = mf.cwiseMax(f.level(n).cwiseAbs());
    const std::vector<double> grid = first_passage_grid(f);
    const ConstantReport r = weak_type_check(f, p, grid);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      double pa = 0.0, integral = 0.0;
      for (int i = 0; i < 8; ++i) {
        if (mf[i] > grid[j]) pa += s->probs()[i];
        integral += s->probs()[i] * std::pow(std::abs(f.terminal()[i]) / grid[j], p[i]);
      }
      ASSERT_TRUE(oracle::rel_close(r.ratios[j], pa == 0.0 ? 0.0 : pa / integral, 1e-12));
    }
  }
}

TEST(WeakType, SweepHasNoViolations) {
  for (ExponentLaw law : {ExponentLaw::Constant, ExponentLaw::TwoBlock, ExponentLaw::IidUniform}) {
    const ConstantReport r = weak_type_sweep(config(4, law, 1.1, 3.0, 30));
    EXPECT_GT(r.checks, 0u);
    EXPECT_EQ(r.violations, 0u);
  }
}

TEST(Doob, ClassicalConstant) {
  const ConstantReport r = doob_strong_check(config(4, ExponentLaw::Constant, 2.0, 2.0, 50));
  EXPECT_EQ(r.ratios.size(), 50u);
  EXPECT_LE(r.max, 2.0);
  EXPECT_GE(r.max, 1.0);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_EQ(r.details["classical_bound"], 2.0);
  EXPECT_TRUE(r.details["perturbation"]["stable"].get<bool>());
}

TEST(Doob, RatiosMatchOracle) {
  const TrialConfig c = config(3, ExponentLaw::IidUniform, 1.2, 2.5, 10);
  const ConstantReport r = doob_strong_check(c, 0.0);
  const auto s = build_space(c.space);
  const Exponent p = config_exponent(c, *s);
  for (std::size_t t = 0; t < c.trials; ++t) {
    const Martingale f = trial_martingale(c, s, t);
    Eigen::VectorXd mf = Eigen::VectorXd::Zero(8);
    for (int n = 0; n <= f.depth(); ++n) mf = mf.cwiseMax(f.level(n).cwiseAbs());
    const double expected = oracle::luxemburg(s->probs(), mf, p.values()) /
                            oracle::luxemburg(s->probs(), f.terminal(), p.values());
    ASSERT_TRUE(oracle::rel_close(r.ratios[t], expected, 1e-9));
  }
}

TEST(Doob, RequiresPMinusAboveOne) {
  EXPECT_THROW(doob_strong_check(config(2, ExponentLaw::TwoBlock, 1.0, 2.0, 5)), DomainError);
  EXPECT_THROW(doob_strong_check(config(2, ExponentLaw::Constant, 0.8, 0.8, 5)), DomainError);
}

TEST(BlockInequality, HandExample) {
  const FilteredSpace s = build_dyadic_space(1);
  const ConstantReport r = lemma34_check(s, Eigen::Vector2d(0.25, 0.25), Exponent::constant(2, 2.0));
  // K = 1, avg = 1/4, avg |f|^1 = 1/4: ratio (1/4) / (1/4 + 1).
  EXPECT_NEAR(r.max, 0.2, 1e-15);
  EXPECT_EQ(r.details["rescale"], 1.0);
  EXPECT_EQ(r.violations, 0u);
}

TEST(BlockInequality, SweepHasNoViolations) {
  for (int depth : {2, 4}) {
    for (ExponentLaw law : {ExponentLaw::Constant, ExponentLaw::TwoBlock, ExponentLaw::IidUniform}) {
      const ConstantReport r = lemma34_sweep(config(depth, law, 1.1, 3.0, 40));
      EXPECT_GT(r.checks, 0u);
      EXPECT_EQ(r.violations, 0u);
      EXPECT_LE(r.max, 1.0);
    }
  }
}

TEST(JohnNirenberg, ConstantOneIsIdentity) {
  const ConstantReport r = jn_equivalence(config(2, ExponentLaw::Constant, 1.0, 1.0, 20));
  for (double x : r.ratios) EXPECT_NEAR(x, 1.0, 1e-12);
  EXPECT_EQ(r.violations, 0u);
}

TEST(JohnNirenberg, TwoBlockEnvelope) {
  JnOptions opts;
  opts.refinement = true;
  opts.perturbation = true;
  const ConstantReport r = jn_equivalence(config(2, ExponentLaw::TwoBlock, 1.0, 2.0, 60), opts);
  EXPECT_EQ(r.ratios.size() + r.skipped, 60u);
  const double env = r.details["envelope"].get<double>();
  EXPECT_TRUE(std::isfinite(env));
  EXPECT_GE(env, 1.0);
  EXPECT_LE(r.details["down_max"].get<double>(), r.details["down_bound"].get<double>() * (1 + 1e-9));
  EXPECT_EQ(r.details["candidates"], 26u);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_TRUE(r.details["refinement"]["stable"].get<bool>());
  EXPECT_TRUE(r.details["perturbation"]["stable"].get<bool>());
}

TEST(JohnNirenberg, DownBoundMatchesOracle) {
  // max over nonempty S of ||chi_S||_p ||chi_S||_p' / P(S) with p = (1, 1, 2, 2).
  const ConstantReport r = jn_equivalence(config(2, ExponentLaw::TwoBlock, 1.0, 2.0, 2));
  const Eigen::Vector4d probs = Eigen::Vector4d::Constant(0.25);
  const Eigen::Vector4d p(1, 1, 2, 2);
  double best = 0.0;
  for (int mask = 1; mask < 16; ++mask) {
    Eigen::Vector4d chi = Eigen::Vector4d::Zero();
    bool has_one = false;
    for (int i = 0; i < 4; ++i) {
      if (mask >> i & 1) {
        chi[i] = 1.0;
        has_one = has_one || i < 2;
      }
    }
    const double ps = probs.dot(chi);
    const double np = oracle::luxemburg(probs, chi, p);
    // p' = inf on leaves 0, 1 and 2 on leaves 2, 3; the mixed norm of an indicator
    // touching the inf part is 1.
    double nq = 1.0;
    if (!has_one) nq = std::sqrt(ps);
    best = std::max(best, np * nq / ps);
  }
  EXPECT_NEAR(r.details["down_bound"].get<double>(), 2.0 * best, 1e-10);
}

TEST(JohnNirenberg, RejectsSubOneExponent) {
  EXPECT_THROW(jn_equivalence(config(2, ExponentLaw::Constant, 0.5, 0.5, 2)), DomainError);
}

TEST(ExpJohnNirenberg, CurveProperties) {
  const TrialConfig c = config(3, ExponentLaw::IidUniform, 1.1, 3.0, 1);
  const auto s = build_space(c.space);
  const Exponent p = config_exponent(c, *s);
  const Martingale f = trial_martingale(c, s, 0);
  const ConstantReport r = exp_jn_curve(f, p);
  ASSERT_EQ(r.curve.size(), 41u);
  EXPECT_EQ(r.curve.front().second, 1.0);
  EXPECT_EQ(r.curve.back().second, 0.0);
  for (std::size_t j = 1; j < r.curve.size(); ++j) EXPECT_LE(r.curve[j].second, r.curve[j - 1].second);
  EXPECT_EQ(r.violations, 0u);
  const double chat = r.details["c_hat"].get<double>();
  EXPECT_NEAR(r.details["c2"].get<double>(), std::numbers::ln2 / (2 * chat), 1e-15);
  EXPECT_GE(r.details["c2_fit"].get<double>(), r.details["c2"].get<double>() * (1 - 1e-9));
  EXPECT_EQ(r.details["bmo1"].get<double>(),
            bmo_norm(f, Exponent::constant(8, 1.0)).value);
}

TEST(ExpJohnNirenberg, RejectsBadInput) {
  const auto s = dyadic(1);
  const Exponent p = Exponent::constant(2, 2.0);
  EXPECT_THROW(exp_jn_curve(martingale_from_terminal(s, Eigen::Vector2d::Zero()), p), DomainError);
  const Martingale f = martingale_from_terminal(s, Eigen::Vector2d(1, -1));
  EXPECT_THROW(exp_jn_curve(f, p, std::vector<double>{1.0, 0.5}), ValidationError);
}

TEST(ExpJohnNirenberg, SweepHasNoViolations) {
  const ConstantReport r = exp_jn_sweep(config(2, ExponentLaw::TwoBlock, 1.1, 3.0, 20));
  EXPECT_EQ(r.violations, 0u);
  EXPECT_GT(r.details["c2_fit_min"].get<double>(), 0.0);
}

TEST(Nakai, HValues) {
  const double c1 = 1.0 / (std::numbers::ln2 + 1.0);
  const double c2 = 1.0 / (2.0 * std::numbers::ln2 + 1.0);
  EXPECT_NEAR(nakai_h(1), c1 - c2, 1e-15);
  EXPECT_NEAR(nakai_h(1), 0.171556, 1e-6);
  for (int m = 1; m <= 20; ++m) {
    const double inc = nakai_h(m + 1) - nakai_h(m);
    EXPECT_GT(inc, 0.0);
    EXPECT_LE(inc, 2.0 / ((m + 1) * std::numbers::ln2));
  }
}

TEST(Nakai, SpineSpace) {
  const auto s = spine_space(4);
  EXPECT_EQ(s->leaf_count(), 5);
  EXPECT_EQ(s->probs(), (Eigen::VectorXd(5) << 0.5, 0.25, 0.125, 0.0625, 0.0625).finished());
  EXPECT_EQ(s->level(2), (Partition{{0}, {1}, {2, 3, 4}}));
  EXPECT_THROW(spine_space(0), DomainError);
}

TEST(Nakai, LowerBounds) {
  const ConstantReport r = nakai_sadasue(20);
  ASSERT_EQ(r.ratios.size(), 20u);
  for (int n = 1; n <= 20; ++n) EXPECT_GE(r.ratios[n - 1], std::pow(2.0, 0.5 * n) * (1 - 1e-12));
  EXPECT_GE(r.ratios[9], 32.0);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_NEAR(r.details["h_1"].get<double>(), nakai_h(1), 1e-15);
  EXPECT_THROW(nakai_sadasue(0), DomainError);
  EXPECT_THROW(nakai_sadasue(31), DomainError);
}

TEST(Nakai, RatioMatchesBlockExtremes) {
  const ConstantReport r = nakai_sadasue(10);
  for (const Json& row : r.details["per_n"]) {
    const int n = row["N"];
    const double gy = row["g_y"], gz = row["g_z"];
    EXPECT_GE(gy, 0.5);
    EXPECT_LE(gz, 0.0);
    // P(B_N) = 2^-N and g_+ - g_- >= 1/2 on B_N.
    EXPECT_GE(row["ratio"].get<double>(), std::pow(2.0, n * (gy - gz)) * (1 - 1e-12));
  }
}

TEST(ConditionalJensen, DeterministicFamily) {
  const ConstantReport r = violation_33_search(config(2, ExponentLaw::IidUniform, 1.1, 3.0, 10));
  ASSERT_GE(r.ratios.size(), 3u);
  EXPECT_TRUE(oracle::rel_close(r.ratios[0], 4.0, 1e-12));
  EXPECT_TRUE(oracle::rel_close(r.ratios[1], 50.0, 1e-12));
  EXPECT_TRUE(oracle::rel_close(r.ratios[2], 5000.0, 1e-12));
  EXPECT_EQ(r.violations, 0u);
  const Violation33 v =
      violation_33_ratio(build_dyadic_space(1), Eigen::Vector2d(8, 0), Exponent(Eigen::Vector2d(1, 2)));
  EXPECT_EQ(v.level, 0);
  EXPECT_EQ(v.leaf, 1);
}

TEST(Decomposition, SweepHasNoViolations) {
  const ConstantReport r = decomposition_sweep(config(3, ExponentLaw::IidUniform, 0.5, 2.0, 30));
  EXPECT_EQ(r.violations, 0u);
  EXPECT_GT(r.details["atoms"].get<std::size_t>(), 0u);
}

TEST(Reports, SummaryAndCsv) {
  ConstantReport r;
  r.ratios = {3, 1, 2, 4};
  summarize(r);
  EXPECT_EQ(r.max, 4.0);
  EXPECT_EQ(r.mean, 2.5);
  ASSERT_EQ(r.quantiles.size(), 3u);
  EXPECT_EQ(r.quantiles[0].value, 2.0);
  EXPECT_EQ(r.quantiles[1].value, 4.0);
  EXPECT_EQ(report_to_csv(r), "index,ratio\n0,3\n1,1\n2,2\n3,4\n");
  r.curve = {{0.5, 0.25}};
  EXPECT_EQ(report_to_csv(r), "x,y\n0.5,0.25\n");
}

TEST(Reports, WitnessesReplay) {
  std::vector<ConstantReport> reports;
  reports.push_back(weak_type_sweep(config(3, ExponentLaw::IidUniform, 1.1, 3.0, 10)));
  reports.push_back(doob_strong_check(config(3, ExponentLaw::IidUniform, 1.1, 3.0, 10)));
  reports.push_back(lemma34_sweep(config(3, ExponentLaw::TwoBlock, 1.1, 3.0, 10)));
  reports.push_back(jn_equivalence(config(2, ExponentLaw::IidUniform, 1.0, 3.0, 10)));
  reports.push_back(exp_jn_sweep(config(2, ExponentLaw::IidUniform, 1.1, 3.0, 5)));
  reports.push_back(nakai_sadasue(8));
  reports.push_back(violation_33_search(config(2, ExponentLaw::IidUniform, 1.1, 3.0, 5)));
  reports.push_back(decomposition_sweep(config(3, ExponentLaw::IidUniform, 0.5, 2.0, 10)));
  for (const ConstantReport& r : reports) {
    const Json w = Json::parse(report_to_json(r)["witness"].dump());
    EXPECT_TRUE(oracle::rel_close(replay_witness(w), r.max, 1e-9)) << r.quantity;
  }
  EXPECT_THROW(replay_witness(Json{{"kind", "nope"}, {"space", {}}}), ValidationError);
  EXPECT_THROW(replay_witness(Json::object()), ValidationError);
}

TEST(Reports, Deterministic) {
  const TrialConfig c = config(3, ExponentLaw::IidUniform, 1.1, 3.0, 10, 99);
  EXPECT_EQ(report_to_json(doob_strong_check(c)).dump(), report_to_json(doob_strong_check(c)).dump());
  EXPECT_EQ(report_to_json(weak_type_sweep(c)).dump(), report_to_json(weak_type_sweep(c)).dump());
  EXPECT_EQ(report_to_json(exp_jn_sweep(config(2, ExponentLaw::IidUniform, 1.1, 3.0, 3))).dump(),
            report_to_json(exp_jn_sweep(config(2, ExponentLaw::IidUniform, 1.1, 3.0, 3))).dump());
  TrialConfig other = c;
  other.seed = 100;
  EXPECT_NE(report_to_json(doob_strong_check(c)).dump(),
            report_to_json(doob_strong_check(other)).dump());
}
