#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "varhardy/errors.hpp"
#include "varhardy/hardy.hpp"
#include "varhardy/rng.hpp"
#include "varhardy/varlp.hpp"

using namespace varhardy;

namespace {

std::shared_ptr<const FilteredSpace> dyadic(int depth) {
  return std::make_shared<const FilteredSpace>(build_dyadic_space(depth));
}

Martingale centered(Rng& rng, std::shared_ptr<const FilteredSpace> space, int law) {
  Eigen::VectorXd f(space->leaf_count());
  for (Eigen::Index i = 0; i < f.size(); ++i)
    f[i] = law == 0 ? rng.normal() : (law == 1 ? rng.uniform(-1, 1) : (rng.below(2) ? 1.0 : -1.0));
  f.array() -= space->probs().dot(f);
  Martingale m = martingale_from_terminal(space, f);
  std::vector<RandomVariable> levels = m.levels();
  levels[0].setZero();
  return Martingale(space, levels);
}

Exponent exponent_of(Rng& rng, Eigen::Index n, int family) {
  if (family == 0) return Exponent::constant(n, 2.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = family == 1 ? (i < n / 2 ? 1.1 : 3.0) : rng.uniform(1.1, 3.0);
  return Exponent(v);
}

const Eigen::Vector2d kAtom(2.0 / 3.0, -2.0 / 3.0);

}  // namespace

TEST(HardyNorms, Examples) {
  const auto one = dyadic(1);
  const Martingale zero = martingale_from_terminal(one, Eigen::Vector2d(0, 0));
  const Martingale f = martingale_from_terminal(one, Eigen::Vector2d(1, -1));
  const Exponent p(Eigen::Vector2d(1, 2));
  EXPECT_EQ(hs_norm(zero, p), 0.0);
  EXPECT_EQ(hmax_norm(zero, p), 0.0);
  EXPECT_NEAR(hs_norm(f, p), 1.0, 1e-12);
  EXPECT_NEAR(hmax_norm(f, Exponent::constant(2, 2.0)), 1.0, 1e-12);
  const Martingale c = martingale_from_terminal(one, Eigen::Vector2d(-3, -3));
  EXPECT_NEAR(hmax_norm(c, p), 3.0, 1e-11);
}

TEST(HardyNorms, ConstantExponentReduction) {
  Rng rng(51);
  const auto s = dyadic(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Martingale f = centered(rng, s, 0);
    EXPECT_TRUE(oracle::rel_close(hs_norm(f, Exponent::constant(8, 2.0)),
                                  oracle::lebesgue(s->probs(), cond_square(f), 2.0), 1e-10));
  }
}

TEST(IsAtom, Examples) {
  const auto one = dyadic(1);
  const Exponent p(Eigen::Vector2d(1, 2));
  EXPECT_TRUE(is_atom(*one, Eigen::Vector2d(0, 0), StoppingTime::constant(2, 0), p).ok);
  EXPECT_TRUE(is_atom(*one, Eigen::Vector2d(0, 0), StoppingTime::constant(2, kNever), p).ok);
  const AtomCheck good = is_atom(*one, kAtom, StoppingTime::constant(2, 0), p);
  EXPECT_TRUE(good.ok) << good.reason;
  EXPECT_NEAR(good.s_sup, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(good.bound, 1.0, 1e-12);
  const AtomCheck bad = is_atom(*one, kAtom, StoppingTime::constant(2, 1), p);
  EXPECT_FALSE(bad.ok);
  EXPECT_FALSE(bad.vanishes);
  EXPECT_FALSE(bad.reason.empty());
}

TEST(IsAtom, SizeClauseAndEmptySupport) {
  const auto one = dyadic(1);
  const Exponent p(Eigen::Vector2d(1, 2));
  const AtomCheck big = is_atom(*one, Eigen::Vector2d(2, -2), StoppingTime::constant(2, 0), p);
  EXPECT_FALSE(big.ok);
  EXPECT_TRUE(big.vanishes);
  EXPECT_FALSE(big.bounded);
  const AtomCheck never = is_atom(*one, kAtom, StoppingTime::constant(2, kNever), p);
  EXPECT_FALSE(never.ok);
  EXPECT_TRUE(std::isinf(never.bound));
}

TEST(Decompose, SingleTermExample) {
  const auto one = dyadic(1);
  const Martingale f = martingale_from_terminal(one, Eigen::Vector2d(1, -1));
  for (const Exponent& p : {Exponent(Eigen::Vector2d(1, 2)), Exponent::constant(2, 1.0),
                            Exponent::constant(2, 0.5)}) {
    const AtomicDecomposition dec = atomic_decompose(f, p);
    ASSERT_EQ(dec.terms.size(), 1u);
    const AtomicTerm& t = dec.terms[0];
    EXPECT_EQ(t.k, -1);
    EXPECT_NEAR(t.mu, 1.5, 1e-12);
    EXPECT_EQ(t.tau, StoppingTime::constant(2, 0));
    EXPECT_NEAR((t.atom_terminal - kAtom).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    EXPECT_NEAR(a_quantity(*one, dec, p), 1.5, 1e-11);
    const Martingale back = reconstruct(dec, one);
    EXPECT_NEAR((back.terminal() - f.terminal()).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  }
  const AtomicDecomposition dec = atomic_decompose(f, Exponent::constant(2, 1.0));
  const Prop41Bounds b = prop41_bounds(*one, dec, Exponent::constant(2, 1.0));
  EXPECT_NEAR(b.mu_sum, 1.5, 1e-12);
  EXPECT_NEAR(b.a, 1.5, 1e-12);
  EXPECT_TRUE(b.second_applies);
  EXPECT_TRUE(b.first_holds);
  EXPECT_TRUE(b.second_holds);
}

TEST(Decompose, ZeroAndEmpty) {
  const auto s = dyadic(2);
  const Exponent p = Exponent::constant(4, 2.0);
  const Martingale zero = martingale_from_terminal(s, Eigen::Vector4d::Zero());
  const AtomicDecomposition dec = atomic_decompose(zero, p);
  EXPECT_TRUE(dec.terms.empty());
  EXPECT_EQ(a_quantity(*s, dec, p), 0.0);
  const Martingale back = reconstruct(dec, s);
  EXPECT_EQ(back.terminal(), Eigen::Vector4d::Zero());
  const Prop41Bounds b = prop41_bounds(*s, dec, p);
  EXPECT_EQ(b.mu_p_plus, 0.0);
  EXPECT_EQ(b.mu_sum, 0.0);
  EXPECT_EQ(b.a, 0.0);
}

TEST(Decompose, RejectsNonzeroStart) {
  const auto s = dyadic(1);
  const Martingale f = martingale_from_terminal(s, Eigen::Vector2d(2, 1));
  EXPECT_THROW(atomic_decompose(f, Exponent::constant(2, 2.0)), DomainError);
}

TEST(Decompose, NoTermsAboveThreshold) {
  Rng rng(52);
  const auto s = dyadic(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Martingale f = centered(rng, s, trial % 3);
    const double smax = cond_square(f).maxCoeff();
    const AtomicDecomposition dec = atomic_decompose(f, Exponent::constant(16, 2.0));
    for (const AtomicTerm& t : dec.terms) ASSERT_LT(std::ldexp(1.0, t.k), smax);
  }
}

TEST(Decompose, MuMatchesIndicatorOracle) {
  Rng rng(53);
  const auto s = dyadic(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Martingale f = centered(rng, s, 0);
    const Exponent p = exponent_of(rng, 8, 2);
    for (const AtomicTerm& t : atomic_decompose(f, p).terms) {
      Eigen::VectorXd chi = Eigen::VectorXd::Zero(8);
      for (int i = 0; i < 8; ++i)
        if (t.tau[i] != kNever) chi[i] = 1.0;
      const double expected = 3.0 * std::ldexp(1.0, t.k) * oracle::luxemburg(s->probs(), chi, p.values());
      ASSERT_TRUE(oracle::rel_close(t.mu, expected, 1e-10));
    }
  }
}

TEST(Decompose, PipelineProperties) {
  Rng rng(54);
  for (int depth = 1; depth <= 6; ++depth) {
    const auto s = dyadic(depth);
    const Eigen::Index n = s->leaf_count();
    for (int family = 0; family < 3; ++family) {
      const Exponent p = exponent_of(rng, n, family);
      for (int trial = 0; trial < 40; ++trial) {
        const Martingale f = centered(rng, s, trial % 3);
        const AtomicDecomposition dec = atomic_decompose(f, p);
        const Martingale back = reconstruct(dec, s);
        double fmax = 0.0, err = 0.0;
        for (int k = 0; k <= depth; ++k) {
          fmax = std::max(fmax, f.level(k).cwiseAbs().maxCoeff());
          err = std::max(err, (back.level(k) - f.level(k)).cwiseAbs().maxCoeff());
        }
        ASSERT_LE(err, 1e-9 * fmax);
        for (std::size_t j = 0; j < dec.terms.size(); ++j) {
          const AtomCheck c = is_atom(*s, dec.terms[j].atom_terminal, dec.terms[j].tau, p);
          ASSERT_TRUE(c.ok) << c.reason;
          if (j == 0) continue;
          for (Eigen::Index i = 0; i < n; ++i)
            ASSERT_LE(dec.terms[j - 1].tau[i], dec.terms[j].tau[i]);
        }
        const double a = a_quantity(*s, dec, p);
        ASSERT_LE(hs_norm(f, p), a + 1e-9);
        const Prop41Bounds b = prop41_bounds(*s, dec, p);
        ASSERT_TRUE(b.first_holds);
        ASSERT_LE(b.mu_p_plus, a * (1 + 1e-9));
        ASSERT_TRUE(geometric_comparison(*s, dec, p).holds);
      }
    }
  }
}

TEST(Decompose, ProperSubOneExponentSecondBound) {
  Rng rng(55);
  const auto s = dyadic(3);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(8);
    for (int i = 0; i < 8; ++i) v[i] = rng.uniform(0.3, 1.0);
    const Exponent p(v);
    const AtomicDecomposition dec = atomic_decompose(centered(rng, s, trial % 3), p);
    const Prop41Bounds b = prop41_bounds(*s, dec, p);
    ASSERT_TRUE(b.second_applies);
    ASSERT_TRUE(b.first_holds);
    ASSERT_TRUE(b.second_holds);
    ASSERT_LE(b.mu_sum, b.a * (1 + 1e-9));
  }
}

TEST(Decompose, GeometricComparisonRange) {
  Rng rng(56);
  const auto s = dyadic(4);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(16);
    for (int i = 0; i < 16; ++i) v[i] = rng.uniform(0.3, 3.0);
    const Exponent p(v);
    const GeometricComparison g =
        geometric_comparison(*s, atomic_decompose(centered(rng, s, 0), p), p);
    const double q = std::min(p.p_minus(), 1.0);
    ASSERT_NEAR(g.bound, std::pow(1.0 - std::pow(2.0, -q), -1.0 / q), 1e-12);
    ASSERT_GE(g.min_ratio, 1.0 - 1e-12);
    ASSERT_LE(g.max_ratio, g.bound * (1 + 1e-12));
  }
}

TEST(Decompose, ForwardRatioInvariantUnderPowersOfTwo) {
  Rng rng(57);
  const auto s = dyadic(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Martingale f = centered(rng, s, trial % 3);
    const Exponent p = exponent_of(rng, 16, 2);
    const double hs = hs_norm(f, p);
    const double ratio = a_quantity(*s, atomic_decompose(f, p), p) / hs;
    for (double c : {2.0, 0.5, 8.0}) {
      std::vector<RandomVariable> levels;
      for (const RandomVariable& l : f.levels()) levels.push_back(c * l);
      const Martingale g(s, levels);
      const double rg = a_quantity(*s, atomic_decompose(g, p), p) / hs_norm(g, p);
      ASSERT_TRUE(oracle::rel_close(rg, ratio, 1e-6)) << c;
    }
  }
}

TEST(Decompose, RatioBoundedOverRandomSample) {
  Rng rng(58);
  const auto s = std::make_shared<const FilteredSpace>(build_tree_space(3, {0.2, 0.3, 0.5}));
  const Exponent p = exponent_of(rng, 27, 2);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const Martingale f = centered(rng, s, trial % 3);
    const double hs = hs_norm(f, p);
    if (hs == 0.0) continue;
    worst = std::max(worst, a_quantity(*s, atomic_decompose(f, p), p) / hs);
  }
  EXPECT_TRUE(std::isfinite(worst));
  EXPECT_GE(worst, 1.0 - 1e-9);
  RecordProperty("forward_ratio_max", std::to_string(worst));
}
