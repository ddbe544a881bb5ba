#include "varhardy/hardy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "varhardy/errors.hpp"
#include "varhardy/varlp.hpp"

namespace varhardy {

namespace {

double omega_norm(const FilteredSpace& space, const StoppingTime& tau, const Exponent& p) {
  const std::vector<int> finite = tau.finite_set();
  if (finite.empty()) return 0.0;
  return indicator_norm(space, finite, p);
}

double scale_of(const RandomVariable& f) {
  return f.size() == 0 ? 1.0 : std::max(1.0, f.cwiseAbs().maxCoeff());
}

}  // namespace

double hs_norm(const Martingale& f, const Exponent& p) {
  return norm(f.space(), cond_square(f), p);
}

double hmax_norm(const Martingale& f, const Exponent& p) {
  return norm(f.space(), maximal(f), p);
}

AtomCheck is_atom(const FilteredSpace& space, const RandomVariable& a_terminal,
                  const StoppingTime& tau, const Exponent& p) {
  AtomCheck out;
  if (a_terminal.size() != space.leaf_count() || tau.size() != space.leaf_count() ||
      p.size() != space.leaf_count()) {
    out.ok = out.vanishes = out.bounded = false;
    out.reason = "length mismatch";
    return out;
  }
  const double tol = 1e-10 * scale_of(a_terminal);
  RandomVariable prev;
  RandomVariable s2 = RandomVariable::Zero(space.leaf_count());
  for (int n = 0; n <= space.depth(); ++n) {
    const RandomVariable a_n = space.average_on_blocks(a_terminal, n);
    for (Eigen::Index i = 0; i < a_n.size(); ++i) {
      if (tau[i] >= n) out.vanishing_error = std::max(out.vanishing_error, std::abs(a_n[i]));
    }
    if (n > 0) {
      const RandomVariable d2 = (a_n - prev).array().square().matrix();
      s2 += space.average_on_blocks(d2, n - 1);
    }
    prev = a_n;
  }
  if (out.vanishing_error > tol) {
    out.vanishes = false;
    out.reason = "E(a | F_n) does not vanish on {tau >= n}";
  }
  out.s_sup = std::sqrt(s2.maxCoeff());

  const double chi = omega_norm(space, tau, p);
  if (chi == 0.0) {
    out.bound = std::numeric_limits<double>::infinity();
    if (a_terminal.cwiseAbs().maxCoeff() > tol) {
      out.bounded = false;
      if (out.reason.empty()) out.reason = "P(tau < inf) = 0 but a is not zero";
    }
  } else {
    out.bound = 1.0 / chi;
    if (out.s_sup > out.bound * (1.0 + kAssertTolerance)) {
      out.bounded = false;
      if (out.reason.empty()) out.reason = "||s(a)||_inf exceeds ||chi_{tau < inf}||^(-1)";
    }
  }
  out.ok = out.vanishes && out.bounded;
  return out;
}

AtomicDecomposition atomic_decompose(const Martingale& f, const Exponent& p) {
  const FilteredSpace& space = f.space();
  const Eigen::Index leaves = space.leaf_count();
  if (p.size() != leaves) throw ValidationError("exponent length does not match the leaf count");
  double scale = 1.0;
  for (const RandomVariable& level : f.levels()) scale = std::max(scale, scale_of(level));
  if (f.level(0).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError("atomic decomposition requires f_0 = 0");

  const int depth = f.depth();
  // s[n] = s_n(f) for n = 0..N+1 with s_{N+1} = s_N.
  std::vector<RandomVariable> s(depth + 2);
  RandomVariable sum = RandomVariable::Zero(leaves);
  s[0] = sum;
  for (int n = 1; n <= depth; ++n) {
    const RandomVariable d2 = (f.level(n) - f.level(n - 1)).array().square().matrix();
    sum += space.average_on_blocks(d2, n - 1);
    s[n] = sum.cwiseSqrt();
  }
  s[depth + 1] = s[depth];

  AtomicDecomposition dec;
  double s_max = 0.0;
  double s_min_pos = std::numeric_limits<double>::infinity();
  for (const RandomVariable& level : s) {
    for (Eigen::Index i = 0; i < leaves; ++i) {
      if (level[i] > 0.0) s_min_pos = std::min(s_min_pos, level[i]);
      s_max = std::max(s_max, level[i]);
    }
  }
  if (s_max == 0.0) return dec;

  int k_hi = static_cast<int>(std::ceil(std::log2(s_max)));
  while (std::ldexp(1.0, k_hi) < s_max) ++k_hi;
  int k_lo = static_cast<int>(std::floor(std::log2(s_min_pos))) - 1;
  while (std::ldexp(1.0, k_lo) >= s_min_pos) --k_lo;
  dec.k_min = k_lo;
  dec.k_max = k_hi;

  const auto tau_at = [&](int k) {
    const double threshold = std::ldexp(1.0, k);
    std::vector<int> stop(leaves, kNever);
    for (Eigen::Index i = 0; i < leaves; ++i) {
      for (int n = 0; n <= depth; ++n) {
        if (s[n + 1][i] > threshold) {
          stop[i] = n;
          break;
        }
      }
    }
    return StoppingTime(std::move(stop));
  };

  StoppingTime lower = tau_at(k_lo);
  Martingale lower_stopped = stop(f, lower);
  for (int k = k_lo; k < k_hi; ++k) {
    StoppingTime upper = tau_at(k + 1);
    Martingale upper_stopped = stop(f, upper);
    if (!(upper == lower)) {
      const double mu = 3.0 * std::ldexp(1.0, k) * omega_norm(space, lower, p);
      AtomicTerm term{k, mu, lower, RandomVariable::Zero(leaves)};
      if (mu > 0.0) term.atom_terminal = (upper_stopped.terminal() - lower_stopped.terminal()) / mu;
      dec.terms.push_back(std::move(term));
    }
    lower = std::move(upper);
    lower_stopped = std::move(upper_stopped);
  }
  return dec;
}

double a_quantity(const FilteredSpace& space, const AtomicDecomposition& dec, const Exponent& p) {
  if (dec.terms.empty()) return 0.0;
  const double q = std::min(p.p_minus(), 1.0);
  RandomVariable acc = RandomVariable::Zero(space.leaf_count());
  for (const AtomicTerm& term : dec.terms) {
    const double chi = omega_norm(space, term.tau, p);
    if (chi == 0.0 || term.mu == 0.0) continue;
    const double height = std::pow(term.mu / chi, q);
    for (int leaf : term.tau.finite_set()) acc[leaf] += height;
  }
  const RandomVariable g = acc.array().pow(1.0 / q).matrix();
  return norm(space, g, p);
}

Martingale reconstruct(const AtomicDecomposition& dec, std::shared_ptr<const FilteredSpace> space) {
  RandomVariable terminal = RandomVariable::Zero(space->leaf_count());
  for (const AtomicTerm& term : dec.terms) terminal += term.mu * term.atom_terminal;
  return martingale_from_terminal(std::move(space), terminal);
}

Prop41Bounds prop41_bounds(const FilteredSpace& space, const AtomicDecomposition& dec,
                           const Exponent& p) {
  Prop41Bounds out;
  const double pp = p.p_plus();
  out.second_applies = pp <= 1.0;
  if (dec.terms.empty()) return out;
  double power_sum = 0.0;
  for (const AtomicTerm& term : dec.terms) {
    power_sum += std::pow(term.mu, pp);
    out.mu_sum += term.mu;
  }
  out.mu_p_plus = std::pow(power_sum, 1.0 / pp);
  out.a = a_quantity(space, dec, p);
  const auto within = [](double lhs, double rhs) {
    return lhs <= rhs * (1.0 + kAssertTolerance) + kAssertTolerance;
  };
  out.first_holds = within(out.mu_p_plus, out.a);
  if (out.second_applies) out.second_holds = within(out.mu_sum, out.a);
  return out;
}

GeometricComparison geometric_comparison(const FilteredSpace& space,
                                         const AtomicDecomposition& dec, const Exponent& p) {
  GeometricComparison out;
  const double q = std::min(p.p_minus(), 1.0);
  out.bound = std::pow(1.0 - std::pow(2.0, -q), -1.0 / q);
  const Eigen::Index leaves = space.leaf_count();
  RandomVariable acc = RandomVariable::Zero(leaves);
  RandomVariable top = RandomVariable::Zero(leaves);
  for (const AtomicTerm& term : dec.terms) {
    const double height = 3.0 * std::ldexp(1.0, term.k);
    for (int leaf : term.tau.finite_set()) {
      acc[leaf] += std::pow(height, q);
      top[leaf] = std::max(top[leaf], height);
    }
  }
  bool any = false;
  for (Eigen::Index i = 0; i < leaves; ++i) {
    if (top[i] == 0.0) continue;
    const double ratio = std::pow(acc[i], 1.0 / q) / top[i];
    if (!any) {
      out.min_ratio = out.max_ratio = ratio;
      any = true;
    }
    out.min_ratio = std::min(out.min_ratio, ratio);
    out.max_ratio = std::max(out.max_ratio, ratio);
  }
  out.holds = out.min_ratio >= 1.0 - kAssertTolerance &&
              out.max_ratio <= out.bound * (1.0 + kAssertTolerance);
  return out;
}

}  // namespace varhardy
