#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>

#include <Eigen/Dense>

#include "varhardy/errors.hpp"
#include "varhardy/space.hpp"

namespace varhardy {

struct NormOptions {
  double rel_tol = 1e-12;
  int max_iterations = 200;
  int max_halvings = 2000;
};

struct NormResult {
  double norm = 0.0;
  int iterations = 0;
  /// |rho(f / norm) - 1| at return; 0 for the trivial cases.
  double residual = 0.0;
};

/// Assertion tolerance shared by the lemma checks.
inline constexpr double kAssertTolerance = 1e-9;

/// Default envelope for the variable exponent Hoelder inequality. The constant
/// is only known to exist; for p_- >= 1 the Young-inequality argument gives 2.
inline constexpr double kHolderEnvelope = 2.0;

/// rho(f / lambda) = sum_w P(w) (|f(w)| / lambda)^p(w).
///
/// Leaves with p = +inf use the mixed modular: they contribute nothing while
/// |f| <= lambda there and make the modular +inf otherwise.
template <class Probs, class Values, class Exps>
double modular(const Eigen::MatrixBase<Probs>& probs, const Eigen::MatrixBase<Values>& f,
               const Eigen::MatrixBase<Exps>& p, double lambda) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double a = std::abs(f(i)) / lambda;
    if (std::isinf(p(i))) {
      if (a > 1.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    if (a != 0.0) sum += probs(i) * std::pow(a, p(i));
  }
  return sum;
}

/// Luxemburg quasi-norm inf{lambda > 0 : rho(f / lambda) <= 1}.
///
/// The finite-exponent part is bracketed by lambda_hi = max |f| (where rho <= 1
/// on a probability space) and lambda_lo obtained by halving until rho >= 1,
/// then bisected on the strictly decreasing map lambda -> rho(f / lambda). The
/// infinite-exponent leaves only impose lambda >= max |f| over them.
template <class Probs, class Values, class Exps>
NormResult luxemburg_norm(const Eigen::MatrixBase<Probs>& probs,
                          const Eigen::MatrixBase<Values>& f,
                          const Eigen::MatrixBase<Exps>& p, const NormOptions& opts = {}) {
  const Eigen::Index n = f.size();
  double cap_inf = 0.0;
  // Per leaf in the finite support: (P, log |f|, p).
  Eigen::Matrix<double, Eigen::Dynamic, 3> terms(n, 3);
  Eigen::Index m = 0;
  double hi = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::abs(f(i));
    if (a == 0.0) continue;
    if (std::isinf(p(i))) {
      cap_inf = std::max(cap_inf, a);
      continue;
    }
    terms.row(m++) << probs(i), std::log(a), p(i);
    hi = std::max(hi, a);
  }
  if (m == 0) return {cap_inf, 0, 0.0};
  if (!std::isfinite(hi)) throw NumericalError("Luxemburg bracket is not finite", 0.0, hi);

  const auto rho = [&](double lambda) {
    const double log_lambda = std::log(lambda);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      sum += terms(i, 0) * std::exp(terms(i, 2) * (terms(i, 1) - log_lambda));
    return sum;
  };

  double lo = hi;
  double rho_lo = rho(lo);
  int halvings = 0;
  while (rho_lo < 1.0) {
    if (++halvings > opts.max_halvings)
      throw NumericalError("Luxemburg lower bracket not found", lo, hi);
    hi = lo;
    lo *= 0.5;
    rho_lo = rho(lo);
  }
  if (rho_lo == 1.0) hi = lo;

  int it = 0;
  while (hi - lo > opts.rel_tol * hi) {
    if (it == opts.max_iterations)
      throw NumericalError("Luxemburg bisection did not converge", lo, hi);
    ++it;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double r = rho(mid);
    if (r > 1.0) {
      lo = mid;
    } else {
      hi = mid;
      if (r == 1.0) break;
    }
  }
  if (cap_inf >= hi) return {cap_inf, it, 0.0};
  return {hi, it, std::abs(rho(hi) - 1.0)};
}

/// Lebesgue norm for a constant exponent, (sum P |f|^p)^(1/p).
template <class Probs, class Values>
double lebesgue_norm(const Eigen::MatrixBase<Probs>& probs, const Eigen::MatrixBase<Values>& f,
                     double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f(i)));
    return m;
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double a = std::abs(f(i));
    if (a != 0.0) sum += probs(i) * std::pow(a, p);
  }
  return std::pow(sum, 1.0 / p);
}

// Space-level entry points. These validate lengths and reject infinite
// exponents unless the exponent was built for the mixed modular.

double modular(const FilteredSpace& space, const RandomVariable& f, const Exponent& p,
               double lambda);

NormResult luxemburg_norm(const FilteredSpace& space, const RandomVariable& f, const Exponent& p,
                          const NormOptions& opts = {});

/// Convenience: luxemburg_norm(...).norm.
double norm(const FilteredSpace& space, const RandomVariable& f, const Exponent& p);

/// ||chi_B||_p for a leaf subset B.
double indicator_norm(const FilteredSpace& space, std::span<const int> subset, const Exponent& p);

/// (|| |f|^r ||_p, ||f||_{rp}^r). Equal when p_- >= 1.
std::pair<double, double> check_power_identity(const FilteredSpace& space, const RandomVariable& f,
                                               const Exponent& p, double r);

struct HolderTriple {
  double product = 0.0;  ///< ||fg||_p
  double f_norm = 0.0;   ///< ||f||_q
  double g_norm = 0.0;   ///< ||g||_r
};

/// Norms entering the Hoelder inequality with 1/p = 1/q + 1/r.
HolderTriple check_holder(const FilteredSpace& space, const RandomVariable& f,
                          const RandomVariable& g, const Exponent& p, const Exponent& q,
                          const Exponent& r);

struct ModularBridge {
  double modular = 0.0;
  double norm = 0.0;
  bool order_agrees = true;  ///< ||f|| <, =, > 1 iff rho(f) <, =, > 1
  bool large_bounds = true;  ///< rho^(1/p+) <= ||f|| <= rho^(1/p-) when ||f|| > 1
  bool small_bounds = true;  ///< rho^(1/p-) <= ||f|| <= rho^(1/p+) when 0 < ||f|| <= 1
  bool all() const { return order_agrees && large_bounds && small_bounds; }
};

/// Evaluates the three norm/modular relations, as printed, at tolerance 1e-9.
ModularBridge norm_modular_bridge(const FilteredSpace& space, const RandomVariable& f,
                                  const Exponent& p);

struct IndicatorProfile {
  double lower = 0.0;      ///< P(B)^(1/p_-(B))
  double upper = 0.0;      ///< P(B)^(1/p_+(B))
  double norm = 0.0;       ///< ||chi_B||_p
  double max_ratio = 1.0;  ///< largest ratio among the three
};

IndicatorProfile indicator_norm_profile(const FilteredSpace& space, std::span<const int> subset,
                                        const Exponent& p);

/// ||chi_B||_1 / (||chi_B||_p ||chi_B||_q) for conjugate p, q.
double indicator_product_ratio(const FilteredSpace& space, std::span<const int> subset,
                               const Exponent& p, const Exponent& q);

/// ||chi_B||_r / (||chi_B||_p ||chi_B||_q) with 1/r = 1/p + 1/q.
double indicator_product_ratio(const FilteredSpace& space, std::span<const int> subset,
                               const Exponent& p, const Exponent& q, const Exponent& r);

/// Envelope K' such that the product ratios lie in [1/K', K'], built from the
/// condition-K constants as K_p^(1/p_-^2) K_q^(1/q_-^2).
double indicator_product_envelope(const FilteredSpace& space, const Exponent& p,
                                  const Exponent& q);

}  // namespace varhardy
