#include "varhardy/varlp.hpp"

#include <string>

namespace varhardy {

namespace {

void check_lengths(const FilteredSpace& space, const RandomVariable& f, const Exponent& p) {
  if (f.size() != space.leaf_count() || p.size() != space.leaf_count())
    throw ValidationError("function or exponent length does not match the leaf count " +
                          std::to_string(space.leaf_count()));
}

RandomVariable indicator(const FilteredSpace& space, std::span<const int> subset) {
  RandomVariable chi = RandomVariable::Zero(space.leaf_count());
  for (int leaf : subset) chi[leaf] = 1.0;
  return chi;
}

bool within(double a, double b, double tol) { return a <= b * (1.0 + tol) + tol; }

}  // namespace

double modular(const FilteredSpace& space, const RandomVariable& f, const Exponent& p,
               double lambda) {
  check_lengths(space, f, p);
  if (!(lambda > 0.0)) throw DomainError("modular needs lambda > 0");
  return modular(space.probs(), f, p.values(), lambda);
}

NormResult luxemburg_norm(const FilteredSpace& space, const RandomVariable& f, const Exponent& p,
                          const NormOptions& opts) {
  check_lengths(space, f, p);
  return luxemburg_norm(space.probs(), f, p.values(), opts);
}

double norm(const FilteredSpace& space, const RandomVariable& f, const Exponent& p) {
  return luxemburg_norm(space, f, p).norm;
}

double indicator_norm(const FilteredSpace& space, std::span<const int> subset, const Exponent& p) {
  return norm(space, indicator(space, subset), p);
}

std::pair<double, double> check_power_identity(const FilteredSpace& space, const RandomVariable& f,
                                               const Exponent& p, double r) {
  if (!(r > 0.0)) throw DomainError("power identity needs r > 0");
  if (p.p_minus() < 1.0) throw DomainError("power identity needs p_- >= 1");
  const RandomVariable powered = f.array().abs().pow(r).matrix();
  const Exponent scaled(r * p.values(), p.allows_infinite());
  return {norm(space, powered, p), std::pow(norm(space, f, scaled), r)};
}

HolderTriple check_holder(const FilteredSpace& space, const RandomVariable& f,
                          const RandomVariable& g, const Exponent& p, const Exponent& q,
                          const Exponent& r) {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double gap = 1.0 / p[i] - (1.0 / q[i] + 1.0 / r[i]);
    if (std::abs(gap) > 1e-12)
      throw DomainError("1/p = 1/q + 1/r fails at leaf " + std::to_string(i));
  }
  const RandomVariable fg = f.cwiseProduct(g);
  return {norm(space, fg, p), norm(space, f, q), norm(space, g, r)};
}

ModularBridge norm_modular_bridge(const FilteredSpace& space, const RandomVariable& f,
                                  const Exponent& p) {
  ModularBridge out;
  out.modular = modular(space, f, p, 1.0);
  out.norm = norm(space, f, p);
  const double tol = kAssertTolerance;
  const auto side = [tol](double x) { return x < 1.0 - tol ? -1 : (x > 1.0 + tol ? 1 : 0); };
  out.order_agrees = side(out.norm) == side(out.modular);
  const double rho = out.modular;
  const double lo_exp = 1.0 / p.p_minus();
  const double hi_exp = 1.0 / p.p_plus();
  if (out.norm > 1.0) {
    out.large_bounds =
        within(std::pow(rho, hi_exp), out.norm, tol) && within(out.norm, std::pow(rho, lo_exp), tol);
  } else if (out.norm > 0.0) {
    out.small_bounds =
        within(std::pow(rho, lo_exp), out.norm, tol) && within(out.norm, std::pow(rho, hi_exp), tol);
  }
  return out;
}

IndicatorProfile indicator_norm_profile(const FilteredSpace& space, std::span<const int> subset,
                                        const Exponent& p) {
  if (subset.empty()) throw DomainError("indicator profile needs a nonempty set");
  const double mass = space.prob(subset);
  IndicatorProfile out;
  out.lower = std::pow(mass, 1.0 / p.p_minus(subset));
  out.upper = std::pow(mass, 1.0 / p.p_plus(subset));
  out.norm = indicator_norm(space, subset, p);
  const double lo = std::min({out.lower, out.upper, out.norm});
  const double hi = std::max({out.lower, out.upper, out.norm});
  out.max_ratio = hi / lo;
  return out;
}

double indicator_product_ratio(const FilteredSpace& space, std::span<const int> subset,
                               const Exponent& p, const Exponent& q) {
  if (subset.empty()) throw DomainError("indicator ratio needs a nonempty set");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (std::abs(1.0 / p[i] + 1.0 / q[i] - 1.0) > 1e-12)
      throw DomainError("exponents are not conjugate at leaf " + std::to_string(i));
  }
  return space.prob(subset) /
         (indicator_norm(space, subset, p) * indicator_norm(space, subset, q));
}

double indicator_product_ratio(const FilteredSpace& space, std::span<const int> subset,
                               const Exponent& p, const Exponent& q, const Exponent& r) {
  if (subset.empty()) throw DomainError("indicator ratio needs a nonempty set");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (std::abs(1.0 / r[i] - 1.0 / p[i] - 1.0 / q[i]) > 1e-12)
      throw DomainError("1/r = 1/p + 1/q fails at leaf " + std::to_string(i));
  }
  return indicator_norm(space, subset, r) /
         (indicator_norm(space, subset, p) * indicator_norm(space, subset, q));
}

double indicator_product_envelope(const FilteredSpace& space, const Exponent& p,
                                  const Exponent& q) {
  const double kp = condition_k(space, p).value;
  const double kq = condition_k(space, q).value;
  return std::pow(kp, 1.0 / (p.p_minus() * p.p_minus())) *
         std::pow(kq, 1.0 / (q.p_minus() * q.p_minus()));
}

}  // namespace varhardy
