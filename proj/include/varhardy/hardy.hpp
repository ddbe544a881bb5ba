#pragma once

#include <memory>
#include <string>
#include <vector>

#include "varhardy/martingale.hpp"
#include "varhardy/space.hpp"

namespace varhardy {

/// ||s(f)||_p
double hs_norm(const Martingale& f, const Exponent& p);

/// ||Mf||_p
double hmax_norm(const Martingale& f, const Exponent& p);

struct AtomCheck {
  bool ok = true;
  bool vanishes = true;     ///< E(a | F_n) chi_{tau >= n} = 0 for all n
  bool bounded = true;      ///< ||s(a)||_inf <= ||chi_{tau < inf}||_p^(-1)
  double vanishing_error = 0.0;
  double s_sup = 0.0;
  double bound = 0.0;       ///< +inf when P(tau < inf) = 0
  std::string reason;
};

/// Never throws; diagnostics describe the first failed clause.
AtomCheck is_atom(const FilteredSpace& space, const RandomVariable& a_terminal,
                  const StoppingTime& tau, const Exponent& p);

struct AtomicTerm {
  int k = 0;
  double mu = 0.0;
  StoppingTime tau;
  RandomVariable atom_terminal;
};

struct AtomicDecomposition {
  std::vector<AtomicTerm> terms;
  int k_min = 0;
  int k_max = 0;
};

/// Stopping-time decomposition with tau_k = inf{n : s_{n+1}(f) > 2^k} and
/// mu_k = 3 2^k ||chi_{tau_k < inf}||_p. Terms with tau_k = tau_{k+1} are
/// dropped. Requires f_0 = 0.
AtomicDecomposition atomic_decompose(const Martingale& f, const Exponent& p);

/// || (sum_k (mu_k chi_{Omega_k} / ||chi_{Omega_k}||_p)^q)^(1/q) ||_p with
/// q = min(p_-, 1).
double a_quantity(const FilteredSpace& space, const AtomicDecomposition& dec, const Exponent& p);

Martingale reconstruct(const AtomicDecomposition& dec, std::shared_ptr<const FilteredSpace> space);

struct Prop41Bounds {
  double mu_p_plus = 0.0;  ///< (sum mu_k^{p_+})^{1/p_+}
  double mu_sum = 0.0;     ///< sum mu_k
  double a = 0.0;
  bool first_holds = true;
  bool second_applies = false;  ///< p_+ <= 1
  bool second_holds = true;
};

Prop41Bounds prop41_bounds(const FilteredSpace& space, const AtomicDecomposition& dec,
                           const Exponent& p);

struct GeometricComparison {
  double min_ratio = 1.0;
  double max_ratio = 1.0;
  double bound = 1.0;  ///< (1 - 2^{-q})^{-1/q}
  bool holds = true;
};

/// Pointwise ratio of (sum_k (3 2^k chi_{Omega_k})^q)^(1/q) to
/// sup_k 3 2^k chi_{Omega_k} over the leaves where the sup is positive.
GeometricComparison geometric_comparison(const FilteredSpace& space,
                                         const AtomicDecomposition& dec, const Exponent& p);

}  // namespace varhardy
