#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "varhardy/martingale.hpp"
#include "varhardy/space.hpp"

namespace varhardy {

enum class SupMode { Auto, Exhaustive, Sampled };

struct SupOptions {
  SupMode mode = SupMode::Auto;
  std::uint64_t cap = kDefaultEnumerationCap;
  std::size_t samples = 4096;
  std::uint64_t seed = 0;
};

/// Candidate stopping times for a supremum. Exhaustive when the count fits
/// under the cap (or when forced); otherwise the constant times tau = n for
/// n = 0..N and tau = inf followed by seeded samples.
class StoppingFamily {
 public:
  StoppingFamily(const FilteredSpace& space, const SupOptions& opts);

  SupMode mode() const { return mode_; }
  std::size_t size() const { return flat_.size() / leaves_; }
  std::span<const int> at(std::size_t c) const {
    return {flat_.data() + c * leaves_, leaves_};
  }
  StoppingTime tau(std::size_t c) const {
    return StoppingTime(std::vector<int>(at(c).begin(), at(c).end()));
  }

 private:
  SupMode mode_;
  std::size_t leaves_;
  std::vector<int> flat_;
};

struct SupNormResult {
  double value = 0.0;
  StoppingTime argmax_tau;
  SupMode mode = SupMode::Exhaustive;
  std::uint64_t candidates = 0;
};

enum class StopKind {
  Shifted,  ///< f - f^{tau - 1}
  Plain     ///< f - f^tau
};

/// Terminal value of f - f^{tau - 1} or f - f^tau.
RandomVariable stopped_difference(const Martingale& f, std::span<const int> tau, StopKind kind);

/// sup over a family of ||g_tau||_num / D({tau < inf}) with g_tau a stopped
/// difference. Denominators depend only on the finite set and are computed
/// once per distinct set, so one evaluator serves many martingales.
class SupEvaluator {
 public:
  /// BMO_p: numerator ||f - f^{tau-1}||_p, denominator ||chi||_p.
  static SupEvaluator bmo(std::shared_ptr<const FilteredSpace> space, const Exponent& p,
                          std::shared_ptr<const StoppingFamily> family);

  /// Lambda_q(alpha): numerator ||f - f^tau||_q, denominator
  /// ||chi||_{1/alpha} ||chi||_q, with 1/0 read as +inf.
  static SupEvaluator lipschitz(std::shared_ptr<const FilteredSpace> space, double q,
                                const RandomVariable& alpha,
                                std::shared_ptr<const StoppingFamily> family);

  SupNormResult evaluate(const Martingale& f) const;

  /// Denominator of candidate c; 0 when P(tau < inf) = 0.
  double denominator(std::size_t c) const { return denom_[c]; }
  const StoppingFamily& family() const { return *family_; }

 private:
  SupEvaluator(std::shared_ptr<const FilteredSpace> space, Exponent numerator, StopKind kind,
               std::shared_ptr<const StoppingFamily> family, std::vector<double> denom);

  std::shared_ptr<const FilteredSpace> space_;
  Exponent num_;
  StopKind kind_;
  std::shared_ptr<const StoppingFamily> family_;
  std::vector<double> denom_;
};

/// Requires f_0 = 0. Sampled results are lower bounds.
SupNormResult bmo_norm(const Martingale& f, const Exponent& p, const SupOptions& opts = {});

SupNormResult lipschitz_norm(const Martingale& f, double q, const RandomVariable& alpha,
                             const SupOptions& opts = {});

/// |E(f_N phi)| / (||f||_{H^s_p} ||phi||_{Lambda_2(1/p - 1)}) for 0 < p_- <= p_+ <= 1.
/// A pairing below 1e-12 ||f_N||_inf ||phi||_inf counts as exactly 0.
double duality_pairing_ratio(const Martingale& f, const RandomVariable& phi, const Exponent& p,
                             const SupOptions& opts = {});

}  // namespace varhardy
