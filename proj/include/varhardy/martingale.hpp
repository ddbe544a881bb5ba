#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "varhardy/space.hpp"

namespace varhardy {

/// Stop level meaning "never stops".
inline constexpr int kNever = std::numeric_limits<int>::max();

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Per-leaf stop level in {0, ..., N} or kNever.
class StoppingTime {
 public:
  StoppingTime() = default;
  /// Unchecked. Use validate_stopping_time for untrusted data.
  explicit StoppingTime(std::vector<int> stop_level) : levels_(std::move(stop_level)) {}

  static StoppingTime constant(Eigen::Index leaves, int level) {
    return StoppingTime(std::vector<int>(leaves, level));
  }

  int operator[](Eigen::Index leaf) const { return levels_[leaf]; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(levels_.size()); }
  const std::vector<int>& levels() const { return levels_; }

  bool finite_at(Eigen::Index leaf) const { return levels_[leaf] != kNever; }
  /// Leaves of {tau < inf}.
  std::vector<int> finite_set() const;

  friend bool operator==(const StoppingTime&, const StoppingTime&) = default;

 private:
  std::vector<int> levels_;
};

/// Returns an empty string when stop_level is a stopping time of the
/// filtration, otherwise a description of the first offending block.
std::string stopping_time_violation(const FilteredSpace& space, const std::vector<int>& stop_level);

StoppingTime validate_stopping_time(const FilteredSpace& space, std::vector<int> stop_level);

/// Sequence (f_0, ..., f_N) adapted to the filtration of a shared space.
///
/// make_martingale checks measurability and the tower property. stop() with
/// the minus-one shift produces a sequence that is adapted but in general not
/// a martingale; it is still carried in this type.
class Martingale {
 public:
  Martingale(std::shared_ptr<const FilteredSpace> space, std::vector<RandomVariable> levels)
      : space_(std::move(space)), levels_(std::move(levels)) {}

  const FilteredSpace& space() const { return *space_; }
  const std::shared_ptr<const FilteredSpace>& space_ptr() const { return space_; }

  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  const RandomVariable& level(int n) const { return levels_[n]; }
  const RandomVariable& terminal() const { return levels_.back(); }
  const std::vector<RandomVariable>& levels() const { return levels_; }

  /// Empty when every level is measurable and E(f_{n+1} | F_n) = f_n within
  /// tol * max(1, max |f|) per block.
  std::string invariant_violation(double tol = 1e-12) const;

 private:
  std::shared_ptr<const FilteredSpace> space_;
  std::vector<RandomVariable> levels_;
};

Martingale make_martingale(std::shared_ptr<const FilteredSpace> space,
                           std::vector<RandomVariable> levels);

/// E(f | F_n) by block averages.
RandomVariable cond_expect(const FilteredSpace& space, const RandomVariable& f, int level);

/// f_n = E(f_inf | F_n).
Martingale martingale_from_terminal(std::shared_ptr<const FilteredSpace> space,
                                    const RandomVariable& f_inf);

/// M_m f = max_{n <= m} |f_n|, m defaulting to N.
RandomVariable maximal(const Martingale& f, std::optional<int> upto = std::nullopt);

/// s_m(f) = (sum_{n <= m} E(|df_n|^2 | F_{n-1}))^(1/2) with df_0 = 0.
RandomVariable cond_square(const Martingale& f, std::optional<int> upto = std::nullopt);

enum class StopShift { None, MinusOne };

/// (f^tau)_n = f_{min(n, tau)}. MinusOne uses min(n, tau - 1) with f_{-1} = 0.
Martingale stop(const Martingale& f, const StoppingTime& tau, StopShift shift = StopShift::None);

/// Number of stopping times, saturating at cap + 1.
std::uint64_t count_stopping_times(const FilteredSpace& space,
                                   std::uint64_t cap = kDefaultEnumerationCap);

/// Every stopping time in a fixed order: at each block "stop here" precedes
/// the continuations, which vary the last child fastest.
std::vector<StoppingTime> enumerate_stopping_times(const FilteredSpace& space,
                                                   std::uint64_t cap = kDefaultEnumerationCap);

/// Flat form of enumerate_stopping_times: candidate c occupies
/// [c * leaves, (c + 1) * leaves).
std::vector<int> enumerate_stopping_levels(const FilteredSpace& space,
                                           std::uint64_t cap = kDefaultEnumerationCap);

/// count samples; the first two are tau = 0 and tau = inf. The rest stop each
/// reached block at level n with probability 1/(N - n + 2). A longer request
/// with the same seed extends a shorter one.
std::vector<StoppingTime> sample_stopping_times(const FilteredSpace& space, std::size_t count,
                                                std::uint64_t seed);

}  // namespace varhardy
