#include "varhardy/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "varhardy/errors.hpp"
#include "varhardy/rng.hpp"

namespace varhardy {

std::vector<int> StoppingTime::finite_set() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (levels_[i] != kNever) out.push_back(static_cast<int>(i));
  return out;
}

std::string stopping_time_violation(const FilteredSpace& space, const std::vector<int>& stop_level) {
  if (static_cast<Eigen::Index>(stop_level.size()) != space.leaf_count())
    return "stopping time has " + std::to_string(stop_level.size()) + " entries for " +
           std::to_string(space.leaf_count()) + " leaves";
  const int depth = space.depth();
  for (std::size_t i = 0; i < stop_level.size(); ++i) {
    const int t = stop_level[i];
    if (t != kNever && (t < 0 || t > depth))
      return "leaf " + std::to_string(i) + " has stop level " + std::to_string(t) +
             " outside 0.." + std::to_string(depth);
  }
  for (int n = 0; n <= depth; ++n) {
    const Partition& part = space.level(n);
    for (std::size_t b = 0; b < part.size(); ++b) {
      const bool first = stop_level[part[b].front()] == n;
      for (int leaf : part[b]) {
        if ((stop_level[leaf] == n) != first)
          return "{tau = " + std::to_string(n) + "} splits level " + std::to_string(n) +
                 " block " + std::to_string(b);
      }
    }
  }
  return {};
}

StoppingTime validate_stopping_time(const FilteredSpace& space, std::vector<int> stop_level) {
  const std::string why = stopping_time_violation(space, stop_level);
  if (!why.empty()) throw ValidationError(why);
  return StoppingTime(std::move(stop_level));
}

std::string Martingale::invariant_violation(double tol) const {
  const FilteredSpace& s = *space_;
  if (depth() != s.depth())
    return "martingale has " + std::to_string(levels_.size()) + " levels, filtration has " +
           std::to_string(s.level_count());
  double scale = 1.0;
  for (const RandomVariable& f : levels_) {
    if (f.size() != s.leaf_count()) return "level length does not match the leaf count";
    scale = std::max(scale, f.cwiseAbs().maxCoeff());
  }
  const double slack = tol * scale;
  for (int n = 0; n <= depth(); ++n) {
    const Partition& part = s.level(n);
    for (std::size_t b = 0; b < part.size(); ++b) {
      const double v = levels_[n][part[b].front()];
      for (int leaf : part[b])
        if (std::abs(levels_[n][leaf] - v) > slack)
          return "f_" + std::to_string(n) + " is not constant on block " + std::to_string(b);
    }
    if (n < depth()) {
      const RandomVariable cond = s.average_on_blocks(levels_[n + 1], n);
      if ((cond - levels_[n]).cwiseAbs().maxCoeff() > slack)
        return "E(f_" + std::to_string(n + 1) + " | F_" + std::to_string(n) + ") != f_" +
               std::to_string(n);
    }
  }
  return {};
}

Martingale make_martingale(std::shared_ptr<const FilteredSpace> space,
                           std::vector<RandomVariable> levels) {
  Martingale f(std::move(space), std::move(levels));
  const std::string why = f.invariant_violation();
  if (!why.empty()) throw ValidationError(why);
  return f;
}

RandomVariable cond_expect(const FilteredSpace& space, const RandomVariable& f, int level) {
  if (level < 0 || level > space.depth())
    throw DomainError("conditioning level " + std::to_string(level) + " outside 0.." +
                      std::to_string(space.depth()));
  if (f.size() != space.leaf_count()) throw ValidationError("function length mismatch");
  return space.average_on_blocks(f, level);
}

Martingale martingale_from_terminal(std::shared_ptr<const FilteredSpace> space,
                                    const RandomVariable& f_inf) {
  if (f_inf.size() != space->leaf_count()) throw ValidationError("terminal length mismatch");
  const int depth = space->depth();
  std::vector<RandomVariable> levels(depth + 1);
  levels[depth] = f_inf;
  for (int n = depth - 1; n >= 0; --n) levels[n] = space->average_on_blocks(f_inf, n);
  return Martingale(std::move(space), std::move(levels));
}

RandomVariable maximal(const Martingale& f, std::optional<int> upto) {
  const int m = std::min(upto.value_or(f.depth()), f.depth());
  RandomVariable out = f.level(0).cwiseAbs();
  for (int n = 1; n <= m; ++n) out = out.cwiseMax(f.level(n).cwiseAbs());
  return out;
}

RandomVariable cond_square(const Martingale& f, std::optional<int> upto) {
  const int m = std::min(upto.value_or(f.depth()), f.depth());
  RandomVariable sum = RandomVariable::Zero(f.space().leaf_count());
  for (int n = 1; n <= m; ++n) {
    const RandomVariable d2 = (f.level(n) - f.level(n - 1)).array().square().matrix();
    sum += f.space().average_on_blocks(d2, n - 1);
  }
  return sum.cwiseSqrt();
}

Martingale stop(const Martingale& f, const StoppingTime& tau, StopShift shift) {
  const Eigen::Index leaves = f.space().leaf_count();
  if (tau.size() != leaves) throw ValidationError("stopping time length mismatch");
  std::vector<RandomVariable> levels(f.depth() + 1, RandomVariable(leaves));
  for (int n = 0; n <= f.depth(); ++n) {
    for (Eigen::Index i = 0; i < leaves; ++i) {
      if (shift == StopShift::None) {
        levels[n][i] = f.level(std::min(n, tau[i]))[i];
      } else {
        const int k = tau[i] == kNever ? n : std::min(n, tau[i] - 1);
        levels[n][i] = k < 0 ? 0.0 : f.level(k)[i];
      }
    }
  }
  return Martingale(f.space_ptr(), std::move(levels));
}

namespace {

std::uint64_t count_node(const FilteredSpace& space, int n, int b, std::uint64_t limit) {
  if (n == space.depth()) return 2;
  std::uint64_t product = 1;
  for (int child : space.children(n, b)) {
    const std::uint64_t c = count_node(space, n + 1, child, limit);
    if (c > limit || product > limit / c) return limit + 1;
    product *= c;
  }
  return std::min(product + 1, limit + 1);
}

struct Enumerator {
  const FilteredSpace& space;
  std::vector<int> current;
  std::vector<int> out;

  void run(std::vector<std::pair<int, int>> pending, std::size_t pos) {
    if (pos == pending.size()) {
      out.insert(out.end(), current.begin(), current.end());
      return;
    }
    const auto [n, b] = pending[pos];
    const Block& block = space.level(n)[b];
    for (int leaf : block) current[leaf] = n;
    run(pending, pos + 1);
    if (n == space.depth()) {
      for (int leaf : block) current[leaf] = kNever;
      run(std::move(pending), pos + 1);
      return;
    }
    std::vector<std::pair<int, int>> next(pending.begin(), pending.begin() + pos);
    for (int child : space.children(n, b)) next.emplace_back(n + 1, child);
    next.insert(next.end(), pending.begin() + pos + 1, pending.end());
    run(std::move(next), pos);
  }
};

void sample_node(const FilteredSpace& space, int n, int b, Rng& rng, std::vector<int>& out) {
  const Block& block = space.level(n)[b];
  const int depth = space.depth();
  if (rng.below(static_cast<std::uint64_t>(depth - n + 2)) == 0) {
    for (int leaf : block) out[leaf] = n;
    return;
  }
  if (n == depth) {
    for (int leaf : block) out[leaf] = kNever;
    return;
  }
  for (int child : space.children(n, b)) sample_node(space, n + 1, child, rng, out);
}

}  // namespace

std::uint64_t count_stopping_times(const FilteredSpace& space, std::uint64_t cap) {
  std::uint64_t product = 1;
  for (std::size_t b = 0; b < space.level(0).size(); ++b) {
    const std::uint64_t c = count_node(space, 0, static_cast<int>(b), cap);
    if (c > cap || product > cap / c) return cap + 1;
    product *= c;
  }
  return std::min(product, cap + 1);
}

std::vector<int> enumerate_stopping_levels(const FilteredSpace& space, std::uint64_t cap) {
  const std::uint64_t count = count_stopping_times(space, cap);
  if (count > cap)
    throw ResourceError("more than " + std::to_string(cap) +
                        " stopping times; use sampled mode");
  Enumerator e{space, std::vector<int>(space.leaf_count(), kNever), {}};
  e.out.reserve(count * space.leaf_count());
  std::vector<std::pair<int, int>> roots;
  for (std::size_t b = 0; b < space.level(0).size(); ++b) roots.emplace_back(0, static_cast<int>(b));
  e.run(std::move(roots), 0);
  return std::move(e.out);
}

std::vector<StoppingTime> enumerate_stopping_times(const FilteredSpace& space, std::uint64_t cap) {
  const std::vector<int> flat = enumerate_stopping_levels(space, cap);
  const auto leaves = static_cast<std::size_t>(space.leaf_count());
  std::vector<StoppingTime> out;
  out.reserve(flat.size() / leaves);
  for (std::size_t start = 0; start < flat.size(); start += leaves)
    out.emplace_back(std::vector<int>(flat.begin() + start, flat.begin() + start + leaves));
  return out;
}

std::vector<StoppingTime> sample_stopping_times(const FilteredSpace& space, std::size_t count,
                                                std::uint64_t seed) {
  if (count == 0) throw DomainError("sample count must be at least 1");
  const Eigen::Index leaves = space.leaf_count();
  std::vector<StoppingTime> out;
  out.push_back(StoppingTime::constant(leaves, 0));
  if (count >= 2) out.push_back(StoppingTime::constant(leaves, kNever));
  Rng rng(seed);
  while (out.size() < count) {
    std::vector<int> levels(leaves, kNever);
    for (std::size_t b = 0; b < space.level(0).size(); ++b)
      sample_node(space, 0, static_cast<int>(b), rng, levels);
    out.emplace_back(std::move(levels));
  }
  return out;
}

}  // namespace varhardy
