#include "varhardy/space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "varhardy/errors.hpp"

namespace varhardy {

namespace {

std::string where(int n, std::size_t b) {
  return "level " + std::to_string(n) + ", block " + std::to_string(b);
}

}  // namespace

FilteredSpace::FilteredSpace(Eigen::VectorXd leaf_probs, std::vector<Partition> levels)
    : probs_(std::move(leaf_probs)), levels_(std::move(levels)) {
  const Eigen::Index leaves = probs_.size();
  if (leaves == 0) throw ValidationError("space has no leaves");
  if (levels_.empty()) throw ValidationError("filtration has no levels");
  for (Eigen::Index i = 0; i < leaves; ++i) {
    if (!(probs_[i] > 0.0) || !std::isfinite(probs_[i]))
      throw ValidationError("leaf " + std::to_string(i) + " has nonpositive probability");
  }
  if (std::abs(probs_.sum() - 1.0) > kProbabilityTolerance)
    throw ValidationError("leaf probabilities sum to " + std::to_string(probs_.sum()) +
                          ", not 1");

  const int count = static_cast<int>(levels_.size());
  block_of_.assign(count, std::vector<int>(leaves, -1));
  block_probs_.resize(count);
  for (int n = 0; n < count; ++n) {
    const Partition& part = levels_[n];
    for (std::size_t b = 0; b < part.size(); ++b) {
      if (part[b].empty()) throw ValidationError(where(n, b) + " is empty");
      double mass = 0.0;
      for (int leaf : part[b]) {
        if (leaf < 0 || leaf >= leaves)
          throw ValidationError(where(n, b) + " names unknown leaf " + std::to_string(leaf));
        if (block_of_[n][leaf] != -1)
          throw ValidationError(where(n, b) + " overlaps another block at leaf " +
                                std::to_string(leaf));
        block_of_[n][leaf] = static_cast<int>(b);
        mass += probs_[leaf];
      }
      block_probs_[n].push_back(mass);
    }
    for (Eigen::Index i = 0; i < leaves; ++i) {
      if (block_of_[n][i] == -1)
        throw ValidationError("level " + std::to_string(n) + " does not cover leaf " +
                              std::to_string(i));
    }
  }

  children_.resize(count > 0 ? count - 1 : 0);
  for (int n = 0; n + 1 < count; ++n) {
    children_[n].resize(levels_[n].size());
    const Partition& fine = levels_[n + 1];
    for (std::size_t b = 0; b < fine.size(); ++b) {
      const int parent = block_of_[n][fine[b].front()];
      for (int leaf : fine[b]) {
        if (block_of_[n][leaf] != parent)
          throw ValidationError(where(n + 1, b) + " does not refine level " + std::to_string(n));
      }
      children_[n][parent].push_back(static_cast<int>(b));
    }
  }

  const Partition& last = levels_.back();
  for (std::size_t b = 0; b < last.size(); ++b) {
    if (last[b].size() != 1)
      throw ValidationError(where(count - 1, b) + " is not a singleton; terminal level must be discrete");
  }
}

double FilteredSpace::prob(std::span<const int> leaves) const {
  double mass = 0.0;
  for (int leaf : leaves) mass += probs_[leaf];
  return mass;
}

Eigen::VectorXd FilteredSpace::average_on_blocks(const Eigen::VectorXd& f, int n) const {
  const Partition& part = levels_[n];
  Eigen::VectorXd out(f.size());
  for (std::size_t b = 0; b < part.size(); ++b) {
    double acc = 0.0;
    for (int leaf : part[b]) acc += probs_[leaf] * f[leaf];
    const double avg = acc / block_probs_[n][b];
    for (int leaf : part[b]) out[leaf] = avg;
  }
  return out;
}

FilteredSpace validate_filtration(std::vector<Partition> levels, Eigen::VectorXd leaf_probs) {
  return FilteredSpace(std::move(leaf_probs), std::move(levels));
}

FilteredSpace build_dyadic_space(int depth, int max_depth) {
  if (depth < 0) throw ValidationError("negative depth");
  if (depth > max_depth)
    throw ResourceError("dyadic depth " + std::to_string(depth) + " exceeds maximum " +
                        std::to_string(max_depth));
  const int leaves = 1 << depth;
  std::vector<Partition> levels(depth + 1);
  for (int n = 0; n <= depth; ++n) {
    const int width = leaves >> n;
    for (int b = 0; b < (1 << n); ++b) {
      Block block(width);
      for (int i = 0; i < width; ++i) block[i] = b * width + i;
      levels[n].push_back(std::move(block));
    }
  }
  return FilteredSpace(Eigen::VectorXd::Constant(leaves, std::ldexp(1.0, -depth)),
                       std::move(levels));
}

FilteredSpace build_tree_space(int depth, const std::vector<double>& split_weights) {
  if (depth < 0) throw ValidationError("negative depth");
  if (split_weights.empty()) throw ValidationError("no split weights");
  const auto arity = static_cast<long long>(split_weights.size());
  long long leaves = 1;
  for (int n = 0; n < depth; ++n) {
    leaves *= arity;
    if (leaves > (1LL << kMaxDyadicDepth))
      throw ResourceError("tree space exceeds " + std::to_string(1LL << kMaxDyadicDepth) + " leaves");
  }
  Eigen::VectorXd probs(leaves);
  std::vector<Partition> levels(depth + 1);
  long long width = leaves;
  for (int n = 0; n <= depth; ++n) {
    for (long long start = 0; start < leaves; start += width) {
      Block block(width);
      for (long long i = 0; i < width; ++i) block[i] = static_cast<int>(start + i);
      levels[n].push_back(std::move(block));
    }
    width /= arity;
  }
  // Consecutive leaves share blocks, so the most significant digit is the
  // first split.
  for (long long i = 0; i < leaves; ++i) {
    double mass = 1.0;
    long long w = leaves;
    long long offset = i;
    for (int n = 0; n < depth; ++n) {
      w /= arity;
      mass *= split_weights[offset / w];
      offset %= w;
    }
    probs[i] = mass;
  }
  return FilteredSpace(std::move(probs), std::move(levels));
}

FilteredSpace refine_leaves(const FilteredSpace& space) {
  const Eigen::Index leaves = space.leaf_count();
  Eigen::VectorXd probs(2 * leaves);
  for (Eigen::Index i = 0; i < leaves; ++i) {
    probs[2 * i] = 0.5 * space.probs()[i];
    probs[2 * i + 1] = 0.5 * space.probs()[i];
  }
  std::vector<Partition> levels;
  for (const Partition& part : space.levels()) {
    Partition split;
    for (const Block& block : part) {
      Block doubled;
      for (int leaf : block) {
        doubled.push_back(2 * leaf);
        doubled.push_back(2 * leaf + 1);
      }
      split.push_back(std::move(doubled));
    }
    levels.push_back(std::move(split));
  }
  Partition discrete;
  for (Eigen::Index i = 0; i < 2 * leaves; ++i) discrete.push_back({static_cast<int>(i)});
  levels.push_back(std::move(discrete));
  return FilteredSpace(std::move(probs), std::move(levels));
}

Exponent::Exponent(Eigen::VectorXd values, bool allow_infinite)
    : values_(std::move(values)), allow_infinite_(allow_infinite) {
  if (values_.size() == 0) throw ValidationError("exponent has no values");
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (std::isnan(v) || !(v > 0.0))
      throw ValidationError("exponent value at leaf " + std::to_string(i) + " is not positive");
    if (std::isinf(v)) {
      if (!allow_infinite_)
        throw ValidationError("infinite exponent at leaf " + std::to_string(i) +
                              " outside mixed-modular mode");
      has_infinite_ = true;
    }
  }
  p_minus_ = values_.minCoeff();
  p_plus_ = values_.maxCoeff();
}

Exponent Exponent::constant(Eigen::Index leaves, double p) {
  return Exponent(Eigen::VectorXd::Constant(leaves, p), std::isinf(p));
}

double Exponent::p_minus(std::span<const int> leaves) const {
  double m = std::numeric_limits<double>::infinity();
  for (int i : leaves) m = std::min(m, values_[i]);
  return m;
}

double Exponent::p_plus(std::span<const int> leaves) const {
  double m = 0.0;
  for (int i : leaves) m = std::max(m, values_[i]);
  return m;
}

namespace {

void require_finite(const Exponent& p, const char* op) {
  if (p.has_infinite()) throw DomainError(std::string(op) + " requires a finite exponent");
}

void require_same_size(const FilteredSpace& space, const Exponent& p) {
  if (p.size() != space.leaf_count())
    throw ValidationError("exponent has " + std::to_string(p.size()) + " values for " +
                          std::to_string(space.leaf_count()) + " leaves");
}

}  // namespace

ConditionK condition_k(const FilteredSpace& space, const Exponent& p, ConditionKMode mode) {
  require_same_size(space, p);
  require_finite(p, "condition_k");
  const Eigen::Index leaves = space.leaf_count();
  const Eigen::VectorXd& probs = space.probs();
  // Singletons give P^0 = 1.
  ConditionK best{1.0, {0}};

  switch (mode) {
    case ConditionKMode::ExactPairwise:
      for (Eigen::Index i = 0; i < leaves; ++i) {
        for (Eigen::Index j = i + 1; j < leaves; ++j) {
          const double spread = std::abs(p[i] - p[j]);
          if (spread == 0.0) continue;
          const double value = std::pow(probs[i] + probs[j], -spread);
          if (value > best.value)
            best = {value, {static_cast<int>(i), static_cast<int>(j)}};
        }
      }
      break;
    case ConditionKMode::BruteForce: {
      if (leaves > kBruteForceMaxLeaves)
        throw ResourceError("brute-force condition K needs at most " +
                            std::to_string(kBruteForceMaxLeaves) + " leaves, got " +
                            std::to_string(leaves));
      const std::uint32_t subsets = 1u << leaves;
      for (std::uint32_t mask = 1; mask < subsets; ++mask) {
        double mass = 0.0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (Eigen::Index i = 0; i < leaves; ++i) {
          if (mask & (1u << i)) {
            mass += probs[i];
            lo = std::min(lo, p[i]);
            hi = std::max(hi, p[i]);
          }
        }
        if (hi == lo) continue;
        const double value = std::pow(mass, lo - hi);
        if (value > best.value) {
          best.value = value;
          best.witness.clear();
          for (Eigen::Index i = 0; i < leaves; ++i)
            if (mask & (1u << i)) best.witness.push_back(static_cast<int>(i));
        }
      }
      break;
    }
    case ConditionKMode::Blocks:
      for (int n = 0; n < space.level_count(); ++n) {
        const Partition& part = space.level(n);
        for (std::size_t b = 0; b < part.size(); ++b) {
          const double spread = p.p_plus(part[b]) - p.p_minus(part[b]);
          if (spread == 0.0) continue;
          const double value = std::pow(space.block_prob(n, static_cast<int>(b)), -spread);
          if (value > best.value) best = {value, part[b]};
        }
      }
      break;
  }
  return best;
}

double aoyama_c(const FilteredSpace& space, const Exponent& p) {
  require_same_size(space, p);
  const Eigen::VectorXd recip = p.values().cwiseInverse();
  double c = 1.0;
  for (int n = 0; n < space.level_count(); ++n) {
    const Eigen::VectorXd cond = space.average_on_blocks(recip, n);
    c = std::max(c, recip.cwiseQuotient(cond).maxCoeff());
  }
  return c;
}

namespace {

void require_same_size(const Exponent& p, const Exponent& q) {
  if (p.size() != q.size()) throw ValidationError("exponents differ in length");
}

}  // namespace

Exponent exponent_sum(const Exponent& p, const Exponent& q) {
  require_same_size(p, q);
  return Exponent(p.values() + q.values(), p.allows_infinite() || q.allows_infinite());
}

Exponent exponent_reciprocal(const Exponent& p) {
  require_finite(p, "reciprocal");
  return Exponent(p.values().cwiseInverse());
}

Exponent conjugate_exponent(const Exponent& p) {
  if (!(p.p_minus() > 1.0)) throw DomainError("conjugate exponent requires p_- > 1");
  require_finite(p, "conjugate");
  Eigen::VectorXd out = p.values().array() / (p.values().array() - 1.0);
  return Exponent(std::move(out));
}

Exponent harmonic_sum(const Exponent& p, const Exponent& q) {
  require_same_size(p, q);
  Eigen::VectorXd out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (std::isinf(p[i]))
      out[i] = q[i];
    else if (std::isinf(q[i]))
      out[i] = p[i];
    else
      out[i] = p[i] * q[i] / (p[i] + q[i]);
  }
  return Exponent(std::move(out), p.allows_infinite() || q.allows_infinite());
}

Exponent exponent_algebra(ExponentOp op, const Exponent& p, const Exponent* q) {
  switch (op) {
    case ExponentOp::Reciprocal:
      return exponent_reciprocal(p);
    case ExponentOp::Conjugate:
      return conjugate_exponent(p);
    case ExponentOp::Sum:
    case ExponentOp::HarmonicSum:
      if (q == nullptr) throw DomainError("binary exponent operation needs a second exponent");
      return op == ExponentOp::Sum ? exponent_sum(p, *q) : harmonic_sum(p, *q);
  }
  throw DomainError("unknown exponent operation");
}

}  // namespace varhardy
