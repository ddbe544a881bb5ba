#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace varhardy {

/// A measurable function on the leaves, one value per finest atom.
using RandomVariable = Eigen::VectorXd;

using Block = std::vector<int>;
using Partition = std::vector<Block>;

inline constexpr int kMaxDyadicDepth = 24;
inline constexpr double kProbabilityTolerance = 1e-12;

/// Finite probability space with an atom filtration.
///
/// Leaves are the finest atoms. Level n is a partition of the leaf indices;
/// level n+1 refines level n and the last level is discrete. Immutable once
/// constructed.
class FilteredSpace {
 public:
  /// Validates every invariant and throws ValidationError naming the
  /// offending level or block. Probabilities are never renormalized.
  FilteredSpace(Eigen::VectorXd leaf_probs, std::vector<Partition> levels);

  Eigen::Index leaf_count() const { return probs_.size(); }
  /// Index N of the terminal level.
  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  int level_count() const { return static_cast<int>(levels_.size()); }

  const Eigen::VectorXd& probs() const { return probs_; }
  const std::vector<Partition>& levels() const { return levels_; }
  const Partition& level(int n) const { return levels_[n]; }

  int block_of(int n, Eigen::Index leaf) const { return block_of_[n][leaf]; }
  double block_prob(int n, int b) const { return block_probs_[n][b]; }
  /// Blocks of level n+1 contained in block b of level n.
  const std::vector<int>& children(int n, int b) const { return children_[n][b]; }

  double prob(std::span<const int> leaves) const;

  /// E(f | F_n): the P-weighted average of f over each level-n block.
  Eigen::VectorXd average_on_blocks(const Eigen::VectorXd& f, int n) const;

 private:
  Eigen::VectorXd probs_;
  std::vector<Partition> levels_;
  std::vector<std::vector<int>> block_of_;
  std::vector<std::vector<double>> block_probs_;
  std::vector<std::vector<std::vector<int>>> children_;
};

FilteredSpace validate_filtration(std::vector<Partition> levels, Eigen::VectorXd leaf_probs);

/// Dyadic filtration on 2^depth equiprobable leaves.
FilteredSpace build_dyadic_space(int depth, int max_depth = kMaxDyadicDepth);

/// Homogeneous tree: each block splits into split_weights.size() children
/// carrying the given relative masses. Weights must sum to one.
FilteredSpace build_tree_space(int depth, const std::vector<double>& split_weights);

/// Same filtration with every leaf split into two halves of equal mass and a
/// new discrete terminal level appended.
FilteredSpace refine_leaves(const FilteredSpace& space);

/// Variable exponent p(.), one value per leaf.
///
/// Values must be positive. +infinity is admitted only when the exponent is
/// built with allow_infinite, which selects the mixed modular.
class Exponent {
 public:
  explicit Exponent(Eigen::VectorXd values, bool allow_infinite = false);

  static Exponent constant(Eigen::Index leaves, double p);

  const Eigen::VectorXd& values() const { return values_; }
  double operator[](Eigen::Index i) const { return values_[i]; }
  Eigen::Index size() const { return values_.size(); }

  bool allows_infinite() const { return allow_infinite_; }
  bool has_infinite() const { return has_infinite_; }
  bool is_constant() const { return p_minus_ == p_plus_; }

  double p_minus() const { return p_minus_; }
  double p_plus() const { return p_plus_; }
  double p_minus(std::span<const int> leaves) const;
  double p_plus(std::span<const int> leaves) const;

 private:
  Eigen::VectorXd values_;
  bool allow_infinite_;
  bool has_infinite_ = false;
  double p_minus_;
  double p_plus_;
};

enum class ConditionKMode { ExactPairwise, BruteForce, Blocks };

inline constexpr int kBruteForceMaxLeaves = 20;

struct ConditionK {
  double value;
  std::vector<int> witness;
};

/// Smallest K with P(A)^(p_-(A) - p_+(A)) <= K over nonempty measurable A.
///
/// ExactPairwise scans leaf pairs. For any A let i minimize and j maximize p
/// on A. Then P(A) >= P_i + P_j, the spread on {i, j} equals the spread on A,
/// and t -> t^(-spread) is nonincreasing on (0, 1], so {i, j} dominates A.
/// BruteForce enumerates all subsets and is the oracle for ExactPairwise.
/// Blocks restricts A to filtration blocks.
ConditionK condition_k(const FilteredSpace& space, const Exponent& p,
                       ConditionKMode mode = ConditionKMode::ExactPairwise);

/// Smallest C with 1/p <= C E(1/p | F_n) at every level n.
double aoyama_c(const FilteredSpace& space, const Exponent& p);

enum class ExponentOp { Sum, Reciprocal, Conjugate, HarmonicSum };

Exponent exponent_sum(const Exponent& p, const Exponent& q);
Exponent exponent_reciprocal(const Exponent& p);
/// p' with 1/p + 1/p' = 1. Requires p_- > 1.
Exponent conjugate_exponent(const Exponent& p);
/// r with 1/r = 1/p + 1/q.
Exponent harmonic_sum(const Exponent& p, const Exponent& q);
/// Dispatcher over the four operations. q is required for the binary ones.
Exponent exponent_algebra(ExponentOp op, const Exponent& p, const Exponent* q = nullptr);

}  // namespace varhardy
