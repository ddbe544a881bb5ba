#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "varhardy/bmo.hpp"
#include "varhardy/io.hpp"
#include "varhardy/martingale.hpp"
#include "varhardy/rng.hpp"
#include "varhardy/space.hpp"

namespace varhardy {

enum class SpaceKind { Dyadic, Tree };

struct SpaceSpec {
  SpaceKind kind = SpaceKind::Dyadic;
  int depth = 3;
  std::vector<double> split_weights;  ///< Tree only
};

enum class ExponentLaw { Constant, TwoBlock, IidUniform };

/// Constant uses lo. TwoBlock puts lo on the first half of the leaves and hi
/// on the rest. IidUniform draws each leaf from [lo, hi].
struct ExponentSpec {
  ExponentLaw law = ExponentLaw::IidUniform;
  double lo = 1.1;
  double hi = 3.0;
};

/// Cycle rotates Normal, Uniform, TwoPoint by trial index.
enum class MartingaleLaw { Normal, Uniform, TwoPoint, Cycle };

/// The exponent is drawn once per configuration from the stream
/// derive_seed(seed, kExponentStream); trial i draws its martingale from
/// derive_seed(seed, i).
struct TrialConfig {
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  SpaceSpec space;
  ExponentSpec exponent;
  MartingaleLaw law = MartingaleLaw::Cycle;
};

inline constexpr std::uint64_t kExponentStream = 0xe4f0'0000'0000'0001ULL;

void validate_config(const TrialConfig& config);

std::shared_ptr<const FilteredSpace> build_space(const SpaceSpec& spec);

Exponent generate_exponent(const FilteredSpace& space, const ExponentSpec& spec, Rng& rng);
Exponent config_exponent(const TrialConfig& config, const FilteredSpace& space);

/// Terminal values drawn per law, centered on every level-0 block, levels by
/// conditioning, f_0 set to exactly 0.
Martingale generate_martingale(std::shared_ptr<const FilteredSpace> space, MartingaleLaw law,
                               Rng& rng);
Martingale trial_martingale(const TrialConfig& config, std::shared_ptr<const FilteredSpace> space,
                            std::size_t trial);

/// Dyadic depths 1..6 and a ternary tree of depth 3, each crossed with
/// constant 2, two-block (1.1, 3) and iid uniform [1.1, 3].
std::vector<TrialConfig> default_matrix(std::uint64_t seed, std::size_t trials,
                                        int max_dyadic_depth = 6);

/// Same leaves and filtration with probabilities multiplied by 1 + eps u,
/// u uniform in [-1, 1], then renormalized.
std::shared_ptr<const FilteredSpace> perturbed_space(const FilteredSpace& space, double eps,
                                                     std::uint64_t seed);

struct Quantile {
  double q = 0.0;
  double value = 0.0;
};

struct ConstantReport {
  std::string quantity;
  std::string constant_label;
  std::vector<double> ratios;
  double max = 0.0;
  double mean = 0.0;
  std::vector<Quantile> quantiles;
  Json witness;
  std::size_t checks = 0;
  std::size_t violations = 0;
  std::size_t skipped = 0;
  Json details = Json::object();
  std::vector<std::pair<double, double>> curve;
};

/// Fills max, mean and the 0.5/0.9/0.99 quantiles from ratios.
void summarize(ConstantReport& report);

Json report_to_json(const ConstantReport& report);
/// x,y columns when the report carries a curve, otherwise index,ratio.
std::string report_to_csv(const ConstantReport& report);

Json config_to_json(const TrialConfig& config);

/// Recomputes the ratio recorded for a witness instance.
double replay_witness(const Json& witness);

/// Distinct values of Mf, midpoints between consecutive ones and half the
/// smallest. Values within 1e-12 relative of each other count as one level.
std::vector<double> first_passage_grid(const Martingale& f);

/// P(Mf > lambda) / E (|f_N| / lambda)^p per lambda, checked against the
/// proof-chain constant p_+(A) / p_-(A), A = {Mf > lambda}, when p_-(A) >= 1.
ConstantReport weak_type_check(const Martingale& f, const Exponent& p,
                               std::optional<std::vector<double>> lambda_grid = std::nullopt);
ConstantReport weak_type_sweep(const TrialConfig& config);

/// ||Mf||_p / ||f_N||_p per trial. Requires p_- > 1. With constant p = 2
/// every ratio must stay below 2.
ConstantReport doob_strong_check(const TrialConfig& config, double perturbation = 1e-6);

/// Largest (avg_B |f|)^{p(x)/p_-} / (K (avg_B |f|^{p(x)/p_-} + 1)) over
/// filtration blocks B and x in B, after rescaling to ||f||_p <= 1/2.
ConstantReport lemma34_check(const FilteredSpace& space, const RandomVariable& f,
                             const Exponent& p);
ConstantReport lemma34_sweep(const TrialConfig& config);

struct JnOptions {
  bool refinement = false;
  bool perturbation = false;
  double perturbation_eps = 1e-6;
};

/// BMO_p / BMO_1 and its reciprocal over exhaustively enumerated stopping
/// times. The reciprocal is checked against
/// 2 max_S ||chi_S||_p ||chi_S||_{p'} / P(S).
ConstantReport jn_equivalence(const TrialConfig& config, const JnOptions& opts = {});

/// Distribution curve ||chi_{tau < inf, |f - f^{tau-1}| >= t}||_p / ||chi_{tau < inf}||_p
/// against 4 exp(-C2 t / ||f||_BMO_1) with C2 = ln 2 / (2 C), where C is the
/// largest |f - f^{tau-1}| / ||f||_BMO_1.
ConstantReport exp_jn_curve(const Martingale& f, const Exponent& p,
                            std::optional<std::vector<double>> t_grid = std::nullopt,
                            const SupOptions& opts = {});
ConstantReport exp_jn_sweep(const TrialConfig& config, const SupOptions& opts = {});

inline constexpr int kNakaiMaxDepth = 1000;

/// h_m = sum_{n <= m} c_n - c_{m+1} with c_n = 1 / ln(2^n e).
double nakai_h(int m);

/// Spine space: leaves B_m minus B_{m+1} for m < D with mass 2^{-(m+1)} and
/// B_D with mass 2^{-D}, each B_n a filtration block at level n.
std::shared_ptr<const FilteredSpace> spine_space(int depth);

ConstantReport nakai_sadasue(int max_n);

/// max over (n, leaf) of |E_n f|^{p} / E_n(|f|^p).
struct Violation33 {
  double ratio = 0.0;
  int level = 0;
  int leaf = 0;
};
Violation33 violation_33_ratio(const FilteredSpace& space, const RandomVariable& f,
                               const Exponent& p);
ConstantReport violation_33_search(const TrialConfig& config);

/// Decomposition round trip and the norm bounds around it, per trial.
ConstantReport decomposition_sweep(const TrialConfig& config);

}  // namespace varhardy
