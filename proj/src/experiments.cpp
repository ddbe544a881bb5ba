#include "varhardy/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "varhardy/errors.hpp"
#include "varhardy/hardy.hpp"
#include "varhardy/varlp.hpp"

namespace varhardy {

namespace {

constexpr std::uint64_t kPerturbStream = 0xe4f0'0000'0000'0002ULL;
constexpr double kScaleFactor = 10.0;
constexpr double kLevelTolerance = 1e-12;

Martingale scaled(const Martingale& f, double c) {
  std::vector<RandomVariable> levels;
  levels.reserve(f.levels().size());
  for (const RandomVariable& level : f.levels()) levels.push_back(c * level);
  return Martingale(f.space_ptr(), std::move(levels));
}

/// Levels by conditioning with f_0 replaced by exact zeros.
Martingale centered_from_terminal(std::shared_ptr<const FilteredSpace> space,
                                  const RandomVariable& terminal) {
  const int depth = space->depth();
  std::vector<RandomVariable> levels(depth + 1);
  levels[depth] = terminal;
  for (int n = depth - 1; n >= 0; --n) levels[n] = space->average_on_blocks(terminal, n);
  levels[0].setZero();
  return Martingale(std::move(space), std::move(levels));
}

bool relative_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

std::string set_key(const std::vector<int>& subset, Eigen::Index leaves) {
  std::string key(static_cast<std::size_t>(leaves), '0');
  for (int i : subset) key[static_cast<std::size_t>(i)] = '1';
  return key;
}

Json instance_json(const char* kind, const FilteredSpace& space, const Exponent& p) {
  return {{"kind", kind}, {"space", space_to_json(space)}, {"exponent", exponent_to_json(p)}};
}

const char* law_name(MartingaleLaw law) {
  switch (law) {
    case MartingaleLaw::Normal: return "normal";
    case MartingaleLaw::Uniform: return "uniform";
    case MartingaleLaw::TwoPoint: return "two-point";
    case MartingaleLaw::Cycle: return "cycle";
  }
  return "cycle";
}

const char* exponent_law_name(ExponentLaw law) {
  switch (law) {
    case ExponentLaw::Constant: return "constant";
    case ExponentLaw::TwoBlock: return "two-block";
    case ExponentLaw::IidUniform: return "iid-uniform";
  }
  return "iid-uniform";
}

/// Picks the witness of the largest ratio; ties keep the earlier one.
struct WitnessTracker {
  double best = -std::numeric_limits<double>::infinity();
  Json witness;
  void offer(double ratio, const Json& candidate) {
    if (ratio > best) {
      best = ratio;
      witness = candidate;
    }
  }
};

}  // namespace

void validate_config(const TrialConfig& config) {
  if (config.trials < 1) throw ValidationError("trials must be at least 1");
  const ExponentSpec& e = config.exponent;
  if (!(e.lo > 0.0) || !std::isfinite(e.lo) || !std::isfinite(e.hi) ||
      (e.law != ExponentLaw::Constant && e.hi < e.lo))
    throw ValidationError("exponent range must satisfy 0 < lo <= hi < inf");
  if (config.space.depth < 0) throw ValidationError("space depth must be nonnegative");
}

std::shared_ptr<const FilteredSpace> build_space(const SpaceSpec& spec) {
  if (spec.kind == SpaceKind::Dyadic)
    return std::make_shared<const FilteredSpace>(build_dyadic_space(spec.depth));
  return std::make_shared<const FilteredSpace>(build_tree_space(spec.depth, spec.split_weights));
}

Exponent generate_exponent(const FilteredSpace& space, const ExponentSpec& spec, Rng& rng) {
  const Eigen::Index leaves = space.leaf_count();
  Eigen::VectorXd values(leaves);
  switch (spec.law) {
    case ExponentLaw::Constant:
      values.setConstant(spec.lo);
      break;
    case ExponentLaw::TwoBlock:
      for (Eigen::Index i = 0; i < leaves; ++i) values[i] = 2 * i < leaves ? spec.lo : spec.hi;
      break;
    case ExponentLaw::IidUniform:
      for (Eigen::Index i = 0; i < leaves; ++i) values[i] = rng.uniform(spec.lo, spec.hi);
      break;
  }
  return Exponent(std::move(values));
}

Exponent config_exponent(const TrialConfig& config, const FilteredSpace& space) {
  Rng rng(derive_seed(config.seed, kExponentStream));
  return generate_exponent(space, config.exponent, rng);
}

Martingale generate_martingale(std::shared_ptr<const FilteredSpace> space, MartingaleLaw law,
                               Rng& rng) {
  if (law == MartingaleLaw::Cycle) law = MartingaleLaw::Normal;
  const Eigen::Index leaves = space->leaf_count();
  RandomVariable terminal(leaves);
  for (Eigen::Index i = 0; i < leaves; ++i) {
    switch (law) {
      case MartingaleLaw::Normal: terminal[i] = rng.normal(); break;
      case MartingaleLaw::Uniform: terminal[i] = rng.uniform(-1.0, 1.0); break;
      default: terminal[i] = rng.below(2) == 0 ? -1.0 : 1.0; break;
    }
  }
  terminal -= space->average_on_blocks(terminal, 0);
  return centered_from_terminal(std::move(space), terminal);
}

Martingale trial_martingale(const TrialConfig& config, std::shared_ptr<const FilteredSpace> space,
                            std::size_t trial) {
  MartingaleLaw law = config.law;
  if (law == MartingaleLaw::Cycle) law = static_cast<MartingaleLaw>(trial % 3);
  Rng rng(derive_seed(config.seed, trial));
  return generate_martingale(std::move(space), law, rng);
}

std::vector<TrialConfig> default_matrix(std::uint64_t seed, std::size_t trials,
                                        int max_dyadic_depth) {
  std::vector<SpaceSpec> spaces;
  for (int d = 1; d <= max_dyadic_depth; ++d) spaces.push_back({SpaceKind::Dyadic, d, {}});
  spaces.push_back({SpaceKind::Tree, 3, {0.2, 0.3, 0.5}});
  const std::vector<ExponentSpec> exponents = {{ExponentLaw::Constant, 2.0, 2.0},
                                               {ExponentLaw::TwoBlock, 1.1, 3.0},
                                               {ExponentLaw::IidUniform, 1.1, 3.0}};
  std::vector<TrialConfig> out;
  for (const SpaceSpec& s : spaces) {
    for (const ExponentSpec& e : exponents) {
      TrialConfig c;
      c.seed = derive_seed(seed, out.size());
      c.trials = trials;
      c.space = s;
      c.exponent = e;
      out.push_back(c);
    }
  }
  return out;
}

std::shared_ptr<const FilteredSpace> perturbed_space(const FilteredSpace& space, double eps,
                                                     std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd probs = space.probs();
  for (Eigen::Index i = 0; i < probs.size(); ++i) probs[i] *= 1.0 + eps * rng.uniform(-1.0, 1.0);
  probs /= probs.sum();
  return std::make_shared<const FilteredSpace>(std::move(probs), space.levels());
}

void summarize(ConstantReport& report) {
  const std::vector<double>& r = report.ratios;
  report.quantiles.clear();
  if (r.empty()) {
    report.max = report.mean = 0.0;
    return;
  }
  std::vector<double> sorted = r;
  std::sort(sorted.begin(), sorted.end());
  report.max = sorted.back();
  double sum = 0.0;
  for (double x : r) sum += x;
  report.mean = sum / static_cast<double>(r.size());
  for (double q : {0.5, 0.9, 0.99}) {
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    report.quantiles.push_back({q, sorted[std::max<std::size_t>(rank, 1) - 1]});
  }
}

Json report_to_json(const ConstantReport& report) {
  Json quantiles = Json::array();
  for (const Quantile& q : report.quantiles) quantiles.push_back({{"q", q.q}, {"value", q.value}});
  Json curve = Json::array();
  for (const auto& [x, y] : report.curve) curve.push_back({x, y});
  return {{"quantity", report.quantity},
          {"constant_label", report.constant_label},
          {"ratios", report.ratios},
          {"max", report.max},
          {"mean", report.mean},
          {"quantiles", std::move(quantiles)},
          {"checks", report.checks},
          {"violations", report.violations},
          {"skipped", report.skipped},
          {"witness", report.witness},
          {"details", report.details},
          {"curve", std::move(curve)}};
}

std::string report_to_csv(const ConstantReport& report) {
  std::ostringstream out;
  if (!report.curve.empty()) {
    out << "x,y\n";
    for (const auto& [x, y] : report.curve) out << csv_number(x) << ',' << csv_number(y) << '\n';
  } else {
    out << "index,ratio\n";
    for (std::size_t i = 0; i < report.ratios.size(); ++i)
      out << i << ',' << csv_number(report.ratios[i]) << '\n';
  }
  return out.str();
}

Json config_to_json(const TrialConfig& config) {
  return {{"seed", config.seed},
          {"trials", config.trials},
          {"space",
           {{"kind", config.space.kind == SpaceKind::Dyadic ? "dyadic" : "tree"},
            {"depth", config.space.depth},
            {"split_weights", config.space.split_weights}}},
          {"exponent",
           {{"law", exponent_law_name(config.exponent.law)},
            {"lo", config.exponent.lo},
            {"hi", config.exponent.hi}}},
          {"law", law_name(config.law)}};
}

// Weak type.

std::vector<double> first_passage_grid(const Martingale& f) {
  const RandomVariable mf = maximal(f);
  std::vector<double> values;
  for (Eigen::Index i = 0; i < mf.size(); ++i)
    if (mf[i] > 0.0) values.push_back(mf[i]);
  std::sort(values.begin(), values.end());
  // A cluster of values within rounding of each other is one level, kept at its maximum.
  std::vector<double> levels;
  for (double v : values) {
    if (!levels.empty() && v - levels.back() <= kLevelTolerance * v)
      levels.back() = v;
    else
      levels.push_back(v);
  }
  values = std::move(levels);
  std::vector<double> grid;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) grid.push_back(0.5 * (values[i - 1] + values[i]));
    grid.push_back(values[i]);
  }
  if (!values.empty()) grid.insert(grid.begin(), 0.5 * values.front());
  return grid;
}

ConstantReport weak_type_check(const Martingale& f, const Exponent& p,
                               std::optional<std::vector<double>> lambda_grid) {
  const FilteredSpace& space = f.space();
  const std::vector<double> grid = lambda_grid ? *lambda_grid : first_passage_grid(f);
  const RandomVariable mf = maximal(f);
  const RandomVariable& terminal = f.terminal();
  const Eigen::VectorXd& probs = space.probs();

  ConstantReport report;
  report.quantity = "weak-type";
  report.constant_label = "proof-chain constant p+(A)/p-(A)";
  Json bounds = Json::array();
  WitnessTracker tracker;
  for (double lambda : grid) {
    if (!(lambda > 0.0)) throw DomainError("weak-type grid needs lambda > 0");
    std::vector<int> a;
    for (Eigen::Index i = 0; i < mf.size(); ++i)
      if (mf[i] > lambda) a.push_back(static_cast<int>(i));
    const double pa = a.empty() ? 0.0 : space.prob(a);
    double integral = 0.0;
    for (Eigen::Index i = 0; i < terminal.size(); ++i) {
      const double x = std::abs(terminal[i]) / lambda;
      if (x != 0.0) integral += probs[i] * std::pow(x, p[i]);
    }
    const double ratio = pa == 0.0 ? 0.0 : pa / integral;
    double bound = std::numeric_limits<double>::infinity();
    if (pa > 0.0) {
      const double lo = p.p_minus(a);
      bound = p.p_plus(a) / lo;
      if (lo >= 1.0) {
        ++report.checks;
        if (ratio > bound + kAssertTolerance) ++report.violations;
      }
    }
    bounds.push_back(std::isinf(bound) ? Json(nullptr) : Json(bound));
    report.ratios.push_back(ratio);
    report.curve.emplace_back(lambda, ratio);
    Json w = instance_json("weak-type", space, p);
    w["martingale"] = martingale_to_json(f);
    w["lambda"] = lambda;
    tracker.offer(ratio, w);
  }
  report.details["lambda"] = grid;
  report.details["bound"] = std::move(bounds);
  report.witness = tracker.witness;
  summarize(report);
  return report;
}

ConstantReport weak_type_sweep(const TrialConfig& config) {
  validate_config(config);
  const auto space = build_space(config.space);
  const Exponent p = config_exponent(config, *space);
  ConstantReport report;
  report.quantity = "weak-type";
  report.constant_label = "proof-chain constant p+(A)/p-(A)";
  WitnessTracker tracker;
  std::size_t scale_mismatch = 0;
  for (std::size_t t = 0; t < config.trials; ++t) {
    const Martingale f = trial_martingale(config, space, t);
    const std::vector<double> grid = first_passage_grid(f);
    if (grid.empty()) {
      ++report.skipped;
      continue;
    }
    const ConstantReport single = weak_type_check(f, p, grid);
    std::vector<double> grid10;
    for (double x : grid) grid10.push_back(kScaleFactor * x);
    const ConstantReport single10 = weak_type_check(scaled(f, kScaleFactor), p, grid10);
    for (std::size_t i = 0; i < single.ratios.size(); ++i)
      if (!relative_close(single.ratios[i], single10.ratios[i], kAssertTolerance)) ++scale_mismatch;
    report.checks += single.checks;
    report.violations += single.violations;
    report.ratios.push_back(single.max);
    if (single.max > tracker.best) report.curve = single.curve;
    tracker.offer(single.max, single.witness);
  }
  report.violations += scale_mismatch;
  report.details["config"] = config_to_json(config);
  report.details["scale_mismatches"] = scale_mismatch;
  report.witness = tracker.witness;
  summarize(report);
  return report;
}

// Doob strong type.

namespace {

struct DoobRun {
  std::vector<double> ratios;
  std::vector<std::size_t> trial_of;
  std::size_t scale_mismatch = 0;
  std::size_t skipped = 0;
};

DoobRun doob_run(const TrialConfig& config, std::shared_ptr<const FilteredSpace> space,
                 const Exponent& p) {
  DoobRun run;
  for (std::size_t t = 0; t < config.trials; ++t) {
    const Martingale f = trial_martingale(config, space, t);
    const double nf = norm(*space, f.terminal(), p);
    if (nf == 0.0) {
      ++run.skipped;
      continue;
    }
    const double ratio = norm(*space, maximal(f), p) / nf;
    const Martingale f10 = scaled(f, kScaleFactor);
    const double ratio10 = norm(*space, maximal(f10), p) / norm(*space, f10.terminal(), p);
    if (!relative_close(ratio, ratio10, kAssertTolerance)) ++run.scale_mismatch;
    run.ratios.push_back(ratio);
    run.trial_of.push_back(t);
  }
  return run;
}

}  // namespace

ConstantReport doob_strong_check(const TrialConfig& config, double perturbation) {
  validate_config(config);
  const auto space = build_space(config.space);
  const Exponent p = config_exponent(config, *space);
  if (!(p.p_minus() > 1.0)) throw DomainError("strong type needs p_- > 1");
  const ConditionK k = condition_k(*space, p);
  if (!std::isfinite(k.value)) throw DomainError("condition K is not finite");

  ConstantReport report;
  report.quantity = "doob-strong";
  report.constant_label = "empirical envelope";
  const DoobRun run = doob_run(config, space, p);
  report.ratios = run.ratios;
  report.skipped = run.skipped;
  report.violations += run.scale_mismatch;
  report.checks = run.ratios.size();
  const bool classical = p.is_constant() && p.p_minus() == 2.0;
  if (classical) {
    for (double r : run.ratios)
      if (r > 2.0 + kAssertTolerance) ++report.violations;
  }
  summarize(report);

  WitnessTracker tracker;
  for (std::size_t i = 0; i < run.ratios.size(); ++i) {
    if (run.ratios[i] > tracker.best) {
      Json w = instance_json("doob", *space, p);
      w["martingale"] = martingale_to_json(trial_martingale(config, space, run.trial_of[i]));
      tracker.offer(run.ratios[i], w);
    }
  }
  report.witness = tracker.witness;
  report.details["config"] = config_to_json(config);
  report.details["condition_k"] = k.value;
  report.details["classical_bound"] = classical ? Json(2.0) : Json(nullptr);
  report.details["scale_mismatches"] = run.scale_mismatch;
  if (perturbation > 0.0 && !run.ratios.empty()) {
    const auto moved = perturbed_space(*space, perturbation, derive_seed(config.seed, kPerturbStream));
    const DoobRun prun = doob_run(config, moved, p);
    double pmax = 0.0;
    for (double r : prun.ratios) pmax = std::max(pmax, r);
    const double change = pmax / report.max - 1.0;
    const bool stable = std::abs(change) <= 0.1;
    if (!stable) ++report.violations;
    report.details["perturbation"] = {
        {"eps", perturbation}, {"max", pmax}, {"relative_change", change}, {"stable", stable}};
  }
  return report;
}

// Pointwise block inequality.

ConstantReport lemma34_check(const FilteredSpace& space, const RandomVariable& f,
                             const Exponent& p) {
  if (f.size() != space.leaf_count()) throw ValidationError("function length mismatch");
  ConstantReport report;
  report.quantity = "lemma34";
  report.constant_label = "K from condition (P(A)^(p-(A)-p+(A)) <= K)";
  const double nf = norm(space, f, p);
  const double rescale = nf > 0.5 ? 0.5 / nf : 1.0;
  const RandomVariable g = (f.cwiseAbs() * rescale).eval();
  const double k = condition_k(space, p).value;
  const double pm = p.p_minus();
  const Eigen::VectorXd& probs = space.probs();

  double best = 0.0;
  int best_level = 0, best_leaf = 0;
  for (int n = 0; n <= space.depth(); ++n) {
    const Partition& part = space.level(n);
    for (std::size_t b = 0; b < part.size(); ++b) {
      const Block& block = part[b];
      const double pb = space.block_prob(n, static_cast<int>(b));
      double mass = 0.0, powered = 0.0;
      for (int y : block) {
        mass += probs[y] * g[y];
        if (g[y] != 0.0) powered += probs[y] * std::pow(g[y], p[y] / pm);
      }
      const double avg = mass / pb;
      const double rhs = k * (powered / pb + 1.0);
      for (int x : block) {
        const double lhs = avg == 0.0 ? 0.0 : std::pow(avg, p[x] / pm);
        const double ratio = lhs / rhs;
        ++report.checks;
        if (ratio > 1.0 + kAssertTolerance) ++report.violations;
        if (ratio > best) {
          best = ratio;
          best_level = n;
          best_leaf = x;
        }
      }
    }
  }
  report.ratios.push_back(best);
  Json w = instance_json("lemma34", space, p);
  w["function"] = vector_to_json(f);
  report.witness = w;
  report.details = {{"rescale", rescale}, {"k", k}, {"level", best_level}, {"leaf", best_leaf}};
  summarize(report);
  return report;
}

ConstantReport lemma34_sweep(const TrialConfig& config) {
  validate_config(config);
  const auto space = build_space(config.space);
  const Exponent p = config_exponent(config, *space);
  ConstantReport report;
  report.quantity = "lemma34";
  report.constant_label = "K from condition (P(A)^(p-(A)-p+(A)) <= K)";
  WitnessTracker tracker;
  for (std::size_t t = 0; t < config.trials; ++t) {
    const Martingale f = trial_martingale(config, space, t);
    const ConstantReport single = lemma34_check(*space, f.terminal(), p);
    report.checks += single.checks;
    report.violations += single.violations;
    report.ratios.push_back(single.max);
    tracker.offer(single.max, single.witness);
  }
  report.witness = tracker.witness;
  report.details["config"] = config_to_json(config);
  report.details["k"] = condition_k(*space, p).value;
  summarize(report);
  return report;
}

// John-Nirenberg equivalence.

namespace {

Exponent holder_conjugate(const Exponent& p) {
  Eigen::VectorXd values(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i)
    values[i] = p[i] == 1.0 ? std::numeric_limits<double>::infinity() : p[i] / (p[i] - 1.0);
  return Exponent(std::move(values), true);
}

double jn_lower_envelope(const FilteredSpace& space, const Exponent& p,
                         const StoppingFamily& family) {
  const Exponent q = holder_conjugate(p);
  std::unordered_map<std::string, bool> seen;
  double best = 0.0;
  std::vector<int> subset;
  for (std::size_t c = 0; c < family.size(); ++c) {
    const std::span<const int> tau = family.at(c);
    subset.clear();
    for (std::size_t i = 0; i < tau.size(); ++i)
      if (tau[i] != kNever) subset.push_back(static_cast<int>(i));
    if (subset.empty()) continue;
    if (!seen.emplace(set_key(subset, space.leaf_count()), true).second) continue;
    const double ps = space.prob(subset);
    if (ps == 0.0) continue;
    best = std::max(best, indicator_norm(space, subset, p) * indicator_norm(space, subset, q) / ps);
  }
  return 2.0 * best;
}

struct JnRun {
  std::vector<double> up;
  std::vector<double> down;
  std::vector<std::size_t> trial_of;
  std::size_t skipped = 0;
  std::size_t scale_mismatch = 0;
  double envelope() const {
    double e = 0.0;
    for (double x : up) e = std::max(e, x);
    for (double x : down) e = std::max(e, x);
    return e;
  }
};

JnRun jn_run(const TrialConfig& config, std::shared_ptr<const FilteredSpace> space,
             const SupEvaluator& evp, const SupEvaluator& ev1, bool scale_check) {
  JnRun run;
  for (std::size_t t = 0; t < config.trials; ++t) {
    const Martingale f = trial_martingale(config, space, t);
    const double b1 = ev1.evaluate(f).value;
    const double bp = evp.evaluate(f).value;
    if (b1 == 0.0 || bp == 0.0) {
      ++run.skipped;
      continue;
    }
    run.up.push_back(bp / b1);
    run.down.push_back(b1 / bp);
    run.trial_of.push_back(t);
    if (scale_check) {
      const Martingale f10 = scaled(f, kScaleFactor);
      const double r10 = evp.evaluate(f10).value / ev1.evaluate(f10).value;
      if (!relative_close(r10, bp / b1, kAssertTolerance)) ++run.scale_mismatch;
    }
  }
  return run;
}

}  // namespace

ConstantReport jn_equivalence(const TrialConfig& config, const JnOptions& opts) {
  validate_config(config);
  const auto space = build_space(config.space);
  const Exponent p = config_exponent(config, *space);
  if (p.p_minus() < 1.0) throw DomainError("John-Nirenberg equivalence needs p_- >= 1");
  SupOptions exhaustive;
  exhaustive.mode = SupMode::Exhaustive;
  const auto family = std::make_shared<const StoppingFamily>(*space, exhaustive);
  const Exponent one = Exponent::constant(space->leaf_count(), 1.0);
  const SupEvaluator evp = SupEvaluator::bmo(space, p, family);
  const SupEvaluator ev1 = SupEvaluator::bmo(space, one, family);
  const double lower_bound = jn_lower_envelope(*space, p, *family);

  ConstantReport report;
  report.quantity = "jn-equivalence";
  report.constant_label = "empirical envelope";
  const JnRun run = jn_run(config, space, evp, ev1, true);
  report.ratios = run.up;
  report.skipped = run.skipped;
  report.checks = run.down.size();
  for (double d : run.down)
    if (d > lower_bound * (1.0 + kAssertTolerance)) ++report.violations;
  report.violations += run.scale_mismatch;
  summarize(report);
  const double envelope = run.envelope();

  WitnessTracker tracker;
  for (std::size_t i = 0; i < run.up.size(); ++i) {
    const double r = std::max(run.up[i], run.down[i]);
    if (r > tracker.best) {
      Json w = instance_json("jn", *space, p);
      w["martingale"] = martingale_to_json(trial_martingale(config, space, run.trial_of[i]));
      w["direction"] = run.up[i] >= run.down[i] ? "up" : "down";
      tracker.offer(r, w);
    }
  }
  report.witness = tracker.witness;
  double down_max = 0.0;
  for (double d : run.down) down_max = std::max(down_max, d);
  report.details["config"] = config_to_json(config);
  report.details["down_ratios"] = run.down;
  report.details["up_max"] = report.max;
  report.details["down_max"] = down_max;
  report.details["envelope"] = envelope;
  report.details["down_bound"] = lower_bound;
  report.details["candidates"] = family->size();
  report.details["scale_mismatches"] = run.scale_mismatch;

  if (opts.refinement) {
    const auto fine = std::make_shared<const FilteredSpace>(refine_leaves(*space));
    Eigen::VectorXd fine_p(fine->leaf_count());
    for (Eigen::Index i = 0; i < space->leaf_count(); ++i) fine_p[2 * i] = fine_p[2 * i + 1] = p[i];
    const Exponent pf(fine_p);
    const auto ffam = std::make_shared<const StoppingFamily>(*fine, exhaustive);
    const SupEvaluator fevp = SupEvaluator::bmo(fine, pf, ffam);
    const SupEvaluator fev1 =
        SupEvaluator::bmo(fine, Exponent::constant(fine->leaf_count(), 1.0), ffam);
    double fine_env = 0.0;
    double worst = 0.0;
    std::size_t j = 0;
    for (std::size_t t = 0; t < config.trials; ++t) {
      const Martingale f = trial_martingale(config, space, t);
      RandomVariable lifted(fine->leaf_count());
      for (Eigen::Index i = 0; i < space->leaf_count(); ++i)
        lifted[2 * i] = lifted[2 * i + 1] = f.terminal()[i];
      const Martingale g = centered_from_terminal(fine, lifted);
      const double b1 = fev1.evaluate(g).value;
      const double bp = fevp.evaluate(g).value;
      if (b1 == 0.0 || bp == 0.0) continue;
      fine_env = std::max({fine_env, bp / b1, b1 / bp});
      if (j < run.up.size() && run.trial_of[j] == t) {
        worst = std::max(worst, std::abs(bp / b1 / run.up[j] - 1.0));
        ++j;
      }
    }
    const bool stable = relative_close(fine_env, envelope, kAssertTolerance);
    if (!stable) ++report.violations;
    report.details["refinement"] = {
        {"envelope", fine_env}, {"max_relative_deviation", worst}, {"stable", stable}};
  }
  if (opts.perturbation) {
    const auto moved =
        perturbed_space(*space, opts.perturbation_eps, derive_seed(config.seed, kPerturbStream));
    const auto mfam = std::make_shared<const StoppingFamily>(*moved, exhaustive);
    const SupEvaluator mevp = SupEvaluator::bmo(moved, p, mfam);
    const SupEvaluator mev1 = SupEvaluator::bmo(moved, one, mfam);
    const JnRun mrun = jn_run(config, moved, mevp, mev1, false);
    const double menv = mrun.envelope();
    const double change = envelope > 0.0 ? menv / envelope - 1.0 : 0.0;
    const bool stable = std::abs(change) <= 0.1;
    if (!stable) ++report.violations;
    report.details["perturbation"] = {{"eps", opts.perturbation_eps},
                                      {"envelope", menv},
                                      {"relative_change", change},
                                      {"stable", stable}};
  }
  return report;
}

// Exponential John-Nirenberg.

ConstantReport exp_jn_curve(const Martingale& f, const Exponent& p,
                            std::optional<std::vector<double>> t_grid, const SupOptions& opts) {
  const auto space = f.space_ptr();
  const Eigen::Index leaves = space->leaf_count();
  const auto family = std::make_shared<const StoppingFamily>(*space, opts);
  const double b1 =
      SupEvaluator::bmo(space, Exponent::constant(leaves, 1.0), family).evaluate(f).value;
  if (b1 == 0.0) throw DomainError("exponential John-Nirenberg needs ||f||_BMO1 > 0");

  std::vector<RandomVariable> diffs(family->size());
  std::vector<char> live(family->size(), 0);
  double sup_g = 0.0;
  for (std::size_t c = 0; c < family->size(); ++c) {
    const std::span<const int> tau = family->at(c);
    bool any = false;
    for (int t : tau) any = any || t != kNever;
    if (!any) continue;
    live[c] = 1;
    diffs[c] = stopped_difference(f, tau, StopKind::Shifted);
    sup_g = std::max(sup_g, diffs[c].cwiseAbs().maxCoeff());
  }
  const double chat = sup_g / b1;
  const double c1 = 4.0;
  const double c2 = std::numbers::ln2 / (2.0 * chat);

  std::vector<double> grid;
  if (t_grid) {
    grid = *t_grid;
  } else {
    constexpr int kPoints = 40;
    for (int j = 0; j <= kPoints; ++j) grid.push_back(1.05 * sup_g * j / kPoints);
  }
  for (std::size_t j = 1; j < grid.size(); ++j)
    if (!(grid[j] > grid[j - 1])) throw ValidationError("t grid must be strictly increasing");
  if (!grid.empty() && grid.front() < 0.0) throw ValidationError("t grid must be nonnegative");

  std::unordered_map<std::string, double> cache;
  const auto set_norm = [&](const std::vector<int>& subset) {
    if (subset.empty()) return 0.0;
    const std::string key = set_key(subset, leaves);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, indicator_norm(*space, subset, p)).first;
    return it->second;
  };

  ConstantReport report;
  report.quantity = "exp-jn";
  report.constant_label = "proof-chain bound C1 exp(-C2 t / BMO1), C1 = 4, C2 = ln2 / (2 C)";
  std::vector<double> curve(grid.size(), 0.0);
  std::vector<double> use(grid.size(), 0.0);
  double c2_fit = std::numeric_limits<double>::infinity();
  std::size_t monotone_failures = 0, bound_failures = 0;
  std::vector<int> s_set, t_set;
  for (std::size_t c = 0; c < family->size(); ++c) {
    if (!live[c]) continue;
    const std::span<const int> tau = family->at(c);
    s_set.clear();
    for (Eigen::Index i = 0; i < leaves; ++i)
      if (tau[i] != kNever) s_set.push_back(static_cast<int>(i));
    const double ds = set_norm(s_set);
    if (ds == 0.0) continue;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double t = grid[j];
      t_set.clear();
      for (int i : s_set)
        if (std::abs(diffs[c][i]) >= t) t_set.push_back(i);
      const double lhs = set_norm(t_set) / ds;
      const double bound = c1 * std::exp(-c2 * t / b1);
      ++report.checks;
      if (lhs > prev * (1.0 + 1e-12)) ++monotone_failures;
      if (lhs > bound * (1.0 + kAssertTolerance)) ++bound_failures;
      prev = lhs;
      curve[j] = std::max(curve[j], lhs);
      use[j] = std::max(use[j], lhs / bound);
      if (t > 0.0 && lhs > 0.0) c2_fit = std::min(c2_fit, b1 * std::log(c1 / lhs) / t);
    }
  }
  for (std::size_t j = 1; j < curve.size(); ++j)
    if (curve[j] > curve[j - 1] * (1.0 + 1e-12)) ++monotone_failures;
  const bool fit_ok = c2_fit > 0.0 && c2_fit >= c2 * (1.0 - kAssertTolerance);
  report.violations = monotone_failures + bound_failures + (fit_ok ? 0 : 1);
  report.ratios = use;
  for (std::size_t j = 0; j < grid.size(); ++j) report.curve.emplace_back(grid[j], curve[j]);
  Json w = instance_json("exp-jn", *space, p);
  w["martingale"] = martingale_to_json(f);
  w["t_grid"] = grid;
  w["sup"] = {{"mode", mode_name(opts.mode)},
              {"cap", opts.cap},
              {"samples", opts.samples},
              {"seed", opts.seed}};
  report.witness = w;
  report.details = {{"bmo1", b1},
                    {"c_hat", chat},
                    {"c1", c1},
                    {"c2", c2},
                    {"c2_fit", std::isinf(c2_fit) ? Json(nullptr) : Json(c2_fit)},
                    {"monotone_failures", monotone_failures},
                    {"bound_failures", bound_failures},
                    {"mode", mode_name(family->mode())},
                    {"candidates", family->size()}};
  summarize(report);
  return report;
}

ConstantReport exp_jn_sweep(const TrialConfig& config, const SupOptions& opts) {
  validate_config(config);
  const auto space = build_space(config.space);
  const Exponent p = config_exponent(config, *space);
  ConstantReport report;
  report.quantity = "exp-jn";
  report.constant_label = "proof-chain bound C1 exp(-C2 t / BMO1), C1 = 4, C2 = ln2 / (2 C)";
  WitnessTracker tracker;
  double fit_min = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < config.trials; ++t) {
    const Martingale f = trial_martingale(config, space, t);
    if (f.terminal().cwiseAbs().maxCoeff() == 0.0) {
      ++report.skipped;
      continue;
    }
    const ConstantReport single = exp_jn_curve(f, p, std::nullopt, opts);
    report.checks += single.checks;
    report.violations += single.violations;
    report.ratios.push_back(single.max);
    if (single.details["c2_fit"].is_number())
      fit_min = std::min(fit_min, single.details["c2_fit"].get<double>());
    if (single.max > tracker.best) report.curve = single.curve;
    tracker.offer(single.max, single.witness);
  }
  report.witness = tracker.witness;
  report.details["config"] = config_to_json(config);
  report.details["c2_fit_min"] = std::isinf(fit_min) ? Json(nullptr) : Json(fit_min);
  summarize(report);
  return report;
}

// Nakai-Sadasue.

double nakai_h(int m) {
  const auto c = [](int n) { return 1.0 / (n * std::numbers::ln2 + 1.0); };
  double sum = 0.0;
  for (int n = 1; n <= m; ++n) sum += c(n);
  return sum - c(m + 1);
}

std::shared_ptr<const FilteredSpace> spine_space(int depth) {
  if (depth < 1 || depth > kNakaiMaxDepth)
    throw DomainError("spine depth must lie in 1.." + std::to_string(kNakaiMaxDepth));
  Eigen::VectorXd probs(depth + 1);
  for (int m = 0; m < depth; ++m) probs[m] = std::ldexp(1.0, -(m + 1));
  probs[depth] = std::ldexp(1.0, -depth);
  std::vector<Partition> levels;
  for (int n = 0; n <= depth; ++n) {
    Partition part;
    for (int m = 0; m < n; ++m) part.push_back({m});
    Block tail;
    for (int m = n; m <= depth; ++m) tail.push_back(m);
    part.push_back(std::move(tail));
    levels.push_back(std::move(part));
  }
  return std::make_shared<const FilteredSpace>(std::move(probs), std::move(levels));
}

ConstantReport nakai_sadasue(int max_n) {
  if (max_n < 1 || max_n > 30) throw DomainError("max N must lie in 1..30");
  const auto c = [](int n) { return 1.0 / (n * std::numbers::ln2 + 1.0); };

  // h[m] for m = 0..cap + 1, with h_0 = -c_1.
  std::vector<double> h(kNakaiMaxDepth + 2);
  double partial = 0.0;
  for (int m = 0; m <= kNakaiMaxDepth + 1; ++m) {
    if (m > 0) partial += c(m);
    h[m] = partial - c(m + 1);
  }
  const auto witnesses = [&](int n, int depth, int& y, int& z) {
    y = z = -1;
    for (int j = n; j < depth; ++j) {
      const double g = std::sin(h[j]);
      if (y < 0 && g >= 0.5) y = j;
      if (z < 0 && g <= 0.0) z = j;
    }
    return y >= 0 && z >= 0;
  };

  int depth = std::max(2 * max_n, 32);
  for (;;) {
    bool all = true;
    int y, z;
    for (int n = 1; n <= max_n && all; ++n) all = witnesses(n, depth, y, z);
    if (all) break;
    if (depth == kNakaiMaxDepth)
      throw ResourceError("no sine-window witnesses below depth " + std::to_string(depth));
    depth = std::min(2 * depth, kNakaiMaxDepth);
  }

  const auto space = spine_space(depth);
  std::vector<double> g(depth + 1);
  for (int m = 0; m < depth; ++m) g[m] = std::sin(h[m]);
  g[depth] = std::sin(h[depth] + c(depth + 1));

  ConstantReport report;
  report.quantity = "nakai-sadasue";
  report.constant_label = "lower bound 2^(N/2)";
  Json per_n = Json::array();
  int best_n = 1;
  for (int n = 1; n <= max_n; ++n) {
    std::vector<int> block;
    double g_max = -2.0, g_min = 2.0;
    for (int m = n; m <= depth; ++m) {
      block.push_back(m);
      g_max = std::max(g_max, g[m]);
      g_min = std::min(g_min, g[m]);
    }
    const double ratio = std::pow(space->prob(block), g_min - g_max);
    const double target = std::pow(2.0, 0.5 * n);
    ++report.checks;
    if (ratio < target * (1.0 - 1e-12)) ++report.violations;
    int y, z;
    witnesses(n, depth, y, z);
    per_n.push_back({{"N", n},
                     {"ratio", ratio},
                     {"target", target},
                     {"y_leaf", y},
                     {"z_leaf", z},
                     {"g_y", g[y]},
                     {"g_z", g[z]}});
    report.ratios.push_back(ratio);
    if (ratio > report.ratios[best_n - 1]) best_n = n;
  }

  Json increments = Json::array();
  std::size_t increment_failures = 0;
  for (int m = 1; m < depth; ++m) {
    const double inc = h[m + 1] - h[m];
    const double bound = 2.0 / ((m + 1) * std::numbers::ln2);
    ++report.checks;
    if (!(inc > 0.0) || inc > bound) ++increment_failures;
    if (m <= std::max(20, max_n)) increments.push_back({{"m", m}, {"increment", inc}, {"bound", bound}});
  }
  report.violations += increment_failures;
  report.witness = {{"kind", "nakai-sadasue"}, {"max_n", max_n}, {"N", best_n}};
  report.details = {{"depth", depth},
                    {"h_1", h[1]},
                    {"per_n", std::move(per_n)},
                    {"increments", std::move(increments)},
                    {"increment_failures", increment_failures},
                    {"truncation_gap", c(depth + 1)}};
  summarize(report);
  return report;
}

// Conditional Jensen failure.

Violation33 violation_33_ratio(const FilteredSpace& space, const RandomVariable& f,
                               const Exponent& p) {
  if (f.size() != space.leaf_count() || p.size() != space.leaf_count())
    throw ValidationError("function or exponent length mismatch");
  Violation33 out;
  RandomVariable powered(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i)
    powered[i] = f[i] == 0.0 ? 0.0 : std::pow(std::abs(f[i]), p[i]);
  for (int n = 0; n <= space.depth(); ++n) {
    const RandomVariable mean = space.average_on_blocks(f, n);
    const RandomVariable mean_powered = space.average_on_blocks(powered, n);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      if (mean_powered[i] == 0.0) continue;
      const double ratio = std::pow(std::abs(mean[i]), p[i]) / mean_powered[i];
      if (ratio > out.ratio) out = {ratio, n, static_cast<int>(i)};
    }
  }
  return out;
}

ConstantReport violation_33_search(const TrialConfig& config) {
  validate_config(config);
  ConstantReport report;
  report.quantity = "violation-33";
  report.constant_label = "no uniform constant";
  WitnessTracker tracker;

  const auto two = std::make_shared<const FilteredSpace>(build_dyadic_space(1));
  const Exponent p2(Eigen::Vector2d(1.0, 2.0));
  Json family = Json::array();
  for (double c : {8.0, 100.0, 1e4}) {
    const RandomVariable f = Eigen::Vector2d(c, 0.0);
    const Violation33 v = violation_33_ratio(*two, f, p2);
    ++report.checks;
    if (!relative_close(v.ratio, 0.5 * c, 1e-12)) ++report.violations;
    family.push_back({{"c", c}, {"ratio", v.ratio}, {"expected", 0.5 * c}, {"leaf", v.leaf}});
    report.ratios.push_back(v.ratio);
    Json w = instance_json("violation-33", *two, p2);
    w["function"] = vector_to_json(f);
    tracker.offer(v.ratio, w);
  }

  const auto space = build_space(config.space);
  const Exponent p = config_exponent(config, *space);
  double random_max = 0.0;
  for (std::size_t t = 0; t < config.trials; ++t) {
    const RandomVariable f = trial_martingale(config, space, t).terminal();
    const Violation33 v = violation_33_ratio(*space, f, p);
    report.ratios.push_back(v.ratio);
    random_max = std::max(random_max, v.ratio);
    Json w = instance_json("violation-33", *space, p);
    w["function"] = vector_to_json(f);
    tracker.offer(v.ratio, w);
  }
  report.witness = tracker.witness;
  report.details = {{"config", config_to_json(config)},
                    {"family", std::move(family)},
                    {"random_max", random_max}};
  summarize(report);
  return report;
}

// Atomic decomposition.

namespace {

double decomposition_ratio(const Martingale& f, const Exponent& p) {
  const double hs = hs_norm(f, p);
  if (hs == 0.0) return 0.0;
  return a_quantity(f.space(), atomic_decompose(f, p), p) / hs;
}

}  // namespace

ConstantReport decomposition_sweep(const TrialConfig& config) {
  validate_config(config);
  const auto space = build_space(config.space);
  const Exponent p = config_exponent(config, *space);
  ConstantReport report;
  report.quantity = "decomposition";
  report.constant_label = "empirical envelope a_quantity / hs_norm";
  WitnessTracker tracker;
  std::size_t reconstruct_failures = 0, atom_failures = 0, converse_failures = 0,
              prop41_failures = 0, geometric_failures = 0, scale_failures = 0, atoms = 0;
  double worst_reconstruct = 0.0;
  for (std::size_t t = 0; t < config.trials; ++t) {
    const Martingale f = trial_martingale(config, space, t);
    const AtomicDecomposition dec = atomic_decompose(f, p);
    const Martingale back = reconstruct(dec, space);
    double fmax = 0.0, err = 0.0;
    for (int n = 0; n <= f.depth(); ++n) {
      fmax = std::max(fmax, f.level(n).cwiseAbs().maxCoeff());
      err = std::max(err, (back.level(n) - f.level(n)).cwiseAbs().maxCoeff());
    }
    worst_reconstruct = std::max(worst_reconstruct, fmax > 0.0 ? err / fmax : err);
    if (err > kAssertTolerance * fmax) ++reconstruct_failures;
    for (const AtomicTerm& term : dec.terms) {
      ++atoms;
      if (!is_atom(*space, term.atom_terminal, term.tau, p).ok) ++atom_failures;
    }
    const double hs = hs_norm(f, p);
    const double a = a_quantity(*space, dec, p);
    if (hs > a + kAssertTolerance) ++converse_failures;
    const Prop41Bounds b = prop41_bounds(*space, dec, p);
    if (!b.first_holds || !b.second_holds) ++prop41_failures;
    if (!geometric_comparison(*space, dec, p).holds) ++geometric_failures;
    report.checks += 5 + dec.terms.size();
    if (hs == 0.0) {
      ++report.skipped;
      continue;
    }
    const double ratio = a / hs;
    if (!relative_close(decomposition_ratio(scaled(f, 2.0), p), ratio, 1e-6)) ++scale_failures;
    report.ratios.push_back(ratio);
    Json w = instance_json("decompose", *space, p);
    w["martingale"] = martingale_to_json(f);
    tracker.offer(ratio, w);
  }
  report.violations = reconstruct_failures + atom_failures + converse_failures + prop41_failures +
                      geometric_failures + scale_failures;
  report.witness = tracker.witness;
  report.details = {{"config", config_to_json(config)},
                    {"atoms", atoms},
                    {"reconstruct_failures", reconstruct_failures},
                    {"worst_reconstruct_error", worst_reconstruct},
                    {"atom_failures", atom_failures},
                    {"converse_failures", converse_failures},
                    {"prop41_failures", prop41_failures},
                    {"geometric_failures", geometric_failures},
                    {"scale_failures", scale_failures}};
  summarize(report);
  return report;
}

// Replay.

double replay_witness(const Json& w) {
  if (!w.is_object() || !w.contains("kind")) throw ValidationError("witness has no kind");
  const std::string kind = w.at("kind").get<std::string>();
  if (kind == "nakai-sadasue") {
    const int n = w.at("N").get<int>();
    return nakai_sadasue(w.at("max_n").get<int>()).ratios.at(static_cast<std::size_t>(n - 1));
  }
  const auto space = std::make_shared<const FilteredSpace>(space_from_json(w.at("space")));
  const Exponent p = exponent_from_json(w.at("exponent"));
  if (kind == "lemma34") return lemma34_check(*space, vector_from_json(w.at("function")), p).max;
  if (kind == "violation-33")
    return violation_33_ratio(*space, vector_from_json(w.at("function")), p).ratio;
  const Martingale f = martingale_from_json(w.at("martingale"), space);
  if (kind == "weak-type")
    return weak_type_check(f, p, std::vector<double>{w.at("lambda").get<double>()}).ratios.at(0);
  if (kind == "doob") return norm(*space, maximal(f), p) / norm(*space, f.terminal(), p);
  if (kind == "decompose") return decomposition_ratio(f, p);
  if (kind == "jn") {
    SupOptions exhaustive;
    exhaustive.mode = SupMode::Exhaustive;
    const double bp = bmo_norm(f, p, exhaustive).value;
    const double b1 = bmo_norm(f, Exponent::constant(space->leaf_count(), 1.0), exhaustive).value;
    return w.at("direction").get<std::string>() == "up" ? bp / b1 : b1 / bp;
  }
  if (kind == "exp-jn") {
    const Json& s = w.at("sup");
    SupOptions opts;
    const std::string mode = s.at("mode").get<std::string>();
    opts.mode = mode == "exhaustive" ? SupMode::Exhaustive
                                     : (mode == "sampled" ? SupMode::Sampled : SupMode::Auto);
    opts.cap = s.at("cap").get<std::uint64_t>();
    opts.samples = s.at("samples").get<std::size_t>();
    opts.seed = s.at("seed").get<std::uint64_t>();
    return exp_jn_curve(f, p, w.at("t_grid").get<std::vector<double>>(), opts).max;
  }
  throw ValidationError("unknown witness kind \"" + kind + "\"");
}

}  // namespace varhardy
