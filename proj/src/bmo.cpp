#include "varhardy/bmo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "varhardy/errors.hpp"
#include "varhardy/hardy.hpp"
#include "varhardy/varlp.hpp"

namespace varhardy {

namespace {

constexpr std::size_t kExactShortlist = 64;

using SetKey = std::vector<std::uint64_t>;

struct SetKeyHash {
  std::size_t operator()(const SetKey& key) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::uint64_t w : key) h = (h ^ w) * 0x100000001b3ULL + (h >> 29);
    return static_cast<std::size_t>(h);
  }
};

SetKey finite_key(std::span<const int> tau) {
  SetKey key((tau.size() + 63) / 64, 0);
  for (std::size_t i = 0; i < tau.size(); ++i)
    if (tau[i] != kNever) key[i / 64] |= std::uint64_t{1} << (i % 64);
  return key;
}

void require_centered(const Martingale& f) {
  double scale = 1.0;
  for (const RandomVariable& level : f.levels())
    scale = std::max(scale, level.cwiseAbs().maxCoeff());
  if (f.level(0).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError("stopping-time norms require f_0 = 0");
}

template <class DenomFn>
std::vector<double> denominators(const FilteredSpace& space, const StoppingFamily& family,
                                 DenomFn&& fn) {
  std::unordered_map<SetKey, double, SetKeyHash> cache;
  std::vector<double> out(family.size(), 0.0);
  std::vector<int> subset;
  for (std::size_t c = 0; c < family.size(); ++c) {
    const std::span<const int> tau = family.at(c);
    SetKey key = finite_key(tau);
    auto it = cache.find(key);
    if (it == cache.end()) {
      subset.clear();
      for (std::size_t i = 0; i < tau.size(); ++i)
        if (tau[i] != kNever) subset.push_back(static_cast<int>(i));
      double d = 0.0;
      if (!subset.empty() && space.prob(subset) > 0.0) d = fn(subset);
      it = cache.emplace(std::move(key), d).first;
    }
    out[c] = it->second;
  }
  return out;
}

}  // namespace

StoppingFamily::StoppingFamily(const FilteredSpace& space, const SupOptions& opts)
    : leaves_(static_cast<std::size_t>(space.leaf_count())) {
  const std::uint64_t count = count_stopping_times(space, opts.cap);
  if (opts.mode != SupMode::Sampled && count <= opts.cap) {
    mode_ = SupMode::Exhaustive;
    flat_ = enumerate_stopping_levels(space, opts.cap);
    return;
  }
  if (opts.mode == SupMode::Exhaustive)
    throw ResourceError("more than " + std::to_string(opts.cap) +
                        " stopping times; use sampled mode");
  mode_ = SupMode::Sampled;
  for (int n = 0; n <= space.depth(); ++n) flat_.insert(flat_.end(), leaves_, n);
  flat_.insert(flat_.end(), leaves_, kNever);
  const std::size_t count_requested = std::max<std::size_t>(opts.samples, 2);
  const std::vector<StoppingTime> sampled = sample_stopping_times(space, count_requested, opts.seed);
  for (std::size_t c = 2; c < sampled.size(); ++c)
    flat_.insert(flat_.end(), sampled[c].levels().begin(), sampled[c].levels().end());
}

RandomVariable stopped_difference(const Martingale& f, std::span<const int> tau, StopKind kind) {
  const RandomVariable& terminal = f.terminal();
  RandomVariable g(terminal.size());
  for (Eigen::Index i = 0; i < terminal.size(); ++i) {
    const int t = tau[i];
    if (t == kNever) {
      g[i] = 0.0;
    } else if (kind == StopKind::Shifted) {
      g[i] = terminal[i] - (t == 0 ? 0.0 : f.level(t - 1)[i]);
    } else {
      g[i] = terminal[i] - f.level(t)[i];
    }
  }
  return g;
}

SupEvaluator::SupEvaluator(std::shared_ptr<const FilteredSpace> space, Exponent numerator,
                           StopKind kind, std::shared_ptr<const StoppingFamily> family,
                           std::vector<double> denom)
    : space_(std::move(space)),
      num_(std::move(numerator)),
      kind_(kind),
      family_(std::move(family)),
      denom_(std::move(denom)) {}

SupEvaluator SupEvaluator::bmo(std::shared_ptr<const FilteredSpace> space, const Exponent& p,
                               std::shared_ptr<const StoppingFamily> family) {
  if (p.size() != space->leaf_count())
    throw ValidationError("exponent length does not match the leaf count");
  if (p.has_infinite()) throw DomainError("BMO norms need a finite exponent");
  std::vector<double> denom;
  if (p.is_constant()) {
    const double inv = 1.0 / p.p_minus();
    denom = denominators(*space, *family,
                         [&](std::span<const int> s) { return std::pow(space->prob(s), inv); });
  } else {
    denom = denominators(*space, *family,
                         [&](std::span<const int> s) { return indicator_norm(*space, s, p); });
  }
  return SupEvaluator(std::move(space), p, StopKind::Shifted, std::move(family), std::move(denom));
}

SupEvaluator SupEvaluator::lipschitz(std::shared_ptr<const FilteredSpace> space, double q,
                                     const RandomVariable& alpha,
                                     std::shared_ptr<const StoppingFamily> family) {
  const Eigen::Index leaves = space->leaf_count();
  if (alpha.size() != leaves) throw ValidationError("alpha length does not match the leaf count");
  if (!(q >= 1.0) || std::isinf(q)) throw DomainError("Lipschitz norms need 1 <= q < inf");
  Eigen::VectorXd inv_alpha(leaves);
  for (Eigen::Index i = 0; i < leaves; ++i) {
    if (std::isnan(alpha[i]) || alpha[i] < 0.0)
      throw ValidationError("alpha at leaf " + std::to_string(i) + " is negative");
    inv_alpha[i] = alpha[i] == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / alpha[i];
  }
  const Exponent r(inv_alpha, true);
  std::vector<double> denom = denominators(*space, *family, [&](std::span<const int> s) {
    return indicator_norm(*space, s, r) * std::pow(space->prob(s), 1.0 / q);
  });
  return SupEvaluator(std::move(space), Exponent::constant(leaves, q), StopKind::Plain,
                      std::move(family), std::move(denom));
}

SupNormResult SupEvaluator::evaluate(const Martingale& f) const {
  const FilteredSpace& space = *space_;
  const Eigen::Index leaves = space.leaf_count();
  if (f.space().leaf_count() != leaves || f.depth() != space.depth())
    throw ValidationError("martingale does not live on the evaluator's space");
  const int depth = space.depth();
  const std::size_t stride = static_cast<std::size_t>(depth) + 2;
  const Eigen::VectorXd& probs = space.probs();
  const Eigen::VectorXd& pv = num_.values();

  // Per leaf and stop level k (k = N + 1 stands for inf): g and P |g|^p.
  std::vector<double> gtab(leaves * stride, 0.0);
  std::vector<double> rtab(leaves * stride, 0.0);
  const RandomVariable& terminal = f.terminal();
  for (Eigen::Index i = 0; i < leaves; ++i) {
    for (int k = 0; k <= depth; ++k) {
      double g;
      if (kind_ == StopKind::Shifted)
        g = terminal[i] - (k == 0 ? 0.0 : f.level(k - 1)[i]);
      else
        g = terminal[i] - f.level(k)[i];
      const std::size_t at = i * stride + k;
      gtab[at] = g;
      if (g != 0.0) rtab[at] = probs[i] * std::pow(std::abs(g), pv[i]);
    }
  }
  const auto slot = [depth](int t) { return t == kNever ? depth + 1 : t; };

  const StoppingFamily& fam = *family_;
  const std::size_t count = fam.size();
  const auto rho_of = [&](std::size_t c) {
    const std::span<const int> tau = fam.at(c);
    double rho = 0.0;
    for (Eigen::Index i = 0; i < leaves; ++i) rho += rtab[i * stride + slot(tau[i])];
    return rho;
  };

  SupNormResult out;
  out.mode = fam.mode();
  out.candidates = count;
  double best = -1.0;
  std::size_t best_c = count;

  if (num_.is_constant()) {
    const double inv = 1.0 / num_.p_minus();
    for (std::size_t c = 0; c < count; ++c) {
      if (denom_[c] == 0.0) continue;
      const double rho = rho_of(c);
      const double v = rho == 0.0 ? 0.0 : std::pow(rho, inv) / denom_[c];
      if (v > best) {
        best = v;
        best_c = c;
      }
    }
  } else {
    const double lo_exp = 1.0 / num_.p_minus();
    const double hi_exp = 1.0 / num_.p_plus();
    std::vector<double> upper(count, -1.0);
    for (std::size_t c = 0; c < count; ++c) {
      if (denom_[c] == 0.0) continue;
      const double rho = rho_of(c);
      if (rho == 0.0) {
        upper[c] = 0.0;
        continue;
      }
      upper[c] = std::max(std::pow(rho, lo_exp), std::pow(rho, hi_exp)) / denom_[c];
    }
    Eigen::VectorXd g(leaves);
    std::vector<char> done(count, 0);
    const auto exact = [&](std::size_t c) {
      done[c] = 1;
      const std::span<const int> tau = fam.at(c);
      for (Eigen::Index i = 0; i < leaves; ++i) g[i] = gtab[i * stride + slot(tau[i])];
      const double v = luxemburg_norm(probs, g, pv).norm / denom_[c];
      if (v > best || (v == best && c < best_c)) {
        best = v;
        best_c = c;
      }
    };
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t shortlist = std::min(kExactShortlist, count);
    const auto by_upper = [&](std::size_t a, std::size_t b) {
      return upper[a] != upper[b] ? upper[a] > upper[b] : a < b;
    };
    std::nth_element(order.begin(), order.begin() + shortlist - 1, order.end(), by_upper);
    for (std::size_t j = 0; j < shortlist; ++j)
      if (upper[order[j]] >= 0.0) exact(order[j]);
    for (std::size_t c = 0; c < count; ++c) {
      if (done[c] || upper[c] < 0.0) continue;
      if (upper[c] * (1.0 + kAssertTolerance) < best) continue;
      // modular at most 1 at lambda means ||g|| <= lambda < best * denom
      const double lambda = best * denom_[c] * (1.0 - 1e-12);
      if (lambda > 0.0) {
        const double log_lambda = std::log(lambda);
        const std::span<const int> tau = fam.at(c);
        double m = 0.0;
        for (Eigen::Index i = 0; i < leaves && m <= 1.0; ++i) {
          const double r = rtab[i * stride + slot(tau[i])];
          if (r != 0.0) m += r * std::exp(-pv[i] * log_lambda);
        }
        if (m <= 1.0) continue;
      }
      exact(c);
    }
  }

  if (best_c == count) {
    out.value = 0.0;
    out.argmax_tau = StoppingTime::constant(leaves, 0);
  } else {
    out.value = best;
    out.argmax_tau = fam.tau(best_c);
  }
  return out;
}

SupNormResult bmo_norm(const Martingale& f, const Exponent& p, const SupOptions& opts) {
  require_centered(f);
  auto family = std::make_shared<const StoppingFamily>(f.space(), opts);
  return SupEvaluator::bmo(f.space_ptr(), p, std::move(family)).evaluate(f);
}

SupNormResult lipschitz_norm(const Martingale& f, double q, const RandomVariable& alpha,
                             const SupOptions& opts) {
  auto family = std::make_shared<const StoppingFamily>(f.space(), opts);
  return SupEvaluator::lipschitz(f.space_ptr(), q, alpha, std::move(family)).evaluate(f);
}

double duality_pairing_ratio(const Martingale& f, const RandomVariable& phi, const Exponent& p,
                             const SupOptions& opts) {
  const FilteredSpace& space = f.space();
  if (phi.size() != space.leaf_count()) throw ValidationError("phi length mismatch");
  if (p.p_plus() > 1.0) throw DomainError("duality pairing needs p_+ <= 1");
  require_centered(f);
  const double pairing = space.probs().dot(f.terminal().cwiseProduct(phi));
  const double scale = f.terminal().cwiseAbs().maxCoeff() * phi.cwiseAbs().maxCoeff();
  if (std::abs(pairing) <= 1e-12 * scale) return 0.0;
  const double hs = hs_norm(f, p);
  if (hs == 0.0) throw DomainError("duality pairing needs a nonzero H^s norm");
  const RandomVariable alpha = (1.0 / p.values().array() - 1.0).matrix();
  const Martingale phi_m = martingale_from_terminal(f.space_ptr(), phi);
  const double lip = lipschitz_norm(phi_m, 2.0, alpha, opts).value;
  if (lip == 0.0) throw DomainError("duality pairing needs a nonzero Lipschitz norm");
  return std::abs(pairing) / (hs * lip);
}

}  // namespace varhardy
