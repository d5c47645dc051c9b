#include "hetfit/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hetfit/error.hpp"
#include "hetfit/stats.hpp"

namespace hetfit::tpe {

namespace {

constexpr double kLogFloor = -1e300;

bool is_numeric(const Dimension& d) { return d.kind != DimensionKind::kCategorical; }

// Internal coordinates: integer dims are widened by half a step on each side
// so every integer owns an equal-width cell; log dims live in log space.
double internal_low(const Dimension& d) {
  const double lo = d.kind == DimensionKind::kInt ? d.low - 0.5 : d.low;
  return d.log ? std::log(lo) : lo;
}

double internal_high(const Dimension& d) {
  const double hi = d.kind == DimensionKind::kInt ? d.high + 0.5 : d.high;
  return d.log ? std::log(hi) : hi;
}

double to_internal(const Dimension& d, double x) { return d.log ? std::log(x) : x; }

double to_external(const Dimension& d, double t) {
  double x = d.log ? std::exp(t) : t;
  if (d.kind == DimensionKind::kInt) x = std::round(x);
  return std::clamp(x, d.low, d.high);
}

double normal_log_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * 3.14159265358979323846);
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

Dimension Dimension::real(std::string name, double low, double high, bool log) {
  if (!(low < high)) throw DomainError("dimension '" + name + "': low >= high");
  if (log && !(low > 0.0)) {
    throw DomainError("dimension '" + name + "': log scale needs low > 0");
  }
  Dimension d;
  d.name = std::move(name);
  d.kind = DimensionKind::kFloat;
  d.low = low;
  d.high = high;
  d.log = log;
  return d;
}

Dimension Dimension::integer(std::string name, int low, int high, bool log) {
  if (low > high) throw DomainError("dimension '" + name + "': low > high");
  if (log && low < 1) {
    throw DomainError("dimension '" + name + "': log scale needs low >= 1");
  }
  Dimension d;
  d.name = std::move(name);
  d.kind = DimensionKind::kInt;
  d.low = low;
  d.high = high;
  d.log = log;
  return d;
}

Dimension Dimension::categorical(std::string name, int choices) {
  if (choices < 1) throw DomainError("dimension '" + name + "': no choices");
  Dimension d;
  d.name = std::move(name);
  d.kind = DimensionKind::kCategorical;
  d.low = 0;
  d.high = choices - 1;
  d.choices = choices;
  return d;
}

Space::Space(std::vector<Dimension> dims) : dims_(std::move(dims)) {
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (dims_[i].condition && dims_[i].condition->parent >= i) {
      throw DomainError("dimension '" + dims_[i].name +
                        "' must come after its parent");
    }
  }
}

bool Space::active(std::size_t dim, const Assignment& partial) const {
  const auto& c = dims_.at(dim).condition;
  if (!c) return true;
  const auto& parent = partial.at(c->parent);
  return parent && *parent >= c->min_parent_value;
}

Assignment Space::sample_uniform(Rng& rng) const {
  Assignment a(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (!active(i, a)) continue;
    const auto& d = dims_[i];
    const double u = rng.uniform();
    if (d.kind == DimensionKind::kCategorical) {
      a[i] = std::floor(u * d.choices);
    } else {
      const double lo = internal_low(d);
      const double hi = internal_high(d);
      a[i] = to_external(d, lo + u * (hi - lo));
    }
  }
  return a;
}

bool Space::contains(const Assignment& a) const {
  if (a.size() != dims_.size()) return false;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const bool on = active(i, a);
    if (!on) {
      if (a[i]) return false;
      continue;
    }
    if (!a[i]) return false;
    const double v = *a[i];
    const auto& d = dims_[i];
    if (!(v >= d.low && v <= d.high)) return false;
    if (d.kind != DimensionKind::kFloat && v != std::floor(v)) return false;
  }
  return true;
}

ParzenEstimator::ParzenEstimator(const Dimension& dim,
                                 const std::vector<double>& observed,
                                 double prior_weight)
    : dim_(dim) {
  if (!is_numeric(dim_)) {
    const auto k = static_cast<std::size_t>(dim_.choices);
    probs_.assign(k, prior_weight);
    for (double v : observed) probs_.at(static_cast<std::size_t>(v)) += 1.0;
    const double total = std::accumulate(probs_.begin(), probs_.end(), 0.0);
    for (auto& p : probs_) p /= total;
    return;
  }

  lo_ = internal_low(dim_);
  hi_ = internal_high(dim_);
  const double range = hi_ - lo_;
  const double prior_mu = 0.5 * (lo_ + hi_);

  struct Point {
    double mu;
    bool prior;
  };
  std::vector<Point> pts;
  pts.reserve(observed.size() + 1);
  for (double v : observed) pts.push_back({to_internal(dim_, v), false});
  pts.push_back({prior_mu, true});
  std::stable_sort(pts.begin(), pts.end(),
                   [](const Point& a, const Point& b) { return a.mu < b.mu; });

  // Bandwidth = distance to the farther neighbour, clipped.
  const double max_sigma = range;
  const double min_sigma =
      range / std::min(100.0, 1.0 + static_cast<double>(observed.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    mus_.push_back(pts[i].mu);
    if (pts[i].prior) {
      sigmas_.push_back(range);
      weights_.push_back(prior_weight);
      continue;
    }
    const double left = i > 0 ? pts[i].mu - pts[i - 1].mu : pts[i].mu - lo_;
    const double right =
        i + 1 < pts.size() ? pts[i + 1].mu - pts[i].mu : hi_ - pts[i].mu;
    sigmas_.push_back(std::clamp(std::max(left, right), min_sigma, max_sigma));
    weights_.push_back(1.0);
  }
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  for (auto& w : weights_) w /= total;
}

double ParzenEstimator::sample(Rng& rng) const {
  if (!is_numeric(dim_)) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t c = 0; c < probs_.size(); ++c) {
      acc += probs_[c];
      if (u < acc) return static_cast<double>(c);
    }
    return static_cast<double>(probs_.size() - 1);
  }
  const double u = rng.uniform();
  std::size_t k = 0;
  double acc = weights_[0];
  while (u >= acc && k + 1 < weights_.size()) acc += weights_[++k];

  // Truncated normal by rejection; the kernels sit inside the bounds so a
  // handful of tries almost always suffices.
  double t = mus_[k];
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double draw = rng.normal(mus_[k], sigmas_[k]);
    if (draw >= lo_ && draw <= hi_) {
      t = draw;
      break;
    }
  }
  return to_external(dim_, t);
}

double ParzenEstimator::log_pdf(double value) const {
  if (!is_numeric(dim_)) {
    const auto c = static_cast<std::size_t>(value);
    if (c >= probs_.size()) return kLogFloor;
    return std::log(probs_[c]);
  }
  const double t = to_internal(dim_, value);
  std::vector<double> terms;
  terms.reserve(mus_.size());
  for (std::size_t k = 0; k < mus_.size(); ++k) {
    const double mass = stats::normal_cdf((hi_ - mus_[k]) / sigmas_[k]) -
                        stats::normal_cdf((lo_ - mus_[k]) / sigmas_[k]);
    terms.push_back(std::log(weights_[k]) + normal_log_pdf(t, mus_[k], sigmas_[k]) -
                    std::log(std::max(mass, 1e-300)));
  }
  return log_sum_exp(terms);
}

Sampler::Sampler(Space space, Settings settings, std::uint64_t seed)
    : space_(std::move(space)), settings_(settings), rng_(seed) {
  if (!(settings_.gamma > 0.0 && settings_.gamma < 1.0)) {
    throw DomainError("TPE gamma must lie in (0, 1)");
  }
  if (settings_.n_candidates < 1) throw DomainError("TPE needs candidates");
}

Assignment Sampler::suggest(const std::vector<Observation>& history) {
  const bool any_ok = std::any_of(history.begin(), history.end(),
                                  [](const Observation& o) { return o.ok; });
  if (static_cast<int>(history.size()) < settings_.n_startup || !any_ok) {
    return space_.sample_uniform(rng_);
  }

  // Rank: completed trials by descending score, then failures.
  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& oa = history[a];
    const auto& ob = history[b];
    if (oa.ok != ob.ok) return oa.ok;
    return oa.ok && oa.score > ob.score;
  });
  const auto n_good = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(settings_.gamma * static_cast<double>(history.size()))));
  std::vector<bool> good(history.size(), false);
  for (std::size_t i = 0; i < n_good && i < order.size(); ++i) {
    if (history[order[i]].ok) good[order[i]] = true;
  }

  const auto& dims = space_.dimensions();
  std::vector<ParzenEstimator> below;
  std::vector<ParzenEstimator> above;
  below.reserve(dims.size());
  above.reserve(dims.size());
  for (std::size_t d = 0; d < dims.size(); ++d) {
    std::vector<double> g_vals;
    std::vector<double> b_vals;
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto& v = history[i].params.at(d);
      if (!v) continue;
      (good[i] ? g_vals : b_vals).push_back(*v);
    }
    below.emplace_back(dims[d], g_vals, settings_.prior_weight);
    above.emplace_back(dims[d], b_vals, settings_.prior_weight);
  }

  Assignment best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < settings_.n_candidates; ++c) {
    Assignment cand(dims.size());
    double score = 0.0;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      if (!space_.active(d, cand)) continue;
      const double v = below[d].sample(rng_);
      cand[d] = v;
      score += below[d].log_pdf(v) - above[d].log_pdf(v);
    }
    if (best.empty() || score > best_score) {
      best = std::move(cand);
      best_score = score;
    }
  }
  return best;
}

Result optimize(const Space& space, const Objective& objective, int n_trials,
                std::uint64_t seed, const Settings& settings) {
  if (n_trials < 1) throw DomainError("n_trials must be at least 1");
  Sampler sampler(space, settings, seed);
  Result result;
  result.history.reserve(static_cast<std::size_t>(n_trials));
  for (int t = 0; t < n_trials; ++t) {
    Observation obs;
    obs.params = sampler.suggest(result.history);
    try {
      obs.score = objective(obs.params);
      obs.ok = std::isfinite(obs.score);
    } catch (const Error&) {
      obs.ok = false;
    }
    if (!obs.ok) obs.score = -std::numeric_limits<double>::infinity();
    result.history.push_back(std::move(obs));
  }
  bool found = false;
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    const auto& o = result.history[i];
    if (o.ok && (!found || o.score > result.history[result.best].score)) {
      result.best = i;
      found = true;
    }
  }
  if (!found) {
    throw NoViableArchitectureError("all " + std::to_string(n_trials) +
                                    " trials failed");
  }
  return result;
}

std::vector<double> best_so_far(const std::vector<Observation>& history) {
  std::vector<double> out;
  out.reserve(history.size());
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& o : history) {
    if (o.ok) best = std::max(best, o.score);
    out.push_back(best);
  }
  return out;
}

}  // namespace hetfit::tpe
