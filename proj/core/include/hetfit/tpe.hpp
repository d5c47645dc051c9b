#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hetfit/random.hpp"

namespace hetfit::tpe {

enum class DimensionKind { kFloat, kInt, kCategorical };

/// A dimension is only active when its parent dimension's value is at least
/// `min_parent_value` (e.g. the width of layer 4 exists only when the layer
/// count is >= 4).
struct Condition {
  std::size_t parent = 0;
  double min_parent_value = 0.0;
};

struct Dimension {
  std::string name;
  DimensionKind kind = DimensionKind::kFloat;
  double low = 0.0;   // inclusive; unused for categorical
  double high = 1.0;  // inclusive; unused for categorical
  bool log = false;   // sample uniformly in log space
  int choices = 0;    // categorical only
  std::optional<Condition> condition;

  static Dimension real(std::string name, double low, double high,
                        bool log = false);
  static Dimension integer(std::string name, int low, int high,
                           bool log = false);
  static Dimension categorical(std::string name, int choices);
};

/// One value per dimension; inactive dimensions hold nullopt. Categorical
/// values are choice indices, integers are whole numbers.
using Assignment = std::vector<std::optional<double>>;

class Space {
 public:
  Space() = default;
  explicit Space(std::vector<Dimension> dims);

  const std::vector<Dimension>& dimensions() const noexcept { return dims_; }
  std::size_t size() const noexcept { return dims_.size(); }

  bool active(std::size_t dim, const Assignment& partial) const;

  /// One uniform u in [0, 1) per active dimension, in dimension order.
  /// Float: low + u (high - low), or the same in log space.
  /// Int: t = (low - 0.5) + u (high - low + 1) (log space for log
  /// dimensions), then rounded to nearest and clamped to [low, high].
  /// Categorical: floor(u * choices).
  Assignment sample_uniform(Rng& rng) const;

  /// True when every active value lies inside its bounds and every inactive
  /// dimension is empty.
  bool contains(const Assignment& a) const;

 private:
  std::vector<Dimension> dims_;
};

struct Settings {
  double gamma = 0.25;  // fraction of completed trials treated as "good"
  int n_startup = 10;   // uniform draws before the density model kicks in
  int n_candidates = 24;
  double prior_weight = 1.0;
};

struct Observation {
  Assignment params;
  double score = 0.0;  // larger is better
  bool ok = false;     // failed trials rank below every completed one
};

/// Tree-structured Parzen Estimator over a Space. Scores are maximized.
class Sampler {
 public:
  Sampler(Space space, Settings settings, std::uint64_t seed);

  /// Uniform draw while fewer than n_startup observations exist; afterwards
  /// splits the history at the gamma quantile, fits per-dimension Parzen
  /// estimators l (good) and g (bad), draws n_candidates from l and returns
  /// the one maximizing l(x) / g(x).
  Assignment suggest(const std::vector<Observation>& history);

  const Space& space() const noexcept { return space_; }
  const Settings& settings() const noexcept { return settings_; }

 private:
  Space space_;
  Settings settings_;
  Rng rng_;
};

/// Density of one dimension built from observed values: a mixture of
/// truncated Gaussians (numeric, in internal log/linear coordinates) or a
/// smoothed frequency table (categorical). Exposed for testing.
class ParzenEstimator {
 public:
  ParzenEstimator(const Dimension& dim, const std::vector<double>& observed,
                  double prior_weight);

  double sample(Rng& rng) const;  // in external coordinates
  double log_pdf(double value) const;

 private:
  Dimension dim_;
  double lo_ = 0.0;  // internal bounds
  double hi_ = 0.0;
  std::vector<double> mus_;
  std::vector<double> sigmas_;
  std::vector<double> weights_;
  std::vector<double> probs_;  // categorical
};

struct Result {
  std::vector<Observation> history;
  std::size_t best = 0;  // index into history
  const Observation& best_observation() const { return history.at(best); }
};

/// Objective returns a score to maximize; an exception or a non-finite
/// return marks the trial failed. Throws NoViableArchitectureError if every
/// trial fails.
using Objective = std::function<double(const Assignment&)>;

Result optimize(const Space& space, const Objective& objective, int n_trials,
                std::uint64_t seed, const Settings& settings = {});

/// Running maximum of completed scores (-inf until the first success).
std::vector<double> best_so_far(const std::vector<Observation>& history);

}  // namespace hetfit::tpe
