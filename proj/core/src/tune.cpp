#include "hetfit/tune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "hetfit/error.hpp"
#include "hetfit/random.hpp"
#include "hetfit/stats.hpp"
#include "hetfit/text.hpp"

namespace hetfit::tune {

std::vector<nn::LayerSpec> Hyperparameters::layer_specs(int outputs) const {
  std::vector<nn::LayerSpec> specs;
  specs.reserve(widths.size() + 1);
  for (int w : widths) specs.push_back({w, activation});
  specs.push_back({outputs, nn::Activation::kIdentity});
  return specs;
}

tpe::Space SearchSpace::to_tpe() const {
  std::vector<tpe::Dimension> dims;
  dims.push_back(tpe::Dimension::integer("n_layers", min_layers, max_layers));
  for (int i = 0; i < max_layers; ++i) {
    auto d = tpe::Dimension::integer("width_" + std::to_string(i), min_width,
                                     max_width, /*log=*/true);
    if (i >= min_layers) d.condition = tpe::Condition{0, static_cast<double>(i + 1)};
    dims.push_back(std::move(d));
  }
  dims.push_back(tpe::Dimension::categorical("activation",
                                             static_cast<int>(activations.size())));
  dims.push_back(tpe::Dimension::categorical("optimizer",
                                             static_cast<int>(optimizers.size())));
  dims.push_back(tpe::Dimension::real("learning_rate", min_lr, max_lr, /*log=*/true));
  return tpe::Space(std::move(dims));
}

Hyperparameters SearchSpace::decode(const tpe::Assignment& a) const {
  const auto n_dims = static_cast<std::size_t>(max_layers) + 4;
  if (a.size() != n_dims || !a[0]) {
    throw ShapeError("assignment does not match the architecture space");
  }
  Hyperparameters hp;
  const int n_layers = static_cast<int>(*a[0]);
  for (int i = 0; i < n_layers; ++i) {
    const auto& w = a.at(static_cast<std::size_t>(1 + i));
    if (!w) throw ShapeError("missing width for active layer");
    hp.widths.push_back(static_cast<int>(*w));
  }
  const std::size_t base = 1 + static_cast<std::size_t>(max_layers);
  hp.activation = activations.at(static_cast<std::size_t>(a.at(base).value()));
  hp.optimizer = optimizers.at(static_cast<std::size_t>(a.at(base + 1).value()));
  hp.learning_rate = a.at(base + 2).value();
  return hp;
}

bool SearchSpace::contains(const Hyperparameters& hp) const {
  const int n = static_cast<int>(hp.widths.size());
  if (n < min_layers || n > max_layers) return false;
  for (int w : hp.widths) {
    if (w < min_width || w > max_width) return false;
  }
  if (!(hp.learning_rate >= min_lr && hp.learning_rate <= max_lr)) return false;
  if (std::find(activations.begin(), activations.end(), hp.activation) ==
      activations.end()) {
    return false;
  }
  return std::find(optimizers.begin(), optimizers.end(), hp.optimizer) !=
         optimizers.end();
}

Split make_split(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                 double train_fraction, std::uint64_t seed) {
  if (x.rows() != y.rows()) throw ShapeError("split: row count mismatch");
  if (x.rows() < 2) throw InsufficientDataError("split needs at least 2 rows");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("train fraction must lie in (0, 1)");
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());
  auto n_train = static_cast<Eigen::Index>(
      std::floor(train_fraction * static_cast<double>(x.rows())));
  n_train = std::clamp<Eigen::Index>(n_train, 1, x.rows() - 1);
  const std::vector<Eigen::Index> tr(idx.begin(), idx.begin() + n_train);
  const std::vector<Eigen::Index> va(idx.begin() + n_train, idx.end());
  return {x(tr, Eigen::all), y(tr, Eigen::all), x(va, Eigen::all),
          y(va, Eigen::all)};
}

Trial run_trial(const Hyperparameters& hp, const Split& split,
                const TrialConfig& config) {
  Trial t;
  t.params = hp;
  t.score = -std::numeric_limits<double>::infinity();
  const auto start = std::chrono::steady_clock::now();
  const auto finish = [&] {
    t.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    return t;
  };
  if (split.x_val.rows() == 0) {
    t.message = "empty validation set";
    return finish();
  }
  for (Eigen::Index c = 0; c < split.y_val.cols(); ++c) {
    if (stats::variance(split.y_val.col(c)) <= 0.0) {
      t.message = "validation target is constant; R^2 undefined";
      return finish();
    }
  }
  try {
    const auto specs = hp.layer_specs(static_cast<int>(split.y_train.cols()));
    auto net = nn::Mlp::build(static_cast<int>(split.x_train.cols()), specs,
                              config.seed);
    nn::TrainConfig tc;
    tc.epochs = config.epochs;
    tc.learning_rate = hp.learning_rate;
    tc.optimizer = hp.optimizer;
    tc.seed = config.seed;
    const auto trained = nn::train(std::move(net), split.x_train, split.y_train, tc);
    const double r2 =
        stats::r2_score(trained.model.forward_batch(split.x_val), split.y_val);
    if (!std::isfinite(r2)) {
      t.message = "non-finite validation score";
      return finish();
    }
    t.score = r2;
    t.status = TrialStatus::kComplete;
  } catch (const TrainingDivergedError& e) {
    t.message = e.what();
  } catch (const Error& e) {
    t.message = e.what();
  }
  return finish();
}

TuneResult optimize(const SearchSpace& space, const Split& split,
                    const TuneConfig& config) {
  TuneResult result;
  const auto tpe_space = space.to_tpe();
  int next_id = 0;
  const tpe::Objective objective = [&](const tpe::Assignment& a) {
    const auto hp = space.decode(a);
    TrialConfig tc = config.trial;
    tc.seed = config.trial.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(next_id);
    auto trial = run_trial(hp, split, tc);
    trial.id = next_id++;
    const double score = trial.score;
    result.history.push_back(std::move(trial));
    return score;
  };
  const auto tpe_result =
      tpe::optimize(tpe_space, objective, config.n_trials, config.seed, config.tpe);
  result.best = tpe_result.best;
  return result;
}

std::string format_widths(const std::vector<int>& widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(widths[i]);
  }
  return out;
}

std::vector<int> parse_widths(const std::string& s) {
  std::vector<int> out;
  for (const auto& tok : text::split(s, s.find(';') != std::string::npos ? ';' : ',')) {
    const auto v = text::parse_double(tok);
    if (!v || *v < 1 || *v != std::floor(*v)) {
      throw ParseError("bad layer width '" + tok + "'", 0, 0);
    }
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

std::string history_csv(const std::vector<Trial>& history, bool include_wall_time) {
  std::string out =
      "trial_id,n_layers,widths,activation,optimizer,lr,score,status,wall_ms\n";
  for (const auto& t : history) {
    out += std::to_string(t.id) + ',' + std::to_string(t.params.n_layers()) + ',' +
           format_widths(t.params.widths) + ',' +
           std::string(nn::to_string(t.params.activation)) + ',' +
           std::string(nn::to_string(t.params.optimizer)) + ',' +
           text::format_double(t.params.learning_rate) + ',' +
           (t.status == TrialStatus::kComplete ? text::format_double(t.score)
                                               : std::string("-inf")) +
           ',' + (t.status == TrialStatus::kComplete ? "complete" : "failed") + ',' +
           (include_wall_time ? text::format_double(std::round(t.wall_ms * 1000) / 1000)
                              : std::string("0")) +
           '\n';
  }
  return out;
}

}  // namespace hetfit::tune
