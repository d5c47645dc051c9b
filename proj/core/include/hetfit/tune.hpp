#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfit/nn.hpp"
#include "hetfit/tpe.hpp"

namespace hetfit::tune {

/// Architecture and optimizer hyperparameters for one surrogate.
struct Hyperparameters {
  std::vector<int> widths;  // one per hidden layer
  nn::Activation activation = nn::Activation::kReLU;
  nn::OptimizerKind optimizer = nn::OptimizerKind::kAdam;
  double learning_rate = 1e-2;

  std::size_t n_layers() const { return widths.size(); }
  /// Hidden layers plus an identity regression head of `outputs` nodes.
  std::vector<nn::LayerSpec> layer_specs(int outputs) const;
};

/// Bounds of the architecture search.
struct SearchSpace {
  int min_layers = 2;
  int max_layers = 6;
  int min_width = 4;
  int max_width = 128;
  double min_lr = 1e-4;
  double max_lr = 1e-1;
  std::vector<nn::Activation> activations = {
      nn::Activation::kSELU, nn::Activation::kTanh, nn::Activation::kReLU};
  std::vector<nn::OptimizerKind> optimizers = {
      nn::OptimizerKind::kSGD, nn::OptimizerKind::kMomentum,
      nn::OptimizerKind::kAdam};

  /// Dimension order: n_layers, width_0 .. width_{max-1} (log-uniform, width
  /// i active only when n_layers > i), activation, optimizer, learning rate
  /// (log-uniform).
  tpe::Space to_tpe() const;
  Hyperparameters decode(const tpe::Assignment& a) const;
  bool contains(const Hyperparameters& hp) const;
};

/// Training and validation matrices, already scaled.
struct Split {
  Eigen::MatrixXd x_train;
  Eigen::MatrixXd y_train;
  Eigen::MatrixXd x_val;
  Eigen::MatrixXd y_val;
};

/// Shuffles rows with `seed` and keeps the first `train_fraction` for
/// training. Both halves are non-empty.
Split make_split(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                 double train_fraction, std::uint64_t seed);

enum class TrialStatus { kComplete, kFailed };

struct Trial {
  int id = 0;
  Hyperparameters params;
  double score = 0.0;  // validation R^2, -inf when failed
  double wall_ms = 0.0;
  TrialStatus status = TrialStatus::kFailed;
  std::string message;  // failure reason
};

struct TrialConfig {
  int epochs = 400;
  std::uint64_t seed = 0;  // network initialization and batch order
};

/// Builds, trains and scores one network. Never throws for numerical
/// problems: divergence, non-finite scores and an undefined R^2 (constant
/// validation target) come back as failed trials.
Trial run_trial(const Hyperparameters& hp, const Split& split,
                const TrialConfig& config);

struct TuneConfig {
  int n_trials = 50;
  std::uint64_t seed = 0;
  TrialConfig trial;
  tpe::Settings tpe;
};

struct TuneResult {
  std::vector<Trial> history;
  std::size_t best = 0;
  const Trial& best_trial() const { return history.at(best); }
};

/// TPE search maximizing validation R^2. Throws NoViableArchitectureError
/// when every trial fails.
TuneResult optimize(const SearchSpace& space, const Split& split,
                    const TuneConfig& config);

/// `trial_id,n_layers,widths,activation,optimizer,lr,score,status,wall_ms`
/// with widths joined by ';'.
std::string history_csv(const std::vector<Trial>& history,
                        bool include_wall_time = true);

std::string format_widths(const std::vector<int>& widths);
std::vector<int> parse_widths(const std::string& text);

}  // namespace hetfit::tune
