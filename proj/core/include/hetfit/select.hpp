#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfit/nn.hpp"

namespace hetfit::select {

/// Maps a feature matrix to predictions (one column).
using Predictor = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

/// R² of the unmodified data minus R² with column f shuffled, averaged over
/// `repeats` shuffles.
Eigen::VectorXd permutation_importance(const Predictor& model,
                                       const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y,
                                       std::uint64_t seed, int repeats = 5);

/// Fits a model on (x, y) and returns one importance per column of x.
using ImportanceProvider = std::function<Eigen::VectorXd(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed)>;

struct MlpImportanceConfig {
  std::vector<nn::LayerSpec> hidden = {{16, nn::Activation::kTanh},
                                       {8, nn::Activation::kTanh}};
  int epochs = 300;
  double learning_rate = 1e-2;
  int repeats = 5;
  /// Rows held out from training and used for scoring.
  double holdout_fraction = 0.3;
};

/// Standardizes x and y, trains a small MLP with Adam on a random part of the
/// rows and scores it with permutation_importance on the held-out rest.
ImportanceProvider mlp_importance(MlpImportanceConfig config = {});

struct BorutaConfig {
  int max_iter = 50;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

enum class Decision { kTentative, kConfirmed, kRejected };

struct BorutaResult {
  std::vector<std::string> confirmed;
  std::vector<std::string> tentative;
  std::vector<std::string> rejected;
  std::vector<std::string> features;  // candidate order
  std::vector<int> hits;              // per candidate
  std::vector<Decision> decisions;    // per candidate
  int iterations = 0;

  std::string report() const;
};

/// Boruta over the columns of x. Every iteration shuffles each column into a
/// shadow copy, fits the provider on [x | shadows] and counts a hit for each
/// feature beating the best shadow. After each iteration undecided features
/// get a two-sided binomial test (p = 0.5) on hits so far; a decision, once
/// made, is final. Stops early when nothing is left undecided.
BorutaResult boruta(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const std::vector<std::string>& names,
                    const BorutaConfig& config,
                    const ImportanceProvider& provider = mlp_importance());

}  // namespace hetfit::select
