#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfit/dataset.hpp"
#include "hetfit/scaling.hpp"

namespace hetfit::physfit {

using Coefficients = std::array<double, kRelationCount>;  // C_h, C_m, C_p, C_t

/// Regressor/response pairs of the four relations plus the per-relation
/// weight 1 / var(response).
struct Problem {
  std::array<Eigen::VectorXd, kRelationCount> x;
  std::array<Eigen::VectorXd, kRelationCount> y;
  Coefficients weight{};

  static Problem from_dataset(const Dataset& dataset);
};

/// Joint loss (1/n) sum_i sum_r w_r (y_ri - C_r x_ri)^2 as a function of
/// theta = log C.
double joint_loss(const Problem& problem, const Coefficients& log_c);
Coefficients joint_gradient(const Problem& problem, const Coefficients& log_c);

struct FitConfig {
  double learning_rate = 0.05;
  int epochs = 5000;
  /// Stop once the gradient norm falls below this.
  double tolerance = 1e-9;
  /// Start from the closed-form values times this factor.
  double init_factor = 1.1;
};

struct PhysFitReport {
  Coefficients coefficients{};
  Coefficients least_squares{};
  Coefficients divergence_pct{};  // |gd - ls| / ls * 100
  Coefficients rms_residual{};    // per relation, response units
  double loss = 0.0;
  double gradient_norm = 0.0;
  int epochs_run = 0;
  bool converged = false;

  std::string summary() const;
};

/// Gradient descent on the joint loss in log-coefficient space. Throws
/// InsufficientDataError below three records and TrainingDivergedError when
/// the loss stops being finite.
PhysFitReport fit_coefficients_gd(const Dataset& dataset, const FitConfig& config = {});

}  // namespace hetfit::physfit
