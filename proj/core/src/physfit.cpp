#include "hetfit/physfit.hpp"

#include <algorithm>
#include <cmath>

#include "hetfit/error.hpp"
#include "hetfit/stats.hpp"
#include "hetfit/text.hpp"

namespace hetfit::physfit {

Problem Problem::from_dataset(const Dataset& dataset) {
  const auto& rows = dataset.records();
  const auto n = static_cast<Eigen::Index>(rows.size());
  Problem p;
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    p.x[r].resize(n);
    p.y[r].resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [xi, yi] =
          relation_point(static_cast<Relation>(r), rows[static_cast<std::size_t>(i)]);
      p.x[r](i) = xi;
      p.y[r](i) = yi;
    }
    const double var = stats::variance(p.y[r]);
    p.weight[r] = var > 0.0 ? 1.0 / var : 1.0;
  }
  return p;
}

double joint_loss(const Problem& problem, const Coefficients& log_c) {
  double loss = 0.0;
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    const double c = std::exp(log_c[r]);
    const auto n = static_cast<double>(problem.y[r].size());
    loss += problem.weight[r] * (problem.y[r] - c * problem.x[r]).squaredNorm() / n;
  }
  return loss;
}

Coefficients joint_gradient(const Problem& problem, const Coefficients& log_c) {
  Coefficients g{};
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    const double c = std::exp(log_c[r]);
    const auto n = static_cast<double>(problem.y[r].size());
    const Eigen::VectorXd resid = problem.y[r] - c * problem.x[r];
    // d/dtheta = dC/dtheta * dL/dC = C * (-2 w / n) sum(resid * x)
    g[r] = -2.0 * problem.weight[r] * c * resid.dot(problem.x[r]) / n;
  }
  return g;
}

PhysFitReport fit_coefficients_gd(const Dataset& dataset, const FitConfig& config) {
  if (dataset.size() < 3) {
    throw InsufficientDataError("coefficient fit needs at least 3 records, got " +
                                std::to_string(dataset.size()));
  }
  if (config.epochs < 0) throw DomainError("epochs must be non-negative");
  if (!(config.learning_rate >= 0.0)) throw DomainError("learning rate must be >= 0");

  const auto ls = fit_scaling(dataset);
  const auto problem = Problem::from_dataset(dataset);

  PhysFitReport rep;
  Coefficients theta{};
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    rep.least_squares[r] = ls.fits[r].coefficient;
    theta[r] = std::log(rep.least_squares[r] * config.init_factor);
  }

  const auto norm = [](const Coefficients& g) {
    double s = 0.0;
    for (double v : g) s += v * v;
    return std::sqrt(s);
  };

  Coefficients grad = joint_gradient(problem, theta);
  rep.gradient_norm = norm(grad);
  while (rep.epochs_run < config.epochs && rep.gradient_norm >= config.tolerance) {
    for (std::size_t r = 0; r < kRelationCount; ++r) {
      theta[r] -= config.learning_rate * grad[r];
    }
    ++rep.epochs_run;
    const double loss = joint_loss(problem, theta);
    // A coefficient collapsing to 0 or inf also flattens the log-space gradient.
    const bool representable = std::all_of(theta.begin(), theta.end(), [](double t) {
      const double c = std::exp(t);
      return c > 0.0 && std::isfinite(c);
    });
    if (!std::isfinite(loss) || !representable) {
      throw TrainingDivergedError("coefficient fit diverged", rep.epochs_run);
    }
    grad = joint_gradient(problem, theta);
    rep.gradient_norm = norm(grad);
  }
  rep.converged = rep.gradient_norm < config.tolerance;
  rep.loss = joint_loss(problem, theta);

  for (std::size_t r = 0; r < kRelationCount; ++r) {
    const double c = std::exp(theta[r]);
    rep.coefficients[r] = c;
    rep.divergence_pct[r] =
        std::abs(c - rep.least_squares[r]) / rep.least_squares[r] * 100.0;
    const Eigen::VectorXd resid = problem.y[r] - c * problem.x[r];
    rep.rms_residual[r] = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
  }
  return rep;
}

std::string PhysFitReport::summary() const {
  std::string out = "coefficient,gd,least_squares,divergence_pct,rms_residual\n";
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    out += std::string(relation_name(static_cast<Relation>(r))) + ',' +
           text::format_double(coefficients[r]) + ',' +
           text::format_double(least_squares[r]) + ',' +
           text::format_double(divergence_pct[r]) + ',' +
           text::format_double(rms_residual[r]) + '\n';
  }
  return out;
}

}  // namespace hetfit::physfit
