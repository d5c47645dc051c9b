#include "hetfit/stats.hpp"

#include <cmath>
#include <limits>

#include "hetfit/error.hpp"

namespace hetfit::stats {

double r2_score(const Eigen::MatrixXd& predictions,
                const Eigen::MatrixXd& targets) {
  if (predictions.rows() != targets.rows() ||
      predictions.cols() != targets.cols()) {
    throw ShapeError("r2_score: prediction/target shape mismatch");
  }
  if (targets.rows() == 0) throw ShapeError("r2_score: empty input");
  double total = 0.0;
  for (Eigen::Index c = 0; c < targets.cols(); ++c) {
    const double ybar = targets.col(c).mean();
    const double ss_tot = (targets.col(c).array() - ybar).square().sum();
    if (ss_tot <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double ss_res =
        (targets.col(c) - predictions.col(c)).array().square().sum();
    total += 1.0 - ss_res / ss_tot;
  }
  return total / static_cast<double>(targets.cols());
}

double rmse(const Eigen::VectorXd& predictions,
            const Eigen::VectorXd& targets) {
  if (predictions.size() != targets.size() || targets.size() == 0) {
    throw ShapeError("rmse: size mismatch");
  }
  return std::sqrt((predictions - targets).squaredNorm() /
                   static_cast<double>(targets.size()));
}

double mean(const Eigen::VectorXd& v) {
  return v.size() ? v.mean() : std::numeric_limits<double>::quiet_NaN();
}

double variance(const Eigen::VectorXd& v) {
  if (v.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

double binomial_cdf(int k, int n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  // Sum in log space; n stays small (Boruta iteration counts).
  double sum = 0.0;
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  for (int i = 0; i <= k; ++i) {
    const double log_choose = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                              std::lgamma(n - i + 1.0);
    sum += std::exp(log_choose + i * lp + (n - i) * lq);
  }
  return std::min(sum, 1.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace hetfit::stats
