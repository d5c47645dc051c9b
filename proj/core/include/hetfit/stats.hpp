#pragma once

#include <Eigen/Dense>

namespace hetfit::stats {

/// Coefficient of determination over every entry of the two matrices,
/// computed per output column and averaged. Returns NaN when some target
/// column has zero variance (R² undefined).
double r2_score(const Eigen::MatrixXd& predictions,
                const Eigen::MatrixXd& targets);

double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets);

double mean(const Eigen::VectorXd& v);

/// Population variance (divides by n).
double variance(const Eigen::VectorXd& v);

/// P(X <= k) for X ~ Binomial(n, p).
double binomial_cdf(int k, int n, double p);

double normal_cdf(double x);

}  // namespace hetfit::stats
