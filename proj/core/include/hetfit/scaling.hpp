#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "hetfit/dataset.hpp"

namespace hetfit {

/// The four linear scaling relations, each y = C * x through the origin:
///   h   = C_h * d
///   mdot = C_m * h * d
///   P   = C_p * U * d^2
///   T   = C_t * mdot * sqrt(U)
enum class Relation : std::size_t { kWidth = 0, kMassFlow, kPower, kThrust };
inline constexpr std::size_t kRelationCount = 4;

std::string_view relation_name(Relation r);

/// Regressor x and response y of a relation evaluated on one record.
std::pair<double, double> relation_point(Relation r,
                                         const ThrusterRecord& record);

struct RelationFit {
  double coefficient = 0.0;
  /// Mean squared through-origin residual (divides by n).
  double residual_variance = 0.0;
  double r_squared = 0.0;

  double sigma() const;
};

struct ScalingCoefficients {
  std::array<RelationFit, kRelationCount> fits{};
  std::size_t n_records = 0;

  double c_h() const { return fits[0].coefficient; }
  double c_m() const { return fits[1].coefficient; }
  double c_p() const { return fits[2].coefficient; }
  double c_t() const { return fits[3].coefficient; }
  const RelationFit& fit(Relation r) const {
    return fits[static_cast<std::size_t>(r)];
  }
};

/// Closed-form through-origin slope sum(xy) / sum(x^2) with residual stats.
RelationFit fit_through_origin(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y);

/// Fits every relation on all records. Needs at least three records.
ScalingCoefficients fit_scaling(const Dataset& dataset);

struct Band {
  double low = 0.0;
  double high = 0.0;
};

/// Symmetric Gaussian 95% band: prediction +/- 1.96 * sigma.
Band prediction_band(double residual_variance, double prediction);

struct DesignPoint {
  double power_w = 0.0;
  double ud_v = 0.0;
  double d_mm = 0.0;
  double h_mm = 0.0;
  double mdot_mg_s = 0.0;
  double thrust_mn = 0.0;
  double isp_s = 0.0;
  double eta_anode = 0.0;

  Band d_band;
  Band h_band;
  Band mdot_band;
  Band thrust_band;
  Band isp_band;
  Band eta_band;
};

/// Sizes a thruster for a (power, voltage) target by chaining the scaling
/// relations, then the anode Isp and efficiency relations.
DesignPoint synthesize_design(double power_w, double ud_v,
                              const ScalingCoefficients& coeffs);

}  // namespace hetfit
