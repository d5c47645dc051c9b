#include "hetfit/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "hetfit/error.hpp"

namespace hetfit {

namespace {
constexpr double kZ95 = 1.96;
}

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::kWidth: return "c_h";
    case Relation::kMassFlow: return "c_m";
    case Relation::kPower: return "c_p";
    case Relation::kThrust: return "c_t";
  }
  return "?";
}

std::pair<double, double> relation_point(Relation r, const ThrusterRecord& x) {
  switch (r) {
    case Relation::kWidth: return {x.d_mm, x.h_mm};
    case Relation::kMassFlow: return {x.h_mm * x.d_mm, x.mdot_mg_s};
    case Relation::kPower: return {x.ud_v * x.d_mm * x.d_mm, x.power_w};
    case Relation::kThrust: return {x.mdot_mg_s * std::sqrt(x.ud_v), x.thrust_mn};
  }
  return {0.0, 0.0};
}

double RelationFit::sigma() const { return std::sqrt(residual_variance); }

RelationFit fit_through_origin(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw ShapeError("regressor/response size mismatch");
  if (x.size() == 0) throw InsufficientDataError("no points to fit");
  const double sxx = x.squaredNorm();
  if (!(sxx > 0.0)) throw DomainError("regressor is identically zero");

  RelationFit fit;
  fit.coefficient = x.dot(y) / sxx;
  const Eigen::VectorXd resid = y - fit.coefficient * x;
  const double n = static_cast<double>(x.size());
  fit.residual_variance = resid.squaredNorm() / n;
  const double ss_tot = (y.array() - y.mean()).square().sum();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - resid.squaredNorm() / ss_tot : 1.0;
  return fit;
}

ScalingCoefficients fit_scaling(const Dataset& dataset) {
  if (dataset.size() < 3) {
    throw InsufficientDataError("scaling fit needs at least 3 records, got " +
                                std::to_string(dataset.size()));
  }
  const auto n = static_cast<Eigen::Index>(dataset.size());
  ScalingCoefficients out;
  out.n_records = dataset.size();
  for (std::size_t k = 0; k < kRelationCount; ++k) {
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::tie(x(i), y(i)) = relation_point(static_cast<Relation>(k),
                                            dataset[static_cast<std::size_t>(i)]);
    }
    out.fits[k] = fit_through_origin(x, y);
    if (!(out.fits[k].coefficient > 0.0)) {
      throw ValidationError("fitted " +
                            std::string(relation_name(static_cast<Relation>(k))) +
                            " is not positive");
    }
  }
  if (!(out.c_h() < 1.0)) {
    throw ValidationError("fitted c_h must lie in (0, 1)");
  }
  return out;
}

Band prediction_band(double residual_variance, double prediction) {
  const double half = kZ95 * std::sqrt(std::max(residual_variance, 0.0));
  return {prediction - half, prediction + half};
}

DesignPoint synthesize_design(double power_w, double ud_v,
                              const ScalingCoefficients& c) {
  if (!(power_w > 0.0) || !(ud_v > 0.0)) {
    throw DomainError("design targets must be positive");
  }
  DesignPoint p;
  p.power_w = power_w;
  p.ud_v = ud_v;
  p.d_mm = std::sqrt(power_w / (c.c_p() * ud_v));
  p.h_mm = c.c_h() * p.d_mm;
  p.mdot_mg_s = c.c_m() * p.h_mm * p.d_mm;
  p.thrust_mn = c.c_t() * p.mdot_mg_s * std::sqrt(ud_v);
  p.isp_s = isp_anode(p.thrust_mn, p.mdot_mg_s);
  p.eta_anode = eta_anode(p.thrust_mn, p.mdot_mg_s, power_w);

  const auto clamp_low = [](Band b) {
    b.low = std::max(b.low, 0.0);
    return b;
  };

  // Diameter comes from inverting the power relation, so its band is the
  // set of diameters whose predicted power stays inside the power band.
  const Band pb = prediction_band(c.fit(Relation::kPower).residual_variance,
                                  power_w);
  const double denom = c.c_p() * ud_v;
  p.d_band = {std::sqrt(std::max(pb.low, 0.0) / denom),
              std::sqrt(pb.high / denom)};

  p.h_band = clamp_low(
      prediction_band(c.fit(Relation::kWidth).residual_variance, p.h_mm));
  p.mdot_band = clamp_low(
      prediction_band(c.fit(Relation::kMassFlow).residual_variance, p.mdot_mg_s));
  p.thrust_band = clamp_low(
      prediction_band(c.fit(Relation::kThrust).residual_variance, p.thrust_mn));
  p.isp_band = {isp_anode(p.thrust_band.low, p.mdot_mg_s),
                isp_anode(p.thrust_band.high, p.mdot_mg_s)};
  p.eta_band = {eta_anode(p.thrust_band.low, p.mdot_mg_s, power_w),
                eta_anode(p.thrust_band.high, p.mdot_mg_s, power_w)};
  return p;
}

}  // namespace hetfit
