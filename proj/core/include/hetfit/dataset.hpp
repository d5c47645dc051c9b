#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hetfit {

/// Standard gravity [m/s^2].
inline constexpr double kStandardGravity = 9.80665;

/// One experimental thruster entry. Thrust is stored in millinewtons and the
/// flow is the anode flow.
struct ThrusterRecord {
  std::string name;
  double power_w = 0.0;
  double ud_v = 0.0;
  double d_mm = 0.0;
  double h_mm = 0.0;
  double l_mm = 0.0;
  double mdot_mg_s = 0.0;
  double thrust_mn = 0.0;
  double isp_s = 0.0;
};

struct DerivedFeatures {
  double log10_power = 0.0;
  double volume_mm3 = 0.0;
  double power_density = 0.0;  // W/mm^3
  double eta_anode = 0.0;
};

/// Column order of the feature matrix: the eight numeric record fields
/// followed by the derived features.
enum class Feature : std::size_t {
  kPower = 0,
  kVoltage,
  kDiameter,
  kWidth,
  kLength,
  kMassFlow,
  kThrust,
  kIsp,
  kLog10Power,
  kVolume,
  kPowerDensity,
  kEtaAnode,
};
inline constexpr std::size_t kFeatureCount = 12;
inline constexpr std::size_t kRecordFieldCount = 8;

const std::array<std::string_view, kFeatureCount>& feature_names();
std::optional<std::size_t> feature_index(std::string_view name);

/// CSV header accepted by ingestion and written by exports.
inline constexpr std::string_view kCsvHeader =
    "name,power_w,ud_v,d_mm,h_mm,l_mm,mdot_mg_s,thrust_mn,isp_s";

struct IngestOptions {
  double max_power_w = 2000.0;  // power_w in (0, max]
  double min_voltage_v = 100.0;
  double max_voltage_v = 600.0;
  bool permissive = false;  // skip invalid rows instead of rejecting the file
};

/// Ordered record collection. Immutable once built.
class Dataset {
 public:
  Dataset() = default;
  /// Validates every record and name uniqueness; throws ValidationError.
  explicit Dataset(std::vector<ThrusterRecord> records,
                   const IngestOptions& options = {});

  const std::vector<ThrusterRecord>& records() const noexcept {
    return records_;
  }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const ThrusterRecord& operator[](std::size_t i) const { return records_[i]; }

  std::vector<std::string> feature_names() const;

  /// n x kFeatureCount matrix of raw and derived features in real units.
  Eigen::MatrixXd feature_matrix() const;

  /// Rows for which keep[i] is true, order preserved.
  Dataset filter(const std::vector<bool>& keep) const;

 private:
  std::vector<ThrusterRecord> records_;
};

struct RowIssue {
  std::size_t line = 0;    // 1-based line number in the file
  std::size_t column = 0;  // 1-based CSV column, 0 when not column-specific
  bool parse_error = false;
  std::string message;
};

struct IngestResult {
  Dataset dataset;
  std::vector<RowIssue> issues;  // rows skipped in permissive mode
};

/// Parses CSV text. In strict mode any bad row rejects the whole file with a
/// ValidationError (or ParseError) listing every offending row; in
/// permissive mode bad rows are reported in `issues` and skipped.
IngestResult ingest_csv(std::string_view csv_text,
                        const IngestOptions& options = {});

/// Strict ingestion.
Dataset parse_dataset(std::string_view csv_text,
                      const IngestOptions& options = {});

std::string to_csv(const Dataset& dataset);
std::string format_record_row(const ThrusterRecord& record);

/// Throws ValidationError naming the record when an invariant fails.
void validate_record(const ThrusterRecord& record,
                     const IngestOptions& options = {});

/// Builds a record from a real-unit feature row (only the first
/// kRecordFieldCount columns are read).
ThrusterRecord record_from_features(std::string name,
                                    const Eigen::Ref<const Eigen::VectorXd>& row);

// Anode relations. Mass flows in mg/s, thrust in mN, power in W.

/// Converts a whole-thruster quantity to its anode-referenced value:
/// total_value * mdot_total / mdot_anode.
double anode_parameter(double total_value, double mdot_total,
                       double mdot_anode);

/// Anode specific impulse [s].
double isp_anode(double thrust_mn, double mdot_mg_s);

/// Anode efficiency T^2 / (2 mdot P). The printed relation T / (2 mdot P)
/// is not dimensionless; the quadratic form is the physical one.
double eta_anode(double thrust_mn, double mdot_mg_s, double power_w);

/// Annular channel volume pi * d * h * L with d the mean diameter.
double channel_volume(double d_mm, double h_mm, double l_mm);

DerivedFeatures derive_features(const ThrusterRecord& record);

// ---------------------------------------------------------------------------
// Min-max normalization.

struct FeatureRange {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  bool degenerate() const noexcept { return !(max > min); }
};

/// Per-feature (min, max) pairs in real units. Degenerate features
/// (min == max) scale to the constant 0.5 and unscale to min.
class ScalerParams {
 public:
  ScalerParams() = default;
  explicit ScalerParams(std::vector<FeatureRange> ranges);

  const std::vector<FeatureRange>& ranges() const noexcept { return ranges_; }
  std::size_t size() const noexcept { return ranges_.size(); }
  const FeatureRange& operator[](std::size_t i) const { return ranges_[i]; }

  bool degenerate(std::size_t i) const { return ranges_.at(i).degenerate(); }
  std::vector<std::size_t> active_columns() const;
  std::vector<std::size_t> degenerate_columns() const;

  double scale_value(std::size_t column, double value) const;
  double unscale_value(std::size_t column, double scaled) const;

  /// Values outside the fitted range map outside [0, 1]; nothing is clamped.
  Eigen::MatrixXd scale(const Eigen::MatrixXd& real) const;
  Eigen::MatrixXd unscale(const Eigen::MatrixXd& scaled) const;

  /// Scaler restricted to the given columns, in the given order.
  ScalerParams select(const std::vector<std::size_t>& columns) const;

 private:
  std::vector<FeatureRange> ranges_;
};

ScalerParams fit_scaler(const Eigen::MatrixXd& real,
                        const std::vector<std::string>& names);
ScalerParams fit_scaler(const Dataset& dataset);

Eigen::MatrixXd scale(const Dataset& dataset, const ScalerParams& scaler);

}  // namespace hetfit
