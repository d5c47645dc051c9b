#include "hetfit/dataset.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "hetfit/error.hpp"
#include "hetfit/text.hpp"

namespace hetfit {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "power_w",   "ud_v",       "d_mm",        "h_mm",
    "l_mm",      "mdot_mg_s",  "thrust_mn",   "isp_s",
    "log10_power", "volume_mm3", "power_density", "eta_anode",
};

constexpr std::size_t kCsvColumns = 1 + kRecordFieldCount;

double& field(ThrusterRecord& r, std::size_t i) {
  switch (i) {
    case 0: return r.power_w;
    case 1: return r.ud_v;
    case 2: return r.d_mm;
    case 3: return r.h_mm;
    case 4: return r.l_mm;
    case 5: return r.mdot_mg_s;
    case 6: return r.thrust_mn;
    default: return r.isp_s;
  }
}

double field(const ThrusterRecord& r, std::size_t i) {
  return field(const_cast<ThrusterRecord&>(r), i);
}

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() {
  return kFeatureNames;
}

std::optional<std::size_t> feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i) {
    if (kFeatureNames[i] == name) return i;
  }
  return std::nullopt;
}

void validate_record(const ThrusterRecord& r, const IngestOptions& options) {
  const auto fail = [&](const std::string& what) {
    throw ValidationError("record '" + r.name + "': " + what);
  };
  if (r.name.empty()) throw ValidationError("record with empty name");
  for (std::size_t i = 0; i < kRecordFieldCount; ++i) {
    const double v = field(r, i);
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail(std::string(kFeatureNames[i]) + " must be strictly positive (got " +
           text::format_double(v) + ")");
    }
  }
  if (!(r.h_mm < r.d_mm)) fail("channel width h_mm must be below d_mm");
  if (r.power_w > options.max_power_w) {
    fail("power_w outside (0, " + text::format_double(options.max_power_w) +
         "]");
  }
  if (r.ud_v < options.min_voltage_v || r.ud_v > options.max_voltage_v) {
    fail("ud_v outside [" + text::format_double(options.min_voltage_v) + ", " +
         text::format_double(options.max_voltage_v) + "]");
  }
}

Dataset::Dataset(std::vector<ThrusterRecord> records,
                 const IngestOptions& options)
    : records_(std::move(records)) {
  std::set<std::string> seen;
  for (const auto& r : records_) {
    validate_record(r, options);
    if (!seen.insert(r.name).second) {
      throw ValidationError("duplicate record name '" + r.name + "'");
    }
  }
}

std::vector<std::string> Dataset::feature_names() const {
  return {kFeatureNames.begin(), kFeatureNames.end()};
}

Eigen::MatrixXd Dataset::feature_matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records_.size()),
                    static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < kRecordFieldCount; ++j) {
      m(row, static_cast<Eigen::Index>(j)) = field(r, j);
    }
    const auto d = derive_features(r);
    m(row, 8) = d.log10_power;
    m(row, 9) = d.volume_mm3;
    m(row, 10) = d.power_density;
    m(row, 11) = d.eta_anode;
  }
  return m;
}

Dataset Dataset::filter(const std::vector<bool>& keep) const {
  if (keep.size() != records_.size()) {
    throw ShapeError("filter mask length does not match record count");
  }
  Dataset out;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (keep[i]) out.records_.push_back(records_[i]);
  }
  return out;
}

IngestResult ingest_csv(std::string_view csv_text,
                        const IngestOptions& options) {
  auto rows = text::lines(csv_text);
  while (!rows.empty() && text::trim(rows.back()).empty()) rows.pop_back();
  if (rows.empty()) throw ParseError("empty CSV input: missing header", 1, 0);
  if (text::trim(rows.front()) != kCsvHeader) {
    throw ParseError("header mismatch: expected '" + std::string(kCsvHeader) +
                         "', got '" + std::string(text::trim(rows.front())) +
                         "'",
                     1, 0);
  }

  std::vector<ThrusterRecord> records;
  std::vector<RowIssue> issues;
  std::set<std::string> seen;
  for (std::size_t li = 1; li < rows.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (text::trim(rows[li]).empty()) continue;
    try {
      const auto cells = text::split(rows[li], ',');
      if (cells.size() != kCsvColumns) {
        throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(kCsvColumns) + " columns, got " +
                             std::to_string(cells.size()),
                         line_no, 0);
      }
      ThrusterRecord r;
      r.name = std::string(text::trim(cells[0]));
      for (std::size_t j = 0; j < kRecordFieldCount; ++j) {
        const auto v = text::parse_double(cells[j + 1]);
        if (!v) {
          throw ParseError("line " + std::to_string(line_no) + ", column " +
                               std::string(kFeatureNames[j]) +
                               ": malformed number '" +
                               std::string(text::trim(cells[j + 1])) + "'",
                           line_no, j + 2);
        }
        field(r, j) = *v;
      }
      try {
        validate_record(r, options);
      } catch (const ValidationError& e) {
        throw ValidationError("line " + std::to_string(line_no) + ": " +
                              e.what());
      }
      if (!seen.insert(r.name).second) {
        throw ValidationError("line " + std::to_string(line_no) +
                              ": duplicate record name '" + r.name + "'");
      }
      records.push_back(std::move(r));
    } catch (const ParseError& e) {
      issues.push_back({line_no, e.column(), true, e.what()});
    } catch (const Error& e) {
      issues.push_back({line_no, 0, false, e.what()});
    }
  }

  if (!issues.empty() && !options.permissive) {
    std::ostringstream msg;
    msg << issues.size() << " invalid row(s):";
    const RowIssue* first_parse = nullptr;
    for (const auto& issue : issues) {
      msg << "\n  " << issue.message;
      if (issue.parse_error && !first_parse) first_parse = &issue;
    }
    if (first_parse) {
      throw ParseError(msg.str(), first_parse->line, first_parse->column);
    }
    throw ValidationError(msg.str());
  }
  if (records.empty()) throw ValidationError("dataset has no valid records");
  return {Dataset(std::move(records), options), std::move(issues)};
}

Dataset parse_dataset(std::string_view csv_text, const IngestOptions& options) {
  IngestOptions strict = options;
  strict.permissive = false;
  return ingest_csv(csv_text, strict).dataset;
}

std::string format_record_row(const ThrusterRecord& r) {
  std::string out = r.name;
  for (std::size_t j = 0; j < kRecordFieldCount; ++j) {
    out += ',';
    out += text::format_double(field(r, j));
  }
  return out;
}

std::string to_csv(const Dataset& dataset) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : dataset.records()) {
    out += format_record_row(r);
    out += '\n';
  }
  return out;
}

ThrusterRecord record_from_features(
    std::string name, const Eigen::Ref<const Eigen::VectorXd>& row) {
  if (row.size() < static_cast<Eigen::Index>(kRecordFieldCount)) {
    throw ShapeError("feature row too short for a record");
  }
  ThrusterRecord r;
  r.name = std::move(name);
  for (std::size_t j = 0; j < kRecordFieldCount; ++j) {
    field(r, j) = row(static_cast<Eigen::Index>(j));
  }
  return r;
}

double anode_parameter(double total_value, double mdot_total,
                       double mdot_anode) {
  if (!(mdot_anode > 0.0)) {
    throw DomainError("anode_parameter: anode mass flow must be positive");
  }
  return total_value * mdot_total / mdot_anode;
}

double isp_anode(double thrust_mn, double mdot_mg_s) {
  if (!(mdot_mg_s > 0.0)) {
    throw DomainError("isp_anode: mass flow must be positive");
  }
  if (thrust_mn < 0.0) throw DomainError("isp_anode: negative thrust");
  return (thrust_mn * 1e-3) / (mdot_mg_s * 1e-6 * kStandardGravity);
}

double eta_anode(double thrust_mn, double mdot_mg_s, double power_w) {
  if (!(mdot_mg_s > 0.0) || !(power_w > 0.0)) {
    throw DomainError("eta_anode: mass flow and power must be positive");
  }
  const double thrust_n = thrust_mn * 1e-3;
  return thrust_n * thrust_n / (2.0 * mdot_mg_s * 1e-6 * power_w);
}

double channel_volume(double d_mm, double h_mm, double l_mm) {
  return std::numbers::pi * d_mm * h_mm * l_mm;
}

DerivedFeatures derive_features(const ThrusterRecord& r) {
  DerivedFeatures d;
  d.log10_power = std::log10(r.power_w);
  d.volume_mm3 = channel_volume(r.d_mm, r.h_mm, r.l_mm);
  d.power_density = r.power_w / d.volume_mm3;
  d.eta_anode = eta_anode(r.thrust_mn, r.mdot_mg_s, r.power_w);
  return d;
}

// ---------------------------------------------------------------------------

ScalerParams::ScalerParams(std::vector<FeatureRange> ranges)
    : ranges_(std::move(ranges)) {
  for (const auto& r : ranges_) {
    if (r.max < r.min) {
      throw ValidationError("scaler range for '" + r.name + "' has max < min");
    }
  }
}

std::vector<std::size_t> ScalerParams::active_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ranges_.size(); ++i) {
    if (!ranges_[i].degenerate()) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> ScalerParams::degenerate_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ranges_.size(); ++i) {
    if (ranges_[i].degenerate()) out.push_back(i);
  }
  return out;
}

double ScalerParams::scale_value(std::size_t column, double value) const {
  const auto& r = ranges_.at(column);
  if (r.degenerate()) return 0.5;
  return (value - r.min) / (r.max - r.min);
}

double ScalerParams::unscale_value(std::size_t column, double scaled) const {
  const auto& r = ranges_.at(column);
  if (r.degenerate()) return r.min;
  return r.min + scaled * (r.max - r.min);
}

Eigen::MatrixXd ScalerParams::scale(const Eigen::MatrixXd& real) const {
  if (static_cast<std::size_t>(real.cols()) != ranges_.size()) {
    throw ShapeError("scale: matrix has " + std::to_string(real.cols()) +
                     " columns, scaler has " + std::to_string(ranges_.size()));
  }
  Eigen::MatrixXd out(real.rows(), real.cols());
  for (Eigen::Index c = 0; c < real.cols(); ++c) {
    for (Eigen::Index r = 0; r < real.rows(); ++r) {
      out(r, c) = scale_value(static_cast<std::size_t>(c), real(r, c));
    }
  }
  return out;
}

Eigen::MatrixXd ScalerParams::unscale(const Eigen::MatrixXd& scaled) const {
  if (static_cast<std::size_t>(scaled.cols()) != ranges_.size()) {
    throw ShapeError("unscale: matrix has " + std::to_string(scaled.cols()) +
                     " columns, scaler has " + std::to_string(ranges_.size()));
  }
  Eigen::MatrixXd out(scaled.rows(), scaled.cols());
  for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
    for (Eigen::Index r = 0; r < scaled.rows(); ++r) {
      out(r, c) = unscale_value(static_cast<std::size_t>(c), scaled(r, c));
    }
  }
  return out;
}

ScalerParams ScalerParams::select(const std::vector<std::size_t>& columns) const {
  std::vector<FeatureRange> out;
  out.reserve(columns.size());
  for (auto c : columns) out.push_back(ranges_.at(c));
  return ScalerParams(std::move(out));
}

ScalerParams fit_scaler(const Eigen::MatrixXd& real,
                        const std::vector<std::string>& names) {
  if (real.rows() == 0) throw PreconditionError("fit_scaler: empty dataset");
  if (names.size() != static_cast<std::size_t>(real.cols())) {
    throw ShapeError("fit_scaler: name count does not match columns");
  }
  std::vector<FeatureRange> ranges;
  ranges.reserve(names.size());
  for (Eigen::Index c = 0; c < real.cols(); ++c) {
    ranges.push_back({names[static_cast<std::size_t>(c)],
                      real.col(c).minCoeff(), real.col(c).maxCoeff()});
  }
  return ScalerParams(std::move(ranges));
}

ScalerParams fit_scaler(const Dataset& dataset) {
  return fit_scaler(dataset.feature_matrix(), dataset.feature_names());
}

Eigen::MatrixXd scale(const Dataset& dataset, const ScalerParams& scaler) {
  return scaler.scale(dataset.feature_matrix());
}

}  // namespace hetfit
