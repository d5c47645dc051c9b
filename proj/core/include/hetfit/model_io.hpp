#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hetfit/dataset.hpp"
#include "hetfit/nn.hpp"

namespace hetfit {

/// First line of every model file. Loading any other tag is a VersionError.
inline constexpr std::string_view kModelFormatTag = "hetfit-model/1";

/// A trained regression network together with the normalization it was
/// trained under, so predictions can be made in real units.
struct Surrogate {
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  ScalerParams input_scaler;
  ScalerParams output_scaler;
  nn::Mlp net;

  /// Inputs and outputs in min-max scaled space.
  Eigen::MatrixXd predict_scaled(const Eigen::MatrixXd& scaled_inputs) const;
  /// Inputs and outputs in real units.
  Eigen::MatrixXd predict_real(const Eigen::MatrixXd& real_inputs) const;
};

// Text format, one token group per line, numbers in shortest round-trip
// decimal form so a save/load cycle is bit exact:
//
//   hetfit-model/1
//   inputs <n> <name>...
//   range <name> <min> <max>          (n lines)
//   outputs <m> <name>...
//   range <name> <min> <max>          (m lines)
//   layers <k>
//   layer <fan_in> <fan_out> <activation>
//   weights <fan_out*fan_in values, row-major>
//   bias <fan_out values>
//   ...                               (k layer blocks)
//   end
std::string serialize_model(const Surrogate& model);
Surrogate parse_model(std::string_view content);

void save_model(const Surrogate& model, const std::string& path);
Surrogate load_model(const std::string& path);

}  // namespace hetfit
