#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetfit/dataset.hpp"
#include "hetfit/nn.hpp"

namespace hetfit::augment {

struct GanConfig {
  int noise_dim = 8;
  std::vector<nn::LayerSpec> generator_hidden = {
      {32, nn::Activation::kReLU}, {32, nn::Activation::kReLU}};
  std::vector<nn::LayerSpec> discriminator_hidden = {
      {32, nn::Activation::kReLU}, {16, nn::Activation::kReLU}};
  int epochs = 20000;
  double generator_lr = 1e-3;
  double discriminator_lr = 4e-3;
  /// Target for real samples in the discriminator loss (one-sided smoothing).
  double real_label = 0.9;
  /// Real rows per adversarial step; 0 uses every real row each step.
  int batch_size = 0;
  /// Generated rows per adversarial step.
  int fake_batch_size = 64;
  std::uint64_t seed = 42;
};

/// Generator maps noise to scaled rows through a linear output layer. The
/// discriminator's last layer emits a logit; the sigmoid is folded into the
/// cross-entropy so saturated outputs keep usable gradients.
struct GanModel {
  nn::Mlp generator;
  nn::Mlp discriminator;
  int noise_dim = 0;
  std::vector<double> discriminator_loss;
  std::vector<double> generator_loss;

  int data_dim() const { return generator.output_dim(); }
};

/// Alternating adversarial training on scaled rows. Needs at least 8 rows.
GanModel train_gan(const Eigen::MatrixXd& scaled, const GanConfig& config);

/// n scaled rows drawn from standard-normal noise.
Eigen::MatrixXd sample(const GanModel& gan, std::size_t n, std::uint64_t seed);

/// Probability that each row is real, per the discriminator.
Eigen::VectorXd discriminate(const GanModel& gan, const Eigen::MatrixXd& rows);

/// Fraction of a balanced real/fake mix the discriminator labels correctly
/// (threshold 0.5). Fake rows are drawn fresh from `seed`.
double discriminator_accuracy(const GanModel& gan, const Eigen::MatrixXd& real,
                              std::uint64_t seed);

struct BoundarySpec {
  std::vector<double> lower;
  std::vector<double> upper;

  /// Scaled-space limits. Upper: 2.0 for thrust, 1.4 for anode efficiency,
  /// 1.5 for anything else. Lower: the scaled image of a real value of zero,
  /// i.e. every quantity must stay physically positive.
  static BoundarySpec defaults(const ScalerParams& scaler);
  /// Same upper limits with a uniform lower limit.
  static BoundarySpec with_lower(const std::vector<std::string>& feature_names,
                                 double lower);
  std::size_t size() const { return lower.size(); }
};

struct Partition {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> outliers;
};

/// Row i is kept iff every feature lies in [lower, upper]. Both index lists
/// are ascending.
Partition boundary_filter(const Eigen::MatrixXd& rows, const BoundarySpec& bounds);

/// For every fake row, the smallest mean absolute relative deviation to any
/// real row; features whose real value is exactly zero are left out of that
/// pair's mean. Returns the per-row deviations in percent.
Eigen::VectorXd nearest_record_mape(const Eigen::MatrixXd& fake,
                                    const Eigen::MatrixXd& real);

/// Mean of nearest_record_mape, in percent.
double similarity_mape(const Eigen::MatrixXd& fake, const Eigen::MatrixXd& real);

struct SyntheticBatch {
  Eigen::MatrixXd scaled;   // rows in the GAN's scaled space
  Eigen::MatrixXd real;     // same rows unscaled
  Eigen::VectorXd mape_pct; // nearest-real-record deviation per row
  std::vector<bool> kept;

  std::size_t size() const { return kept.size(); }
  std::size_t kept_count() const;
  double mean_mape() const;
  double outlier_rate() const;
};

/// Samples n rows, scores each against the real reference rows (real units,
/// columns matching `scaler`) and flags boundary outliers.
SyntheticBatch generate(const GanModel& gan, std::size_t n, std::uint64_t seed,
                        const ScalerParams& scaler,
                        const Eigen::MatrixXd& real_reference,
                        const BoundarySpec& bounds);

/// Full-width synthetic rows for a dataset: scales on the dataset, trains on
/// the non-degenerate features, and fills degenerate features back in.
struct AugmentResult {
  ScalerParams scaler;                  // fitted on the real dataset
  std::vector<std::size_t> gan_columns; // non-degenerate feature columns
  GanModel gan;
  SyntheticBatch batch;                 // full feature width
  double discriminator_accuracy = 0.0;
};

AugmentResult augment_dataset(const Dataset& dataset, std::size_t n,
                              const GanConfig& config);

/// Synthetic rows in the ingestion CSV schema plus `mape_pct,kept`.
/// Record columns are read from the first eight feature columns.
std::string synthetic_csv(const SyntheticBatch& batch,
                          const std::string& name_prefix = "gan-");

}  // namespace hetfit::augment
