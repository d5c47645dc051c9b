#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hetfit::nn {

enum class Activation { kIdentity, kReLU, kTanh, kSELU, kSigmoid };

std::string_view to_string(Activation a);
std::optional<Activation> parse_activation(std::string_view name);

/// Element-wise activation and its derivative expressed through the
/// pre-activation z.
double activate(Activation a, double z);
double activate_derivative(Activation a, double z);

inline constexpr int kMinHiddenWidth = 4;
inline constexpr int kMaxHiddenWidth = 128;

struct LayerSpec {
  int width = 0;
  Activation activation = Activation::kIdentity;
};

/// One fully-connected layer: out = act(W * in + b), W is (out x in).
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
  Activation activation = Activation::kIdentity;

  Eigen::Index fan_in() const { return weights.cols(); }
  Eigen::Index fan_out() const { return weights.rows(); }
};

class Mlp {
 public:
  Mlp() = default;

  /// Takes ownership of pre-built layers; throws ShapeError when
  /// consecutive dimensions do not chain.
  explicit Mlp(std::vector<DenseLayer> layers, std::uint64_t seed = 0);

  /// Balanced-variance uniform init: U(-a, a), a = sqrt(6 / (fan_in +
  /// fan_out)); biases start at zero. The last spec is the output layer and
  /// is exempt from the hidden width bounds.
  static Mlp build(int input_dim, std::span<const LayerSpec> layers,
                   std::uint64_t seed);

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  /// Row-per-sample batch evaluation.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;

  int input_dim() const;
  int output_dim() const;
  std::size_t depth() const noexcept { return layers_.size(); }
  std::size_t hidden_layer_count() const noexcept {
    return layers_.empty() ? 0 : layers_.size() - 1;
  }
  std::size_t parameter_count() const;
  std::uint64_t seed() const noexcept { return seed_; }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t seed_ = 0;
};

/// Per-layer inputs and pre-activations recorded by a batch forward pass.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> inputs;          // rows = samples
  std::vector<Eigen::MatrixXd> preactivations;  // rows = samples
  Eigen::MatrixXd output;
};

ForwardTrace forward_trace(const Mlp& mlp, const Eigen::MatrixXd& x);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static Gradients zeros_like(const Mlp& mlp);
  double squared_norm() const;
};

/// Chain rule from dLoss/dOutput back through every layer. When
/// `input_grad` is non-null it receives dLoss/dInput (rows = samples).
Gradients backprop(const Mlp& mlp, const ForwardTrace& trace,
                   const Eigen::MatrixXd& output_grad,
                   Eigen::MatrixXd* input_grad = nullptr);

/// L = (1 / 2n) * sum over samples of ||prediction - target||^2.
double mse_loss(const Eigen::MatrixXd& predictions,
                const Eigen::MatrixXd& targets);

/// Gradient of mse_loss with respect to every weight and bias.
Gradients backward(const Mlp& mlp, const Eigen::MatrixXd& x,
                   const Eigen::MatrixXd& targets);

enum class OptimizerKind { kSGD, kMomentum, kAdam };

std::string_view to_string(OptimizerKind k);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline constexpr double kMomentum = 0.9;

/// Stateful parameter update rule bound to one network shape.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, const Mlp& shape,
            AdamParams adam = {});

  void step(Mlp& mlp, const Gradients& grads);

  OptimizerKind kind() const noexcept { return kind_; }
  double learning_rate() const noexcept { return lr_; }

 private:
  OptimizerKind kind_;
  double lr_;
  AdamParams adam_;
  long step_count_ = 0;
  Gradients first_;   // velocity or first moment
  Gradients second_;  // Adam second moment
};

struct TrainConfig {
  int epochs = 500;
  double learning_rate = 1e-2;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
};

struct TrainResult {
  Mlp model;
  std::vector<double> loss_history;  // training loss before each update
  double final_loss = 0.0;           // after the last update
};

/// Gradient-descent training on the MSE loss. Throws DomainError for an
/// invalid config and TrainingDivergedError when the loss stops being finite.
TrainResult train(Mlp mlp, const Eigen::MatrixXd& x,
                  const Eigen::MatrixXd& targets, const TrainConfig& config);

}  // namespace hetfit::nn
