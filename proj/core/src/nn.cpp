#include "hetfit/nn.hpp"

#include <cmath>
#include <numeric>

#include "hetfit/error.hpp"
#include "hetfit/random.hpp"

namespace hetfit::nn {

namespace {

constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

Eigen::MatrixXd apply(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kIdentity: return z;
    case Activation::kReLU: return z.cwiseMax(0.0);
    case Activation::kTanh: return z.array().tanh().matrix();
    default: return z.unaryExpr([a](double v) { return activate(a, v); });
  }
}

Eigen::MatrixXd apply_derivative(Activation a, const Eigen::MatrixXd& z) {
  return z.unaryExpr([a](double v) { return activate_derivative(a, v); });
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kReLU: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSELU: return "selu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

std::optional<Activation> parse_activation(std::string_view name) {
  for (auto a : {Activation::kIdentity, Activation::kReLU, Activation::kTanh,
                 Activation::kSELU, Activation::kSigmoid}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity: return z;
    case Activation::kReLU: return z > 0.0 ? z : 0.0;
    case Activation::kTanh: return std::tanh(z);
    case Activation::kSELU:
      return z > 0.0 ? kSeluLambda * z : kSeluLambda * kSeluAlpha * std::expm1(z);
    case Activation::kSigmoid:
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      {
        const double e = std::exp(z);
        return e / (1.0 + e);
      }
  }
  return z;
}

double activate_derivative(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kReLU: return z > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kSELU:
      return z > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(z);
    case Activation::kSigmoid: {
      const double s = activate(Activation::kSigmoid, z);
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

Mlp::Mlp(std::vector<DenseLayer> layers, std::uint64_t seed)
    : layers_(std::move(layers)), seed_(seed) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.fan_out()) {
      throw ShapeError("layer " + std::to_string(i) +
                       ": bias length does not match weight rows");
    }
    if (i > 0 && l.fan_in() != layers_[i - 1].fan_out()) {
      throw ShapeError("layer " + std::to_string(i) + " expects " +
                       std::to_string(l.fan_in()) + " inputs but layer " +
                       std::to_string(i - 1) + " produces " +
                       std::to_string(layers_[i - 1].fan_out()));
    }
  }
}

Mlp Mlp::build(int input_dim, std::span<const LayerSpec> specs,
               std::uint64_t seed) {
  if (input_dim < 1) throw ShapeError("network needs at least one input");
  if (specs.empty()) throw ShapeError("network needs at least one layer");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  layers.reserve(specs.size());
  int fan_in = input_dim;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const bool hidden = i + 1 < specs.size();
    const int width = specs[i].width;
    if (width < 1 ||
        (hidden && (width < kMinHiddenWidth || width > kMaxHiddenWidth))) {
      throw DomainError("layer width " + std::to_string(width) +
                        " outside allowed range");
    }
    DenseLayer layer;
    layer.activation = specs[i].activation;
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + width));
    layer.weights.resize(width, fan_in);
    for (Eigen::Index r = 0; r < width; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) {
        layer.weights(r, c) = rng.uniform(-a, a);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(width);
    layers.push_back(std::move(layer));
    fan_in = width;
  }
  return Mlp(std::move(layers), seed);
}

int Mlp::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().fan_in());
}

int Mlp::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().fan_out());
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  }
  return n;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(x.size()) +
                     " features, network expects " +
                     std::to_string(input_dim()));
  }
  Eigen::VectorXd a = x;
  for (const auto& l : layers_) {
    Eigen::VectorXd z = l.weights * a + l.bias;
    a = apply(l.activation, z);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(x.cols()) +
                     " features, network expects " +
                     std::to_string(input_dim()));
  }
  Eigen::MatrixXd a = x;
  for (const auto& l : layers_) {
    Eigen::MatrixXd z = a * l.weights.transpose();
    z.rowwise() += l.bias.transpose();
    a = apply(l.activation, z);
  }
  return a;
}

ForwardTrace forward_trace(const Mlp& mlp, const Eigen::MatrixXd& x) {
  if (x.cols() != mlp.input_dim()) {
    throw ShapeError("forward: input width does not match network");
  }
  ForwardTrace t;
  t.inputs.reserve(mlp.depth());
  t.preactivations.reserve(mlp.depth());
  Eigen::MatrixXd a = x;
  for (const auto& l : mlp.layers()) {
    Eigen::MatrixXd z = a * l.weights.transpose();
    z.rowwise() += l.bias.transpose();
    t.inputs.push_back(std::move(a));
    a = apply(l.activation, z);
    t.preactivations.push_back(std::move(z));
  }
  t.output = std::move(a);
  return t;
}

Gradients Gradients::zeros_like(const Mlp& mlp) {
  Gradients g;
  for (const auto& l : mlp.layers()) {
    g.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

Gradients backprop(const Mlp& mlp, const ForwardTrace& trace,
                   const Eigen::MatrixXd& output_grad,
                   Eigen::MatrixXd* input_grad) {
  if (output_grad.rows() != trace.output.rows() ||
      output_grad.cols() != trace.output.cols()) {
    throw ShapeError("backprop: output gradient shape mismatch");
  }
  const auto& layers = mlp.layers();
  Gradients g;
  g.weights.resize(layers.size());
  g.biases.resize(layers.size());
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& l = layers[k];
    if (l.activation != Activation::kIdentity) {
      delta = delta.cwiseProduct(
          apply_derivative(l.activation, trace.preactivations[k]));
    }
    g.weights[k] = delta.transpose() * trace.inputs[k];
    g.biases[k] = delta.colwise().sum().transpose();
    if (k > 0 || input_grad) delta = delta * l.weights;
  }
  if (input_grad) *input_grad = std::move(delta);
  return g;
}

double mse_loss(const Eigen::MatrixXd& predictions,
                const Eigen::MatrixXd& targets) {
  if (predictions.rows() != targets.rows() ||
      predictions.cols() != targets.cols()) {
    throw ShapeError("mse_loss: prediction/target shape mismatch");
  }
  if (targets.rows() == 0) throw ShapeError("mse_loss: no samples");
  return (predictions - targets).squaredNorm() /
         (2.0 * static_cast<double>(targets.rows()));
}

Gradients backward(const Mlp& mlp, const Eigen::MatrixXd& x,
                   const Eigen::MatrixXd& targets) {
  const auto trace = forward_trace(mlp, x);
  if (trace.output.rows() != targets.rows() ||
      trace.output.cols() != targets.cols()) {
    throw ShapeError("backward: target shape mismatch");
  }
  const Eigen::MatrixXd grad_out =
      (trace.output - targets) / static_cast<double>(targets.rows());
  return backprop(mlp, trace, grad_out);
}

std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSGD: return "sgd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kAdam: return "adam";
  }
  return "?";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  for (auto k : {OptimizerKind::kSGD, OptimizerKind::kMomentum,
                 OptimizerKind::kAdam}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, const Mlp& shape,
                     AdamParams adam)
    : kind_(kind), lr_(learning_rate), adam_(adam) {
  if (!(learning_rate >= 0.0)) {
    throw DomainError("learning rate must be non-negative");
  }
  if (kind_ != OptimizerKind::kSGD) first_ = Gradients::zeros_like(shape);
  if (kind_ == OptimizerKind::kAdam) second_ = Gradients::zeros_like(shape);
}

void Optimizer::step(Mlp& mlp, const Gradients& grads) {
  auto& layers = mlp.layers();
  ++step_count_;
  switch (kind_) {
    case OptimizerKind::kSGD:
      for (std::size_t k = 0; k < layers.size(); ++k) {
        layers[k].weights -= lr_ * grads.weights[k];
        layers[k].bias -= lr_ * grads.biases[k];
      }
      break;
    case OptimizerKind::kMomentum:
      for (std::size_t k = 0; k < layers.size(); ++k) {
        first_.weights[k] = kMomentum * first_.weights[k] + grads.weights[k];
        first_.biases[k] = kMomentum * first_.biases[k] + grads.biases[k];
        layers[k].weights -= lr_ * first_.weights[k];
        layers[k].bias -= lr_ * first_.biases[k];
      }
      break;
    case OptimizerKind::kAdam: {
      const double b1 = adam_.beta1;
      const double b2 = adam_.beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
      const auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        param.array() -= lr_ * (m.array() / c1) /
                         ((v.array() / c2).sqrt() + adam_.epsilon);
      };
      for (std::size_t k = 0; k < layers.size(); ++k) {
        update(layers[k].weights, first_.weights[k], second_.weights[k],
               grads.weights[k]);
        update(layers[k].bias, first_.biases[k], second_.biases[k],
               grads.biases[k]);
      }
      break;
    }
  }
}

TrainResult train(Mlp mlp, const Eigen::MatrixXd& x,
                  const Eigen::MatrixXd& targets, const TrainConfig& config) {
  if (config.epochs < 1) throw DomainError("epochs must be at least 1");
  if (!(config.learning_rate > 0.0)) {
    throw DomainError("learning rate must be positive");
  }
  if (x.rows() != targets.rows() || x.rows() == 0) {
    throw ShapeError("train: input/target row counts differ or are zero");
  }
  if (targets.cols() != mlp.output_dim()) {
    throw ShapeError("train: target width does not match network output");
  }

  Optimizer opt(config.optimizer, config.learning_rate, mlp);
  Rng rng(config.seed);
  const auto n = x.rows();
  const bool minibatch = config.batch_size > 0 && config.batch_size < n;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (!minibatch) {
      const auto trace = forward_trace(mlp, x);
      const double loss = mse_loss(trace.output, targets);
      if (!std::isfinite(loss)) throw TrainingDivergedError("training", epoch);
      result.loss_history.push_back(loss);
      const Eigen::MatrixXd grad_out =
          (trace.output - targets) / static_cast<double>(n);
      opt.step(mlp, backprop(mlp, trace, grad_out));
      continue;
    }
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(config.batch_size, n - start);
      std::vector<Eigen::Index> idx(order.begin() + start,
                                    order.begin() + start + len);
      const Eigen::MatrixXd xb = x(idx, Eigen::all);
      const Eigen::MatrixXd yb = targets(idx, Eigen::all);
      const auto trace = forward_trace(mlp, xb);
      epoch_loss += mse_loss(trace.output, yb) * static_cast<double>(len);
      const Eigen::MatrixXd grad_out =
          (trace.output - yb) / static_cast<double>(len);
      opt.step(mlp, backprop(mlp, trace, grad_out));
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDivergedError("training", epoch);
    }
    result.loss_history.push_back(epoch_loss);
  }
  result.final_loss = mse_loss(mlp.forward_batch(x), targets);
  if (!std::isfinite(result.final_loss)) {
    throw TrainingDivergedError("training", config.epochs);
  }
  result.model = std::move(mlp);
  return result;
}

}  // namespace hetfit::nn
