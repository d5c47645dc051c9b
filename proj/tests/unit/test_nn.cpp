#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hetfit/error.hpp"
#include "hetfit/nn.hpp"
#include "hetfit/random.hpp"

using namespace hetfit;
using namespace hetfit::nn;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1, 1);
  return m;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

constexpr Activation kAll[] = {Activation::kIdentity, Activation::kReLU, Activation::kTanh,
                               Activation::kSELU, Activation::kSigmoid};

}  // namespace

TEST_CASE("activation names round trip") {
  for (auto a : kAll) CHECK(parse_activation(to_string(a)) == a);
  CHECK_FALSE(parse_activation("swish").has_value());
  CHECK(parse_optimizer("momentum") == OptimizerKind::kMomentum);
  CHECK_FALSE(parse_optimizer("rmsprop").has_value());
}

TEST_CASE("activation values") {
  CHECK(activate(Activation::kReLU, -2) == 0.0);
  CHECK(activate(Activation::kReLU, 2) == 2.0);
  CHECK(activate(Activation::kSigmoid, 0) == 0.5);
  CHECK(activate(Activation::kSELU, 1) == doctest::Approx(1.0507009873554805));
  CHECK(activate(Activation::kSELU, -1e9) == doctest::Approx(-1.0507009873554805 * 1.6732632423543772));
  CHECK(activate(Activation::kSigmoid, -800) == 0.0);
  CHECK(activate(Activation::kSigmoid, 800) == 1.0);
}

TEST_CASE("activation derivatives match finite differences") {
  const double h = 1e-6;
  for (auto a : kAll) {
    for (double z : {-2.3, -0.4, 0.3, 1.7}) {
      const double fd = (activate(a, z + h) - activate(a, z - h)) / (2 * h);
      CHECK(rel_err(activate_derivative(a, z), fd) < 1e-7);
    }
  }
}

TEST_CASE("build enforces hidden width bounds") {
  const std::vector<LayerSpec> narrow = {{3, Activation::kReLU}, {1, Activation::kIdentity}};
  const std::vector<LayerSpec> wide = {{129, Activation::kReLU}, {1, Activation::kIdentity}};
  const std::vector<LayerSpec> ok = {{4, Activation::kReLU}, {128, Activation::kTanh},
                                     {1, Activation::kIdentity}};
  CHECK_THROWS_AS(Mlp::build(3, narrow, 0), DomainError);
  CHECK_THROWS_AS(Mlp::build(3, wide, 0), DomainError);
  CHECK_NOTHROW(Mlp::build(3, ok, 0));
  CHECK_THROWS_AS(Mlp::build(0, ok, 0), ShapeError);
}

TEST_CASE("constructor rejects layers that do not chain") {
  DenseLayer a{Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(4), Activation::kReLU};
  DenseLayer b{Eigen::MatrixXd::Zero(1, 5), Eigen::VectorXd::Zero(1), Activation::kIdentity};
  CHECK_THROWS_AS(Mlp({a, b}), ShapeError);
}

TEST_CASE("initialization is bounded, seeded and zero-biased") {
  const std::vector<LayerSpec> specs = {{16, Activation::kTanh}, {8, Activation::kTanh},
                                        {2, Activation::kIdentity}};
  const auto m1 = Mlp::build(5, specs, 9);
  const auto m2 = Mlp::build(5, specs, 9);
  const auto m3 = Mlp::build(5, specs, 10);
  CHECK(m1.parameter_count() == 5 * 16 + 16 + 16 * 8 + 8 + 8 * 2 + 2);
  CHECK(m1.hidden_layer_count() == 2);
  CHECK(m1.input_dim() == 5);
  CHECK(m1.output_dim() == 2);
  bool differs = false;
  for (std::size_t l = 0; l < m1.depth(); ++l) {
    const auto& L = m1.layers()[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(L.fan_in() + L.fan_out()));
    CHECK(L.weights.cwiseAbs().maxCoeff() <= bound);
    CHECK(L.bias.isZero());
    CHECK(L.weights == m2.layers()[l].weights);
    differs = differs || L.weights != m3.layers()[l].weights;
  }
  CHECK(differs);
}

TEST_CASE("batch and single forward agree") {
  const std::vector<LayerSpec> specs = {{8, Activation::kSELU}, {3, Activation::kIdentity}};
  const auto m = Mlp::build(4, specs, 1);
  const auto x = random_matrix(6, 4, 2);
  const auto y = m.forward_batch(x);
  REQUIRE(y.rows() == 6);
  REQUIRE(y.cols() == 3);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Eigen::VectorXd single = m.forward(x.row(r).transpose());
    CHECK((single - y.row(r).transpose()).norm() < 1e-12);
  }
}

TEST_CASE("mse loss convention") {
  Eigen::MatrixXd p(2, 1), t(2, 1);
  p << 1, 3;
  t << 0, 0;
  CHECK(mse_loss(p, t) == doctest::Approx((1.0 + 9.0) / 4.0));
}

TEST_CASE("parameter and input gradients match finite differences") {
  for (auto act : kAll) {
    CAPTURE(to_string(act));
    const std::vector<LayerSpec> specs = {{7, act}, {5, act}, {2, Activation::kIdentity}};
    auto m = Mlp::build(3, specs, 17);
    // Non-zero biases so ReLU kinks are not all at the origin.
    Rng rng(4);
    for (auto& L : m.layers()) {
      for (Eigen::Index k = 0; k < L.bias.size(); ++k) L.bias(k) = rng.uniform(-0.3, 0.3);
    }
    const auto x = random_matrix(5, 3, 21);
    const auto y = random_matrix(5, 2, 22);
    const auto g = backward(m, x, y);

    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t l = 0; l < m.depth(); ++l) {
      auto& W = m.layers()[l].weights;
      for (Eigen::Index i = 0; i < W.size(); ++i) {
        const double keep = W.data()[i];
        W.data()[i] = keep + h;
        const double up = mse_loss(m.forward_batch(x), y);
        W.data()[i] = keep - h;
        const double dn = mse_loss(m.forward_batch(x), y);
        W.data()[i] = keep;
        worst = std::max(worst, rel_err(g.weights[l].data()[i], (up - dn) / (2 * h)));
      }
    }
    CHECK(worst < 1e-5);

    const auto trace = forward_trace(m, x);
    Eigen::MatrixXd gin;
    backprop(m, trace, (trace.output - y) / static_cast<double>(x.rows()), &gin);
    REQUIRE(gin.rows() == x.rows());
    REQUIRE(gin.cols() == x.cols());
    Eigen::MatrixXd xp = x;
    for (Eigen::Index i = 0; i < xp.size(); ++i) {
      const double keep = xp.data()[i];
      xp.data()[i] = keep + h;
      const double up = mse_loss(m.forward_batch(xp), y);
      xp.data()[i] = keep - h;
      const double dn = mse_loss(m.forward_batch(xp), y);
      xp.data()[i] = keep;
      CHECK(rel_err(gin.data()[i], (up - dn) / (2 * h)) < 1e-5);
    }
  }
}

TEST_CASE("sgd step is w - lr * g") {
  const std::vector<LayerSpec> specs = {{4, Activation::kTanh}, {1, Activation::kIdentity}};
  auto m = Mlp::build(2, specs, 3);
  const auto before = m;
  const auto g = backward(m, random_matrix(4, 2, 5), random_matrix(4, 1, 6));
  Optimizer opt(OptimizerKind::kSGD, 0.1, m);
  opt.step(m, g);
  for (std::size_t l = 0; l < m.depth(); ++l) {
    CHECK((m.layers()[l].weights - (before.layers()[l].weights - 0.1 * g.weights[l])).norm() <
          1e-15);
  }
}

TEST_CASE("every optimizer fits a linear map") {
  const auto x = random_matrix(64, 2, 30);
  const Eigen::MatrixXd y = 2.0 * x.col(0) - x.col(1);
  const std::vector<LayerSpec> specs = {{16, Activation::kTanh}, {1, Activation::kIdentity}};
  for (auto kind : {OptimizerKind::kSGD, OptimizerKind::kMomentum, OptimizerKind::kAdam}) {
    CAPTURE(to_string(kind));
    TrainConfig cfg;
    cfg.epochs = 600;
    cfg.optimizer = kind;
    cfg.learning_rate = kind == OptimizerKind::kAdam ? 1e-2 : 5e-2;
    const auto r = train(Mlp::build(2, specs, 1), x, y, cfg);
    CHECK(r.final_loss < 0.05 * r.loss_history.front());
    CHECK(r.loss_history.size() == 600);
  }
}

TEST_CASE("minibatch training is seeded") {
  const auto x = random_matrix(50, 3, 40);
  const Eigen::MatrixXd y = x.rowwise().sum();
  const std::vector<LayerSpec> specs = {{8, Activation::kReLU}, {1, Activation::kIdentity}};
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.seed = 77;
  const auto a = train(Mlp::build(3, specs, 2), x, y, cfg);
  const auto b = train(Mlp::build(3, specs, 2), x, y, cfg);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.final_loss < a.loss_history.front());
}

TEST_CASE("training rejects bad configs and reports divergence") {
  const auto x = random_matrix(10, 2, 50);
  const Eigen::MatrixXd y = 1e3 * x.col(0);
  const std::vector<LayerSpec> specs = {{8, Activation::kReLU}, {1, Activation::kIdentity}};
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(Mlp::build(2, specs, 0), x, y, cfg), DomainError);
  cfg.epochs = 10;
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(train(Mlp::build(2, specs, 0), x, y, cfg), DomainError);
  cfg.learning_rate = 1e3;
  cfg.optimizer = OptimizerKind::kSGD;
  cfg.epochs = 200;
  try {
    (void)train(Mlp::build(2, specs, 0), x, y, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDivergedError& e) {
    CHECK(e.epoch() > 0);
    CHECK(e.epoch() <= 200);
  }
  CHECK_THROWS_AS(train(Mlp::build(2, specs, 0), x, Eigen::MatrixXd::Zero(9, 1), TrainConfig{}),
                  ShapeError);
}
