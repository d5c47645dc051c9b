#include "hetfit/select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hetfit/error.hpp"
#include "hetfit/random.hpp"
#include "hetfit/stats.hpp"

namespace hetfit::select {

namespace {

void shuffle_column(Eigen::MatrixXd& m, Eigen::Index col, Rng& rng) {
  std::vector<double> v(m.col(col).data(), m.col(col).data() + m.rows());
  rng.shuffle(v.begin(), v.end());
  for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, col) = v[static_cast<std::size_t>(r)];
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double mu = m.col(c).mean();
    const double sd = std::sqrt((m.col(c).array() - mu).square().mean());
    out.col(c).array() -= mu;
    if (sd > 0.0) out.col(c) /= sd;
  }
  return out;
}

}  // namespace

Eigen::VectorXd permutation_importance(const Predictor& model,
                                       const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y,
                                       std::uint64_t seed, int repeats) {
  if (x.rows() == 0 || x.rows() != y.size()) {
    throw ShapeError("permutation importance needs matching non-empty data");
  }
  if (repeats < 1) throw DomainError("repeats must be at least 1");
  const Eigen::MatrixXd target = y;
  const double base = stats::r2_score(model(x), target);
  Rng rng(seed);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.cols());
  Eigen::MatrixXd work = x;
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    double drop = 0.0;
    for (int r = 0; r < repeats; ++r) {
      shuffle_column(work, f, rng);
      drop += base - stats::r2_score(model(work), target);
    }
    work.col(f) = x.col(f);
    out(f) = drop / repeats;
  }
  return out;
}

ImportanceProvider mlp_importance(MlpImportanceConfig config) {
  return [config](const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  std::uint64_t seed) {
    const Eigen::MatrixXd xs = standardize(x);
    const Eigen::MatrixXd ys = standardize(Eigen::MatrixXd(y));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
    auto n_hold = static_cast<Eigen::Index>(
        std::floor(config.holdout_fraction * static_cast<double>(x.rows())));
    n_hold = std::clamp<Eigen::Index>(n_hold, 1, x.rows() - 1);
    const std::vector<Eigen::Index> hold(order.begin(), order.begin() + n_hold);
    const std::vector<Eigen::Index> fit(order.begin() + n_hold, order.end());
    auto specs = config.hidden;
    specs.push_back({1, nn::Activation::kIdentity});
    nn::TrainConfig tc;
    tc.epochs = config.epochs;
    tc.learning_rate = config.learning_rate;
    tc.optimizer = nn::OptimizerKind::kAdam;
    tc.seed = seed;
    const auto trained =
        nn::train(nn::Mlp::build(static_cast<int>(x.cols()), specs, seed),
                  xs(fit, Eigen::all), ys(fit, Eigen::all), tc);
    const Predictor predict = [&](const Eigen::MatrixXd& m) {
      return trained.model.forward_batch(m);
    };
    return permutation_importance(predict, xs(hold, Eigen::all),
                                  ys(hold, Eigen::all).col(0), rng.next(),
                                  config.repeats);
  };
}

BorutaResult boruta(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const std::vector<std::string>& names,
                    const BorutaConfig& config, const ImportanceProvider& provider) {
  if (config.max_iter < 1) throw DomainError("max_iter must be at least 1");
  if (x.cols() < 2) throw PreconditionError("boruta needs at least 2 candidate features");
  if (static_cast<Eigen::Index>(names.size()) != x.cols() || x.rows() != y.size()) {
    throw ShapeError("boruta: names, features and target disagree in size");
  }
  const Eigen::Index p = x.cols();
  BorutaResult res;
  res.features = names;
  res.hits.assign(static_cast<std::size_t>(p), 0);
  res.decisions.assign(static_cast<std::size_t>(p), Decision::kTentative);

  Rng rng(config.seed);
  Eigen::MatrixXd extended(x.rows(), 2 * p);
  extended.leftCols(p) = x;
  for (int it = 1; it <= config.max_iter; ++it) {
    extended.rightCols(p) = x;
    for (Eigen::Index f = 0; f < p; ++f) shuffle_column(extended, p + f, rng);
    const Eigen::VectorXd imp = provider(extended, y, rng.next());
    const double shadow_max = imp.tail(p).maxCoeff();
    for (Eigen::Index f = 0; f < p; ++f) {
      if (imp(f) > shadow_max) ++res.hits[static_cast<std::size_t>(f)];
    }
    res.iterations = it;

    bool undecided = false;
    for (std::size_t f = 0; f < res.hits.size(); ++f) {
      if (res.decisions[f] != Decision::kTentative) continue;
      const int k = res.hits[f];
      const double upper = 1.0 - stats::binomial_cdf(k - 1, it, 0.5);  // P(X >= k)
      const double lower = stats::binomial_cdf(k, it, 0.5);            // P(X <= k)
      if (upper < config.alpha / 2) {
        res.decisions[f] = Decision::kConfirmed;
      } else if (lower < config.alpha / 2) {
        res.decisions[f] = Decision::kRejected;
      } else {
        undecided = true;
      }
    }
    if (!undecided) break;
  }

  for (std::size_t f = 0; f < names.size(); ++f) {
    switch (res.decisions[f]) {
      case Decision::kConfirmed: res.confirmed.push_back(names[f]); break;
      case Decision::kRejected: res.rejected.push_back(names[f]); break;
      case Decision::kTentative: res.tentative.push_back(names[f]); break;
    }
  }
  return res;
}

std::string BorutaResult::report() const {
  const auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& n : v) s += (s.empty() ? "" : ", ") + n;
    return s.empty() ? std::string("(none)") : s;
  };
  std::string out = "iterations: " + std::to_string(iterations) + "\n";
  out += "confirmed: " + join(confirmed) + "\n";
  out += "tentative: " + join(tentative) + "\n";
  out += "rejected: " + join(rejected) + "\n";
  out += "hits:\n";
  for (std::size_t f = 0; f < features.size(); ++f) {
    out += "  " + features[f] + " " + std::to_string(hits[f]) + "/" +
           std::to_string(iterations) + "\n";
  }
  return out;
}

}  // namespace hetfit::select
