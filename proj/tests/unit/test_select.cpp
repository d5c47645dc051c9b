#include <doctest.h>

#include <algorithm>

#include "hetfit/error.hpp"
#include "hetfit/random.hpp"
#include "hetfit/select.hpp"

using namespace hetfit;
using namespace hetfit::select;

namespace {

Eigen::MatrixXd uniform(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return m;
}

const std::vector<std::string> kNames = {"a", "b", "c", "d"};

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("permutation importance of a known model") {
  const auto x = uniform(200, 3, 1);
  const Eigen::VectorXd y = 2.0 * x.col(0) + 0.3 * x.col(1);
  const Predictor model = [](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
    return 2.0 * m.col(0) + 0.3 * m.col(1);
  };
  const auto imp = permutation_importance(model, x, y, 5);
  REQUIRE(imp.size() == 3);
  CHECK(imp(2) == 0.0);
  CHECK(imp(0) > imp(1));
  CHECK(imp(1) > 0.01);
  CHECK(imp == permutation_importance(model, x, y, 5));
  CHECK_THROWS_AS(permutation_importance(model, x, y, 5, 0), DomainError);
  CHECK_THROWS_AS(permutation_importance(model, x, y.head(10), 5), ShapeError);
}

TEST_CASE("mlp importance ranks the driving feature first") {
  const auto x = uniform(200, 3, 2);
  const Eigen::VectorXd y = x.col(1);
  const auto imp = mlp_importance()(x, y, 3);
  Eigen::Index top = 0;
  imp.maxCoeff(&top);
  CHECK(top == 1);
  CHECK(std::abs(imp(0)) < 0.05);
  CHECK(std::abs(imp(2)) < 0.05);
  CHECK(imp == mlp_importance()(x, y, 3));
}

TEST_CASE("boruta with a scripted provider") {
  // Column 0 always beats the shadows; the rest never do.
  const ImportanceProvider scripted = [](const Eigen::MatrixXd& x, const Eigen::VectorXd&,
                                         std::uint64_t) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(x.cols());
    v(0) = 1.0;
    return v;
  };
  const auto x = uniform(30, 4, 3);
  const auto r = boruta(x, x.col(0), kNames, {50, 0.05, 1}, scripted);
  CHECK(r.confirmed == std::vector<std::string>{"a"});
  CHECK(r.rejected == std::vector<std::string>{"b", "c", "d"});
  CHECK(r.tentative.empty());
  CHECK(r.iterations < 50);  // stops once everything is decided
  CHECK(r.hits[0] == r.iterations);
  CHECK(r.hits[1] == 0);
  CHECK(r.report().find("confirmed: a") != std::string::npos);
}

TEST_CASE("boruta argument checks") {
  const auto x = uniform(30, 4, 3);
  const Eigen::VectorXd y = x.col(0);
  CHECK_THROWS_AS(boruta(x, y, kNames, {0, 0.05, 1}), DomainError);
  CHECK_THROWS_AS(boruta(x.leftCols(1), y, {"a"}, {5, 0.05, 1}), PreconditionError);
  CHECK_THROWS_AS(boruta(x, y, {"a", "b"}, {5, 0.05, 1}), ShapeError);
  CHECK_THROWS_AS(boruta(x, y.head(5), kNames, {5, 0.05, 1}), ShapeError);
}

TEST_CASE("boruta sets partition the features and decisions are sticky") {
  const auto x = uniform(150, 4, 11);
  const Eigen::VectorXd y = x.col(0) + 0.5 * x.col(1);
  const auto short_run = boruta(x, y, kNames, {8, 0.05, 4});
  const auto long_run = boruta(x, y, kNames, {16, 0.05, 4});
  for (const auto* r : {&short_run, &long_run}) {
    std::vector<std::string> all = r->confirmed;
    all.insert(all.end(), r->tentative.begin(), r->tentative.end());
    all.insert(all.end(), r->rejected.begin(), r->rejected.end());
    CHECK(sorted(all) == kNames);
  }
  for (const auto& f : short_run.confirmed) {
    CHECK(std::count(long_run.confirmed.begin(), long_run.confirmed.end(), f) == 1);
  }
  for (const auto& f : short_run.rejected) {
    CHECK(std::count(long_run.rejected.begin(), long_run.rejected.end(), f) == 1);
  }
  CHECK(std::count(long_run.confirmed.begin(), long_run.confirmed.end(), "a") == 1);
}

TEST_CASE("pure noise confirms nothing") {
  const auto x = uniform(150, 4, 21);
  Rng rng(99);
  Eigen::VectorXd y(150);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.uniform();
  const auto r = boruta(x, y, kNames, {20, 0.05, 2});
  CHECK(r.confirmed.empty());
}
