#include <doctest.h>

#include <cmath>
#include <limits>

#include "hetfit/error.hpp"
#include "hetfit/tpe.hpp"
#include "support.hpp"

using namespace hetfit;
using namespace hetfit::tpe;

namespace {

Space mixed_space() {
  auto child = Dimension::integer("child", 1, 9);
  child.condition = Condition{0, 3};
  return Space({Dimension::integer("n", 1, 5), child, Dimension::real("lr", 1e-4, 1e-1, true),
                Dimension::categorical("act", 3)});
}

double quadratic(const Assignment& a) {
  const double x = *a[0];
  return -(x - 3.7) * (x - 3.7);
}

}  // namespace

TEST_CASE("dimension validation") {
  CHECK_THROWS_AS(Dimension::real("x", 1, 1), DomainError);
  CHECK_THROWS_AS(Dimension::real("x", 0, 1, true), DomainError);
  CHECK_THROWS_AS(Dimension::integer("x", 5, 2), DomainError);
  CHECK_THROWS_AS(Dimension::integer("x", 0, 4, true), DomainError);
  CHECK_THROWS_AS(Dimension::categorical("x", 0), DomainError);
  auto d = Dimension::real("y", 0, 1);
  d.condition = Condition{1, 0};
  CHECK_THROWS_AS(Space({Dimension::real("x", 0, 1), d}), DomainError);
  CHECK_THROWS_AS(Sampler(mixed_space(), Settings{1.0}, 0), DomainError);
}

TEST_CASE("uniform samples respect bounds and conditions") {
  const auto space = mixed_space();
  Rng rng(5);
  int child_active = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto a = space.sample_uniform(rng);
    REQUIRE(space.contains(a));
    CHECK(*a[0] == std::round(*a[0]));
    CHECK(a[1].has_value() == (*a[0] >= 3));
    child_active += a[1].has_value();
    CHECK(*a[3] == std::round(*a[3]));
  }
  // n uniform on {1..5}: three of five values activate the child.
  CHECK(child_active == doctest::Approx(1200).epsilon(0.08));

  Assignment bad = space.sample_uniform(rng);
  bad[2] = 0.5;
  CHECK_FALSE(space.contains(bad));
  Assignment stray{1.0, 4.0, 1e-3, 0.0};
  CHECK_FALSE(space.contains(stray));
}

TEST_CASE("integer endpoints are as likely as interior values") {
  const Space s({Dimension::integer("k", 2, 6)});
  Rng rng(8);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 10000; ++i) ++counts[static_cast<int>(*s.sample_uniform(rng)[0])];
  for (int k = 2; k <= 6; ++k) CHECK(counts[k] == doctest::Approx(2000).epsilon(0.1));
}

TEST_CASE("parzen estimator concentrates near observations") {
  const auto dim = Dimension::real("x", 0, 10);
  const ParzenEstimator pe(dim, {2.9, 3.0, 3.0, 3.1, 3.1, 3.1, 3.2, 3.2, 3.3, 3.0}, 1.0);
  CHECK(pe.log_pdf(3.1) > pe.log_pdf(8.0));
  Rng rng(2);
  int near = 0;
  for (int i = 0; i < 500; ++i) {
    const double v = pe.sample(rng);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 10.0);
    near += std::abs(v - 3.1) < 1.5;
  }
  CHECK(near > 300);  // a uniform draw would land there 30% of the time

  // Density integrates to one over the bounds.
  double mass = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mass += std::exp(pe.log_pdf((i + 0.5) * 10.0 / n)) * 10.0 / n;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));

  const ParzenEstimator cat(Dimension::categorical("c", 3), {2, 2, 2, 0}, 1.0);
  CHECK(cat.log_pdf(2) > cat.log_pdf(0));
  CHECK(cat.log_pdf(0) > cat.log_pdf(1));
  const double total = std::exp(cat.log_pdf(0)) + std::exp(cat.log_pdf(1)) + std::exp(cat.log_pdf(2));
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("tpe finds a planted optimum") {
  const Space s({Dimension::real("x", 0, 10)});
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = optimize(s, quadratic, 60, seed);
    hits += std::abs(*r.best_observation().params[0] - 3.7) <= 0.37;
  }
  CHECK(hits >= 9);
}

TEST_CASE("startup phase is plain random search") {
  const auto space = mixed_space();
  Settings st;
  st.n_startup = 100;
  const auto r = optimize(space, [](const Assignment& a) { return *a[2]; }, 20, 77, st);
  Rng rng(77);
  for (const auto& o : r.history) CHECK(o.params == space.sample_uniform(rng));
}

TEST_CASE("runs are reproducible") {
  const Space s({Dimension::real("x", -5, 10), Dimension::real("y", 0, 15)});
  const Objective f = [](const Assignment& a) { return -testing::branin(*a[0], *a[1]); };
  const auto a = optimize(s, f, 30, 3);
  const auto b = optimize(s, f, 30, 3);
  REQUIRE(a.history.size() == 30);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].params == b.history[i].params);
  }
}

TEST_CASE("failures are recorded and ranked last") {
  const Space s({Dimension::real("x", 0, 10)});
  const Objective f = [](const Assignment& a) -> double {
    if (*a[0] > 5) throw ShapeError("bad trial");
    if (*a[0] > 4) return std::numeric_limits<double>::quiet_NaN();
    return *a[0];
  };
  const auto r = optimize(s, f, 40, 11);
  for (const auto& o : r.history) {
    if (*o.params[0] > 4) {
      CHECK_FALSE(o.ok);
      CHECK(o.score == -std::numeric_limits<double>::infinity());
    } else {
      CHECK(o.ok);
    }
  }
  CHECK(*r.best_observation().params[0] <= 4);
  const auto best = best_so_far(r.history);
  for (std::size_t i = 1; i < best.size(); ++i) CHECK(best[i] >= best[i - 1]);
  CHECK(best.back() == r.best_observation().score);
}

TEST_CASE("all failing trials raise") {
  const Space s({Dimension::real("x", 0, 1)});
  const Objective f = [](const Assignment&) -> double { throw ShapeError("nope"); };
  CHECK_THROWS_AS(optimize(s, f, 5, 0), NoViableArchitectureError);
  CHECK_THROWS_AS(optimize(s, quadratic, 0, 0), DomainError);
  CHECK(optimize(s, [](const Assignment&) { return 1.0; }, 1, 0).history.size() == 1);
}
