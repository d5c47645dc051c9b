#include <doctest.h>

#include <cmath>

#include "hetfit/error.hpp"
#include "hetfit/random.hpp"
#include "hetfit/scaling.hpp"
#include "support.hpp"

using namespace hetfit;

TEST_CASE("fixture coefficients match the offline oracle") {
  const auto c = fit_scaling(testing::fixture());
  CHECK(c.n_records == 16);
  CHECK(c.c_h() == doctest::Approx(0.2182227804693263).epsilon(1e-12));
  CHECK(c.c_m() == doctest::Approx(0.0027627487702061317).epsilon(1e-12));
  CHECK(c.c_p() == doctest::Approx(0.0005345365629317989).epsilon(1e-12));
  CHECK(c.c_t() == doctest::Approx(0.8626697366870164).epsilon(1e-12));
  CHECK(c.fit(Relation::kWidth).sigma() == doctest::Approx(2.582327970895119).epsilon(1e-12));
  CHECK(c.fit(Relation::kMassFlow).sigma() == doctest::Approx(0.8399463436897686).epsilon(1e-12));
  CHECK(c.fit(Relation::kPower).sigma() == doctest::Approx(143.94220207900312).epsilon(1e-12));
  CHECK(c.fit(Relation::kThrust).sigma() == doctest::Approx(2.402864878197185).epsilon(1e-12));
  CHECK(c.fit(Relation::kThrust).r_squared == doctest::Approx(0.9866508732175947).epsilon(1e-12));
  CHECK(c.fit(Relation::kWidth).r_squared == doctest::Approx(0.7167696352675825).epsilon(1e-12));
}

TEST_CASE("relation names") {
  CHECK(relation_name(Relation::kWidth) == "c_h");
  CHECK(relation_name(Relation::kThrust) == "c_t");
}

TEST_CASE("through-origin fit recovers an exact slope") {
  Eigen::VectorXd x(4), y(4);
  x << 1, 2, 3, 4;
  y = 2.5 * x;
  const auto f = fit_through_origin(x, y);
  CHECK(f.coefficient == doctest::Approx(2.5));
  CHECK(f.residual_variance == doctest::Approx(0.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
}

TEST_CASE("too few records") {
  auto recs = testing::fixture().records();
  recs.resize(2);
  CHECK_THROWS_AS(fit_scaling(Dataset(recs)), InsufficientDataError);
  recs = testing::fixture().records();
  recs.resize(3);
  CHECK_NOTHROW(fit_scaling(Dataset(recs)));
}

TEST_CASE("coefficients are invariant to record order") {
  auto recs = testing::fixture().records();
  const auto a = fit_scaling(Dataset(recs));
  Rng rng(5);
  rng.shuffle(recs.begin(), recs.end());
  const auto b = fit_scaling(Dataset(recs));
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    CHECK(a.fits[r].coefficient == doctest::Approx(b.fits[r].coefficient).epsilon(1e-13));
  }
}

TEST_CASE("scaling a response scales its coefficient") {
  auto recs = testing::fixture().records();
  const auto base = fit_scaling(Dataset(recs));
  for (auto& r : recs) r.thrust_mn *= 1.5;
  const auto scaled = fit_scaling(Dataset(recs));
  CHECK(scaled.c_t() == doctest::Approx(1.5 * base.c_t()).epsilon(1e-12));
  CHECK(scaled.c_h() == doctest::Approx(base.c_h()).epsilon(1e-15));
}

TEST_CASE("prediction band is 1.96 sigma wide on each side") {
  const auto b = prediction_band(4.0, 10.0);
  CHECK(b.low == doctest::Approx(10.0 - 1.96 * 2.0));
  CHECK(b.high == doctest::Approx(10.0 + 1.96 * 2.0));
}

TEST_CASE("design synthesis chains the relations") {
  const auto c = fit_scaling(testing::fixture());
  const auto d = synthesize_design(200, 250, c);
  // Hand-chained with the offline script.
  CHECK(d.d_mm == doctest::Approx(38.68621891899537).epsilon(1e-12));
  CHECK(d.h_mm == doctest::Approx(8.442214258348224).epsilon(1e-12));
  CHECK(d.mdot_mg_s == doctest::Approx(0.9023064241905067).epsilon(1e-12));
  CHECK(d.thrust_mn == doctest::Approx(12.307465204146261).epsilon(1e-12));
  CHECK(d.isp_s == doctest::Approx(1390.8935449050848).epsilon(1e-12));
  CHECK(d.eta_anode == doctest::Approx(0.419684753677676).epsilon(1e-12));
  for (const auto* b : {&d.d_band, &d.h_band, &d.mdot_band, &d.thrust_band}) {
    CHECK(b->low >= 0.0);
    CHECK(b->low <= b->high);
  }
  CHECK(d.thrust_band.low < d.thrust_mn);
  CHECK(d.thrust_band.high > d.thrust_mn);
}

TEST_CASE("design targets must be positive") {
  const auto c = fit_scaling(testing::fixture());
  CHECK_THROWS_AS(synthesize_design(-1, 300, c), DomainError);
  CHECK_THROWS_AS(synthesize_design(200, 0, c), DomainError);
}

TEST_CASE("design thrust grows with power") {
  const auto c = fit_scaling(testing::fixture());
  double prev = 0.0;
  for (double p : {100.0, 200.0, 400.0, 800.0}) {
    const auto d = synthesize_design(p, 300, c);
    CHECK(d.thrust_mn > prev);
    prev = d.thrust_mn;
  }
}
