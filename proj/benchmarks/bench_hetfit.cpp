#include <benchmark/benchmark.h>

#include "hetfit/augment.hpp"
#include "hetfit/dataset.hpp"
#include "hetfit/model_io.hpp"
#include "hetfit/nn.hpp"
#include "hetfit/random.hpp"
#include "hetfit/text.hpp"
#include "hetfit/tpe.hpp"
#include "hetfit/tune.hpp"

using namespace hetfit;

namespace {

Eigen::MatrixXd uniform(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return m;
}

const std::vector<nn::LayerSpec> kNet = {
    {64, nn::Activation::kTanh}, {32, nn::Activation::kTanh}, {1, nn::Activation::kIdentity}};

Dataset fixture() {
  return parse_dataset(text::read_file(std::string(HETFIT_BENCH_DATA_DIR) + "/het_thrusters.csv"));
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const auto net = nn::Mlp::build(6, kNet, 1);
  const auto x = uniform(state.range(0), 6, 2);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward_batch(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(512)->Arg(2500);

static void BM_TrainEpoch(benchmark::State& state) {
  const auto x = uniform(512, 6, 3);
  const Eigen::MatrixXd y = x.rowwise().sum();
  nn::TrainConfig cfg;
  cfg.epochs = 1;
  auto net = nn::Mlp::build(6, kNet, 4);
  for (auto _ : state) benchmark::DoNotOptimize(nn::train(net, x, y, cfg).final_loss);
}
BENCHMARK(BM_TrainEpoch);

static void BM_TpeSuggest(benchmark::State& state) {
  const auto space = tune::SearchSpace{}.to_tpe();
  Rng rng(5);
  std::vector<tpe::Observation> history;
  for (int i = 0; i < state.range(0); ++i) {
    history.push_back({space.sample_uniform(rng), rng.uniform(), true});
  }
  tpe::Sampler sampler(space, {}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.suggest(history));
}
BENCHMARK(BM_TpeSuggest)->Arg(20)->Arg(50);

static void BM_GanSample(benchmark::State& state) {
  const auto ds = fixture();
  augment::GanConfig cfg;
  cfg.epochs = 50;
  const auto gan = augment::train_gan(fit_scaler(ds).scale(ds.feature_matrix()), cfg);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(augment::sample(gan, 512, seed++));
}
BENCHMARK(BM_GanSample);

static void BM_SurfaceGrid(benchmark::State& state) {
  const auto ds = fixture();
  const std::vector<std::string> in = {"power_w", "ud_v", "d_mm", "h_mm", "l_mm", "mdot_mg_s"};
  Eigen::MatrixXd xr(static_cast<Eigen::Index>(ds.size()), 6), yr(xr.rows(), 1);
  const auto all = ds.feature_matrix();
  for (int j = 0; j < 6; ++j) xr.col(j) = all.col(static_cast<Eigen::Index>(*feature_index(in[j])));
  yr.col(0) = all.col(static_cast<Eigen::Index>(*feature_index("thrust_mn")));
  Surrogate s{in, {"thrust_mn"}, fit_scaler(xr, in), fit_scaler(yr, {"thrust_mn"}),
              nn::Mlp::build(6, kNet, 7)};
  const int g = 50;
  Eigen::MatrixXd grid(g * g, 6);
  for (int j = 0; j < 6; ++j) grid.col(j).setConstant(xr.col(j).mean());
  for (int i = 0; i < g; ++i) {
    for (int k = 0; k < g; ++k) {
      grid(i * g + k, 2) = 10.0 + 80.0 * i / (g - 1);
      grid(i * g + k, 0) = 50.0 + 1300.0 * k / (g - 1);
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(s.predict_real(grid));
}
BENCHMARK(BM_SurfaceGrid);

BENCHMARK_MAIN();
