#include <benchmark/benchmark.h>

#include "uqgfn/env/discrete_grid.hpp"
#include "uqgfn/env/structlearn.hpp"
#include "uqgfn/gfn/models.hpp"
#include "uqgfn/gfn/sampler.hpp"
#include "uqgfn/gfn/trainer.hpp"
#include "uqgfn/pce/policy_surrogate.hpp"
#include "uqgfn/pipeline/statistics.hpp"

using namespace uqgfn;

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = standard_normal(rng);
  return m;
}

void BM_PceRidgeFit(benchmark::State& state) {
  const int degree = static_cast<int>(state.range(0));
  const Matrix x = gaussian(500, 2, 1);
  Vector y = x.col(0).array().sin() + x.col(1).array().square();
  for (auto _ : state)
    benchmark::DoNotOptimize(pce::fit_ridge(x, y, pce::RidgeOptions{pce::BasisFamily::kHermite, degree, 1e-6}));
}
BENCHMARK(BM_PceRidgeFit)->Arg(3)->Arg(7)->Arg(12);

void BM_PolicySurrogateSampleBatch(benchmark::State& state) {
  const Matrix latents = gaussian(20, 2, 2);
  Tensor3 policies(20, 19, 5);
  Rng rng(3);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t t = 0; t < 19; ++t) {
      double total = 0.0;
      for (std::size_t c = 0; c < 5; ++c) total += policies(i, t, c) = 0.05 + uniform01(rng);
      for (std::size_t c = 0; c < 5; ++c) policies(i, t, c) /= total;
    }
  pce::PolicySurrogateOptions options;
  options.ridge.degree = 3;
  const auto surrogate = pce::fit_policy_surrogate(latents, policies, pce::PolicyKind::kDiscrete, options,
                                                   pce::InputStandardisation::gaussian_mle(latents));
  const Matrix draws = gaussian(state.range(0), 2, 4);
  for (auto _ : state) benchmark::DoNotOptimize(surrogate.sample_batch(draws));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PolicySurrogateSampleBatch)->Arg(1000)->Arg(5000);

void BM_GridTrainingEpisode(benchmark::State& state) {
  Rng rng(5);
  const env::DiscreteGridEnv env(env::sample_discrete_reward(env::GridRewardConfig{}, rng), 20, env::Cell{0, 0});
  const int width = static_cast<int>(state.range(0));
  gfn::MlpGfnModel model(env.encoding_size(), env.num_actions(), {width, width}, false, rng);
  gfn::TrainConfig config;
  config.episodes = 1;
  for (auto _ : state) benchmark::DoNotOptimize(gfn::train(model, env, config, rng));
}
BENCHMARK(BM_GridTrainingEpisode)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_BgeScoreConstruction(benchmark::State& state) {
  Rng rng(6);
  const auto net = env::LinearGaussianNetwork::sample(env::default_ground_truth(), 0.01, rng);
  const Matrix data = env::sample_dataset(net, static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(env::BgeScore(data, env::BgeHyperparams::defaults(5)));
}
BENCHMARK(BM_BgeScoreConstruction)->Arg(100)->Arg(1000);

void BM_ModeCount(benchmark::State& state) {
  Rng rng(7);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = standard_normal(rng) + (i % 3 == 0 ? 4.0 : 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(pipeline::mode_count(x));
}
BENCHMARK(BM_ModeCount)->Arg(5000)->Arg(50000);

void BM_Wasserstein1(benchmark::State& state) {
  Rng rng(8);
  std::vector<double> a(static_cast<std::size_t>(state.range(0))), b(a.size());
  for (auto& v : a) v = standard_normal(rng);
  for (auto& v : b) v = 1.0 + standard_normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(pipeline::wasserstein1(a, b));
}
BENCHMARK(BM_Wasserstein1)->Arg(5000)->Arg(50000);

}  // namespace
BENCHMARK_MAIN();
