#include <benchmark/benchmark.h>

#include <memory>

#include "outpro/copula.hpp"
#include "outpro/forest.hpp"
#include "outpro/friedman.hpp"
#include "outpro/importance.hpp"
#include "outpro/metrics.hpp"
#include "outpro/rng.hpp"
#include "outpro/scorer.hpp"

using namespace outpro;

namespace {

struct Fixture {
  Dataset train;
  Standardizer standardizer;
  Eigen::MatrixXd train_std;
  std::shared_ptr<const Forest> forest;
  std::shared_ptr<const OodCore> core;
  OodModel model;

  static const Fixture& instance(int n, int d) {
    static Fixture fx(n, d);
    return fx;
  }

 private:
  Fixture(int n, int d)
      : train(gen_friedman({n, d, 1.0, 7})),
        standardizer(Standardizer::fit(train.features)),
        train_std(standardizer.transform(train.features)),
        forest(std::make_shared<const Forest>(
            Forest::fit(train_std, train.response, {500, 0, 5, 7}, 0))),
        core(std::make_shared<const OodCore>(
            *forest,
            select_signal(compute_importance(*forest, train_std, train.response, 1000, 3, 0)),
            standardizer, train_std, 50)),
        model(calibrate(core, {MetricSpec::parse("product")}, 0.05, 0)[0]) {}
};

void BM_forest_fit(benchmark::State& state) {
  const Dataset ds = gen_friedman({static_cast<int>(state.range(0)), 10, 1.0, 11});
  const Standardizer st = Standardizer::fit(ds.features);
  const Eigen::MatrixXd xs = st.transform(ds.features);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Forest::fit(xs, ds.response, {100, 0, 5, 1}, 1));
  }
}
BENCHMARK(BM_forest_fit)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_frequency_profiles(benchmark::State& state) {
  const Fixture& fx = Fixture::instance(static_cast<int>(state.range(0)), 10);
  const Eigen::VectorXd x = fx.train_std.row(3).transpose();
  for (auto _ : state) {
    benchmark::DoNotOptimize(fx.core->frequency_profiles(x));
  }
}
BENCHMARK(BM_frequency_profiles)->Arg(2000)->Unit(benchmark::kMicrosecond);

void BM_score_point(benchmark::State& state) {
  const Fixture& fx = Fixture::instance(2000, 10);
  const Eigen::VectorXd x = fx.train.features.row(42).transpose();
  for (auto _ : state) {
    benchmark::DoNotOptimize(fx.model.score_point(x));
  }
}
BENCHMARK(BM_score_point)->Unit(benchmark::kMicrosecond);

void BM_subspace_distance(benchmark::State& state) {
  const Fixture& fx = Fixture::instance(2000, 10);
  const MetricSpec metric = MetricSpec::parse("product");
  const Eigen::VectorXd a = fx.train_std.row(0).transpose();
  const Eigen::VectorXd b = fx.train_std.row(1).transpose();
  for (auto _ : state) {
    benchmark::DoNotOptimize(fx.core->subspace_distance(metric, a, b));
  }
}
BENCHMARK(BM_subspace_distance);

void BM_gen_warp(benchmark::State& state) {
  const Fixture& fx = Fixture::instance(2000, 10);
  const CopulaModel model = fit_copula(fx.train.features, 0.05);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_warp(model, 400, 4.0, 1));
  }
}
BENCHMARK(BM_gen_warp)->Unit(benchmark::kMillisecond);

void BM_auc_pr(benchmark::State& state) {
  Rng rng(5);
  const std::size_t n = 10000;
  std::vector<double> scores(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform01();
    labels[i] = rng.uniform01() < 0.3 ? 1 : 0;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(auc_pr(scores, labels));
  }
}
BENCHMARK(BM_auc_pr)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
