#include <benchmark/benchmark.h>

#include "injuryrisk/models/model.hpp"
#include "injuryrisk/random.hpp"

using namespace injuryrisk;
using namespace injuryrisk::models;

namespace {

// 3 sessions x 34 per-session features, roughly one grid cell's training set.
Dataset dataset(int rows) {
  Rng rng(4);
  Dataset ds;
  std::vector<std::string> base;
  for (int f = 0; f < 34; ++f) base.push_back("f" + std::to_string(f));
  for (const auto& b : base) {
    for (int t = 1; t <= 3; ++t) ds.names.push_back(b + "_" + std::to_string(t));
  }
  ds.n_in = 3;
  ds.x = Eigen::MatrixXd(rows, static_cast<Eigen::Index>(ds.names.size()));
  for (int i = 0; i < rows; ++i) {
    const int label = rng.uniform() < 0.25 ? 1 : 0;
    for (Eigen::Index j = 0; j < ds.x.cols(); ++j) ds.x(i, j) = rng.normal() + (j % 7 == 0 ? 0.8 * label : 0.0);
    ds.y.push_back(label);
  }
  return ds;
}

void train_kind(benchmark::State& state, ModelKind kind) {
  const auto ds = dataset(static_cast<int>(state.range(0)));
  ModelConfig cfg;
  cfg.kind = kind;
  for (auto _ : state) benchmark::DoNotOptimize(TrainedModel::train(ds, cfg));
}

}  // namespace

static void BM_TrainLogit(benchmark::State& s) { train_kind(s, ModelKind::logit); }
static void BM_TrainSvc(benchmark::State& s) { train_kind(s, ModelKind::svc); }
static void BM_TrainForest(benchmark::State& s) { train_kind(s, ModelKind::randomforest); }
static void BM_TrainBoosting(benchmark::State& s) { train_kind(s, ModelKind::xgboost); }
static void BM_TrainLstm(benchmark::State& s) { train_kind(s, ModelKind::lstm); }
BENCHMARK(BM_TrainLogit)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainSvc)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainForest)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainBoosting)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainLstm)->Arg(400)->Unit(benchmark::kMillisecond);
