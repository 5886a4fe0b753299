#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "snarf/config.hpp"
#include "snarf/dataset.hpp"
#include "snarf/evaluation.hpp"
#include "snarf/occupancy.hpp"
#include "snarf/oracle.hpp"
#include "snarf/rootfind.hpp"
#include "snarf/trainer.hpp"

using namespace snarf;

namespace {

Batch random_points(int dim, Eigen::Index n, std::uint64_t seed, double scale = 1.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Batch x(dim, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int k = 0; k < dim; ++k) x(k, j) = u(rng);
  }
  return x;
}

ModelParams bench_model(int width) {
  ExperimentConfig c;
  c.occupancy_net.hidden_widths = {width, width, width};
  c.skinning_net.hidden_widths = {width / 2, width / 2};
  return initial_model(c, ModelKind::forward_skinning);
}

void BM_MlpForward(benchmark::State& state) {
  const ModelParams m = bench_model(static_cast<int>(state.range(0)));
  const Batch x = random_points(2, 256, 1);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward_batch(m.occupancy, x).output.data());
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_MlpForward)->Arg(32)->Arg(64)->Arg(128);

void BM_MlpBackward(benchmark::State& state) {
  const ModelParams m = bench_model(static_cast<int>(state.range(0)));
  const Batch x = random_points(2, 256, 2);
  const MlpTape tape = mlp_forward_batch(m.occupancy, x);
  const Eigen::MatrixXd dy = Eigen::MatrixXd::Ones(1, x.cols());
  MlpGrad g(m.occupancy);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_backward_batch(m.occupancy, tape, dy, &g).data());
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_MlpBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_BroydenBatch(benchmark::State& state) {
  const ModelParams m = bench_model(64);
  const BoneTransformSet frame = forward_kinematics_stick(std::vector<double>{0.9}, StickGeometry{});
  const BoneTransformSet* frames[] = {&frame};
  const Batch q = random_points(2, state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(find_correspondences_batch(m.skinning, q, frames, m.solver).size());
  state.SetItemsProcessed(state.iterations() * q.cols());
}
BENCHMARK(BM_BroydenBatch)->Arg(64)->Arg(256);

void BM_OracleLabels(benchmark::State& state) {
  const StickGeometry g;
  const BoneTransformSet frame = forward_kinematics_stick(std::vector<double>{0.8}, g);
  const Batch q = random_points(2, 4096, 4);
  for (auto _ : state) {
    const StickOracle oracle(g, frame, static_cast<int>(state.range(0)));
    int inside = 0;
    for (Eigen::Index j = 0; j < q.cols(); ++j) inside += oracle.inside(q.col(j));
    benchmark::DoNotOptimize(inside);
  }
}
BENCHMARK(BM_OracleLabels)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
  ExperimentConfig c;
  c.frames = 1;
  c.samples_per_frame = static_cast<int>(state.range(0));
  c.oracle_lattice_cells = 200;
  c.occupancy_net.hidden_widths = {64, 64, 64};
  c.skinning_net.hidden_widths = {32, 32};
  const Dataset data = generate_dataset(c, Split::train);
  const ModelParams m = initial_model(c, ModelKind::forward_skinning);
  const FrameSample& f = data.frames.front();
  const BoneTransformSet* frames[] = {&f.transforms};
  for (auto _ : state) {
    MlpGrad g_occ(m.occupancy);
    MlpGrad g_skin(m.skinning);
    benchmark::DoNotOptimize(total_loss(m, f.points, frames, f.labels, {}, &g_occ, &g_skin).total);
  }
  state.SetItemsProcessed(state.iterations() * f.size());
}
BENCHMARK(BM_TrainingStep)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_PredictOccupancy(benchmark::State& state) {
  const ModelParams m = bench_model(64);
  const BoneTransformSet frame = forward_kinematics_stick(std::vector<double>{-0.7}, StickGeometry{});
  const BoneTransformSet* frames[] = {&frame};
  const Batch q = random_points(2, 4096, 5);
  for (auto _ : state) benchmark::DoNotOptimize(predict_occupancy(m, q, frames).data());
  state.SetItemsProcessed(state.iterations() * q.cols());
}
BENCHMARK(BM_PredictOccupancy)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
