// Serial reference kernels against their OpenMP counterparts. On a single
// core the pairs should time alike; the parallel paths pay off with more
// threads (set OMP_NUM_THREADS).

#include <benchmark/benchmark.h>

#include <optional>

#include "surfkin/fk/model.hpp"
#include "surfkin/ik/pipeline.hpp"
#include "surfkin/oracle/capture.hpp"

using namespace surfkin;

namespace {

struct Bench {
  oracle::VirtualMannequin vm{oracle::default_mannequin()};
  fk::FkModel fk;
  sim2real::S2rModel s2r;
  std::optional<geometry::MeshQuery> mesh;
  Points queries;
  ik::PipelineState state;
  Points targets;
};

const Bench& bench() {
  static const Bench b = [] {
    Bench b;
    fk::DatasetOptions d;
    d.include_corners = false;
    d.halton_count = 60;
    const auto ds = fk::build_dataset(b.vm, d);
    fk::FkTrainOptions fo;
    fo.train.max_epochs = 5;
    b.fk = fk::train_fk(ds, fo).model;
    const auto uvs = oracle::canonical_marker_uvs();
    const oracle::RealityGap gap(oracle::default_gap());
    std::vector<oracle::MarkerFrame> frames;
    const auto acts = oracle::random_actuations(10, 1);
    for (std::size_t k = 0; k < acts.size(); ++k) frames.push_back(oracle::capture_frame(b.vm, gap, acts[k], uvs, {}, k));
    sim2real::S2rOptions so;
    so.train.max_epochs = 5;
    b.s2r = sim2real::train_rbf_net(sim2real::pair_with_fk(frames, b.fk), b.fk, uvs, so).model;

    const ik::Models models{b.fk, b.s2r};
    b.mesh.emplace(geometry::grid_mesh(
        40, 40, ik::evaluate_pipeline(models, oracle::uniform_actuation(0.3), bspline::regular_grid(40, 40)).points));
    b.state = ik::evaluate_pipeline(models, oracle::uniform_actuation(0.6), ik::sample_params(1200));
    b.queries = b.state.points;
    b.targets = ik::correspondences(b.state.points, *b.mesh, geometry::RigidTransform::identity());
    return b;
  }();
  return b;
}

void BM_ClosestPointsSerial(benchmark::State& s) {
  const auto& b = bench();
  for (auto _ : s) benchmark::DoNotOptimize(geometry::closest_points_serial(*b.mesh, b.queries));
}
void BM_ClosestPointsParallel(benchmark::State& s) {
  const auto& b = bench();
  for (auto _ : s) benchmark::DoNotOptimize(geometry::closest_points(*b.mesh, b.queries));
}

void BM_PipelineSerial(benchmark::State& s) {
  const auto& b = bench();
  for (auto _ : s)
    benchmark::DoNotOptimize(ik::evaluate_pipeline({b.fk, b.s2r}, b.state.a, b.state.params, false));
}
void BM_PipelineParallel(benchmark::State& s) {
  const auto& b = bench();
  for (auto _ : s) benchmark::DoNotOptimize(ik::evaluate_pipeline({b.fk, b.s2r}, b.state.a, b.state.params, true));
}

void BM_GradientSerial(benchmark::State& s) {
  const auto& b = bench();
  for (auto _ : s) benchmark::DoNotOptimize(ik::frozen_gradient_serial({b.fk, b.s2r}, b.state, b.targets));
}
void BM_GradientParallel(benchmark::State& s) {
  const auto& b = bench();
  for (auto _ : s) benchmark::DoNotOptimize(ik::frozen_gradient({b.fk, b.s2r}, b.state, b.targets));
}

fk::DatasetOptions small_dataset() {
  fk::DatasetOptions d;
  d.include_corners = false;
  d.halton_count = 40;
  return d;
}
void BM_DatasetSerial(benchmark::State& s) {
  const auto& b = bench();
  for (auto _ : s) benchmark::DoNotOptimize(fk::build_dataset_serial(b.vm, small_dataset()));
}
void BM_DatasetParallel(benchmark::State& s) {
  const auto& b = bench();
  for (auto _ : s) benchmark::DoNotOptimize(fk::build_dataset(b.vm, small_dataset()));
}

}  // namespace

BENCHMARK(BM_ClosestPointsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClosestPointsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PipelineSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PipelineParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DatasetSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DatasetParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
