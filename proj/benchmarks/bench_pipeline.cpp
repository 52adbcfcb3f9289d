#include <benchmark/benchmark.h>

#include "lapmesh/lapmesh.hpp"

using namespace lapmesh;

namespace {

synth::Scenario scene(int n_inliers, double ratio) {
  synth::SheetSceneParams p;
  p.sample.n_inliers = n_inliers;
  p.sample.outlier_ratio = ratio;
  p.sample.noise_sigma = 1.0;
  p.sample.seed = 3;
  return synth::bent_sheet_scene(p);
}

struct Quiet {
  Quiet() { set_warning_handler([](const std::string&) {}); }
} quiet;

void BM_PlanarRegularizer(benchmark::State& state) {
  const TriMesh mesh = synth::grid_sheet();
  const Topology topo = build_topology(mesh);
  for (auto _ : state) benchmark::DoNotOptimize(build_planar(mesh, topo));
}
BENCHMARK(BM_PlanarRegularizer)->Unit(benchmark::kMicrosecond);

void BM_NonplanarRegularizer(benchmark::State& state) {
  const TriMesh mesh = synth::icosphere(2, 36.76);
  const Topology topo = build_topology(mesh);
  for (auto _ : state) benchmark::DoNotOptimize(build_nonplanar(mesh, topo, 1.0));
}
BENCHMARK(BM_NonplanarRegularizer)->Unit(benchmark::kMillisecond);

void BM_ControlBasis(benchmark::State& state) {
  const TriMesh mesh = synth::grid_sheet();
  const Regularizer reg = build_planar(mesh, build_topology(mesh));
  const auto idx = select_controls(mesh, ControlStrategy::regular, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_P(reg, idx));
}
BENCHMARK(BM_ControlBasis)->Arg(25)->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_LinearSolve(benchmark::State& state) {
  const synth::Scenario sc = scene(300, 0.0);
  PipelineConfig cfg;
  const Pipeline pl(sc.mesh, cfg);
  const RowSparseMatrix m = assemble_data_rows(sc.mesh, sc.corr);
  for (auto _ : state) benchmark::DoNotOptimize(solve_initial(m, pl.basis(), pl.topology(), {}));
}
BENCHMARK(BM_LinearSolve)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const synth::Scenario sc = scene(240, 0.2);
  const Pipeline pl(sc.mesh, PipelineConfig{});
  for (auto _ : state) {
    CorrespondenceSet corr = sc.corr;
    benchmark::DoNotOptimize(pl.run(corr));
  }
}
BENCHMARK(BM_Reconstruct)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
