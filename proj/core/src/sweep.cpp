#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "lapmesh/error.hpp"
#include "lapmesh/pipeline.hpp"
#include "lapmesh/synth.hpp"

namespace lapmesh {

namespace synth {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int worker_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(n, 1);
  if (const char* env = std::getenv("LAPMESH_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap > 0) n = std::min(n, cap);
    } catch (const std::exception&) {
      // unparsable values are ignored
    }
  }
  return n;
}

bool significant_increase(int successes_a, int n_a, int successes_b, int n_b, double confidence) {
  if (n_a <= 0 || n_b <= 0) return false;
  const double pa = static_cast<double>(successes_a) / n_a;
  const double pb = static_cast<double>(successes_b) / n_b;
  const double pooled = static_cast<double>(successes_a + successes_b) / (n_a + n_b);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b));
  if (!(se > 0.0)) return false;  // identical all-or-nothing samples
  const double z = (pb - pa) / se;
  // Inverse normal CDF by bisection on erfc; the confidence is a fixed input.
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > 1.0 - confidence) lo = mid; else hi = mid;
  }
  return z > 0.5 * (lo + hi);
}

}  // namespace synth

std::vector<synth::SweepCell> robustness_sweep(const synth::SheetSceneParams& scene,
                                               const synth::SweepGrid& grid,
                                               const PipelineConfig& cfg, int threads) {
  if (grid.trials < 1 || grid.inliers.empty() || grid.ratios.empty()) {
    throw Error(ErrorCode::ParamOutOfRange, "sweep needs a non-empty grid and trials >= 1");
  }
  const Pipeline pipeline(synth::grid_sheet(scene.nx, scene.ny, scene.width, scene.height), cfg);
  const std::size_t n_cells = grid.inliers.size() * grid.ratios.size();
  const std::size_t n_jobs = n_cells * static_cast<std::size_t>(grid.trials);
  std::vector<char> success(n_jobs, 0);
  std::vector<double> runtime(n_jobs, 0.0);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t job = next++; job < n_jobs; job = next++) {
      const std::size_t cell = job / grid.trials;
      const std::size_t trial = job % grid.trials;
      synth::SheetSceneParams p = scene;
      p.sample.n_inliers = grid.inliers[cell / grid.ratios.size()];
      p.sample.outlier_ratio = grid.ratios[cell % grid.ratios.size()];
      p.sample.noise_sigma = grid.noise_sigma;
      p.sample.seed = synth::splitmix64(grid.seed ^ synth::splitmix64(cell * 1000003ULL + trial));
      const synth::Scenario sc = synth::bent_sheet_scene(p);
      CorrespondenceSet corr = sc.corr;
      try {
        const ReconstructResult res = pipeline.run(corr);
        runtime[job] = res.seconds;
        success[job] = synth::evaluate(res.x, sc).success ? 1 : 0;
      } catch (const Error&) {
        success[job] = 0;  // e.g. every correspondence rejected
      }
    }
  };
  const int n_workers = std::min<int>(synth::worker_count(threads), static_cast<int>(n_jobs));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::vector<synth::SweepCell> cells(n_cells);
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    auto& c = cells[cell];
    c.n_inliers = grid.inliers[cell / grid.ratios.size()];
    c.outlier_ratio = grid.ratios[cell % grid.ratios.size()];
    c.trials = grid.trials;
    double total = 0.0;
    for (int t = 0; t < grid.trials; ++t) {
      const std::size_t job = cell * grid.trials + t;
      c.successes += success[job];
      total += runtime[job];
    }
    c.success_rate = static_cast<double>(c.successes) / c.trials;
    c.mean_runtime = total / c.trials;
  }
  return cells;
}

}  // namespace lapmesh
