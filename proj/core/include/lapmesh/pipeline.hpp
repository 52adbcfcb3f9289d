#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lapmesh/controls.hpp"
#include "lapmesh/linear_solver.hpp"
#include "lapmesh/mesh.hpp"
#include "lapmesh/projection.hpp"
#include "lapmesh/refine.hpp"
#include "lapmesh/regularizer.hpp"
#include "lapmesh/robust.hpp"
#include "lapmesh/synth.hpp"

namespace lapmesh {

/// Every tunable of a reconstruction, with the library defaults.
struct PipelineConfig {
  std::optional<RegularizerMode> mode;  // unset: planar when the reference is planar
  double sigma = 1.0;
  ControlStrategy strategy = ControlStrategy::regular;
  int control_count = 25;
  std::uint64_t seed = 0;
  double w_r = 1.0;  // linear solve weight when the robust stage is off
  EigenMethod method = EigenMethod::automatic;
  bool robust = true;
  RobustConfig robust_cfg;
  bool refine = true;
  RefineConfig refine_cfg;
};

struct ReconstructResult {
  LinearSolution linear;              // final linear estimate
  std::optional<RobustResult> robust;
  std::optional<RefineResult> refined;
  Eigen::VectorXd x;                  // best available shape
  std::vector<bool> inliers;
  double seconds = 0.0;               // wall time of run()
};

/// Reference-dependent pieces (topology, regularizer, control basis) built
/// once and shared by every reconstruction against that template.
class Pipeline {
 public:
  Pipeline(TriMesh mesh, const PipelineConfig& cfg);

  /// Robust linear estimate followed by constrained refinement, as enabled in
  /// the configuration. Updates the inlier flags of `corr`.
  ReconstructResult run(CorrespondenceSet& corr) const;

  const TriMesh& mesh() const { return mesh_; }
  const Topology& topology() const { return topo_; }
  const Regularizer& regularizer() const { return reg_; }
  const ControlBasis& basis() const { return basis_; }
  const PipelineConfig& config() const { return cfg_; }

 private:
  TriMesh mesh_;
  PipelineConfig cfg_;
  Topology topo_;
  Regularizer reg_;
  ControlBasis basis_;
};

/// Control vertices used for the ball template; 25 cannot follow the contact
/// flattening.
inline constexpr int kBallControlCount = 50;

struct BallRunConfig {
  double w_l = 1.0;  // edge-length penalty in the impact frame
  double w_t = 3.0;  // trajectory penalty in the impact frame
  Cylinder obstacle;
  /// Unset: fitted to the reconstructed centres of every frame but the last.
  std::optional<Line3> trajectory;
};

struct BallFrameResult {
  ReconstructResult recon;
  Vec3 centroid = Vec3::Zero();
  double max_penetration = 0.0;  // world units, 0 when every vertex is outside
  bool impact = false;
};

struct BallRunResult {
  Line3 trajectory;
  std::vector<BallFrameResult> frames;
};

/// Greatest depth of any vertex inside the cylinder (0 if none).
double max_penetration(const Eigen::VectorXd& x, int num_vertices, const Cylinder& cyl);

/// Reconstructs every frame with `pipeline`; the last one is the impact frame
/// and is refined against the obstacle and the trajectory instead of the edge
/// constraints. Needs at least two approach frames when the trajectory is
/// fitted.
BallRunResult run_ball(const Pipeline& pipeline, std::vector<CorrespondenceSet>& frames,
                       const BallRunConfig& cfg);

/// Planar operator when the reference is planar, non-planar otherwise (or the
/// explicitly requested mode).
Regularizer build_regularizer(const TriMesh& mesh, const Topology& topo,
                              std::optional<RegularizerMode> mode, double sigma);

/// Success rate per (inliers, outlier ratio) cell on the bent-sheet scene.
/// Trials run on `threads` workers (0 = all cores, capped by LAPMESH_THREADS);
/// the table only depends on the grid seed.
std::vector<synth::SweepCell> robustness_sweep(const synth::SheetSceneParams& scene,
                                               const synth::SweepGrid& grid,
                                               const PipelineConfig& cfg, int threads = 0);

}  // namespace lapmesh
