#include "lapmesh/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "lapmesh/error.hpp"

namespace lapmesh {

Regularizer build_regularizer(const TriMesh& mesh, const Topology& topo,
                              std::optional<RegularizerMode> mode, double sigma) {
  if (mode == RegularizerMode::planar) return build_planar(mesh, topo);
  if (mode == RegularizerMode::nonplanar) return build_nonplanar(mesh, topo, sigma);
  try {
    return build_planar(mesh, topo);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotPlanar) throw;
  }
  return build_nonplanar(mesh, topo, sigma);
}

Pipeline::Pipeline(TriMesh mesh, const PipelineConfig& cfg)
    : mesh_(std::move(mesh)), cfg_(cfg), topo_(build_topology(mesh_)) {
  reg_ = build_regularizer(mesh_, topo_, cfg_.mode, cfg_.sigma);
  basis_ = build_P(reg_, select_controls(mesh_, cfg_.strategy, cfg_.control_count, cfg_.seed),
                   cfg_.strategy);
}

ReconstructResult Pipeline::run(CorrespondenceSet& corr) const {
  const auto start = std::chrono::steady_clock::now();
  ReconstructResult out;
  if (cfg_.robust) {
    RobustConfig rc = cfg_.robust_cfg;
    rc.method = cfg_.method;
    out.robust = reject_outliers(mesh_, topo_, corr, basis_, rc);
    out.linear = out.robust->solution;
  } else {
    LinearSolveConfig lc;
    lc.w_r = cfg_.w_r;
    lc.method = cfg_.method;
    out.linear = solve_initial(assemble_data_rows(mesh_, corr), basis_, topo_, lc);
  }
  out.x = out.linear.x;
  out.inliers = corr.inlier_flags();

  if (cfg_.refine) {
    RefineConfig rc = cfg_.refine_cfg;
    const Eigen::MatrixXd mp = basis_.right_multiply(assemble_data_rows(mesh_, corr));
    out.refined = refine_constrained(out.linear.c, mp, basis_, topo_, rc);
    out.x = out.refined->x;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

double max_penetration(const Eigen::VectorXd& x, int num_vertices, const Cylinder& cyl) {
  const Vec3 dir = cyl.direction.normalized();
  double worst = 0.0;
  for (int i = 0; i < num_vertices; ++i) {
    Vec3 r = vertex_at(x, num_vertices, i) - cyl.point;
    r -= r.dot(dir) * dir;
    worst = std::max(worst, cyl.radius - r.norm());
  }
  return worst;
}

BallRunResult run_ball(const Pipeline& pipeline, std::vector<CorrespondenceSet>& frames,
                       const BallRunConfig& cfg) {
  if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "ball run needs at least one frame");
  const int nv = pipeline.mesh().num_vertices();
  BallRunResult out;
  std::vector<Vec3> centres;
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    BallFrameResult f;
    f.recon = pipeline.run(frames[k]);
    f.centroid = f.recon.x.reshaped(nv, 3).colwise().mean().transpose();
    f.max_penetration = max_penetration(f.recon.x, nv, cfg.obstacle);
    centres.push_back(f.centroid);
    out.frames.push_back(std::move(f));
  }
  out.trajectory = cfg.trajectory ? *cfg.trajectory : fit_trajectory(centres);

  // impact frame: linear estimate, then the obstacle-aware refinement
  PipelineConfig linear_cfg = pipeline.config();
  linear_cfg.refine = false;
  const Pipeline linear(pipeline.mesh(), linear_cfg);
  CorrespondenceSet& corr = frames.back();
  BallFrameResult f;
  f.impact = true;
  f.recon = linear.run(corr);
  BallConfig ball;
  ball.w_l = cfg.w_l;
  ball.w_t = cfg.w_t;
  ball.obstacle = cfg.obstacle;
  ball.trajectory = out.trajectory;
  const Eigen::MatrixXd mp = pipeline.basis().right_multiply(assemble_data_rows(pipeline.mesh(), corr));
  f.recon.refined = refine_ball(f.recon.linear.c, mp, pipeline.basis(), pipeline.topology(),
                                pipeline.config().refine_cfg, ball);
  f.recon.x = f.recon.refined->x;
  f.centroid = f.recon.x.reshaped(nv, 3).colwise().mean().transpose();
  f.max_penetration = max_penetration(f.recon.x, nv, cfg.obstacle);
  out.frames.push_back(std::move(f));
  return out;
}

}  // namespace lapmesh
