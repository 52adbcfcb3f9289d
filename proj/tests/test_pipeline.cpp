#include <gtest/gtest.h>

#include "lapmesh/lapmesh.hpp"

using namespace lapmesh;

TEST(Pipeline, EasyCellSucceeds) {
  synth::SheetSceneParams p;
  p.sample = {200, 0.2, 1.0, 11};
  const synth::Scenario sc = synth::bent_sheet_scene(p);
  const Pipeline pl(sc.mesh, PipelineConfig{});
  CorrespondenceSet corr = sc.corr;
  const ReconstructResult r = pl.run(corr);
  ASSERT_TRUE(r.robust.has_value());
  ASSERT_TRUE(r.refined.has_value());
  EXPECT_EQ(r.refined->status, RefineStatus::converged);
  const synth::Metrics m = synth::evaluate(r.x, sc, r.inliers);
  EXPECT_TRUE(m.success);
  EXPECT_LE(m.mean_error_3d, 0.02 * synth::mesh_diameter(sc.mesh));
  EXPECT_GT(r.seconds, 0.0);
}

TEST(Pipeline, StagesCanBeDisabled) {
  const synth::Scenario sc = synth::bent_sheet_scene({});
  PipelineConfig cfg;
  cfg.robust = false;
  cfg.refine = false;
  const Pipeline pl(sc.mesh, cfg);
  CorrespondenceSet corr = sc.corr;
  const ReconstructResult r = pl.run(corr);
  EXPECT_FALSE(r.robust.has_value());
  EXPECT_FALSE(r.refined.has_value());
  EXPECT_EQ(r.x, r.linear.x);
}

TEST(Pipeline, AllControlsMatchesFullRegularCount) {
  const synth::Scenario sc = synth::bent_sheet_scene({});
  PipelineConfig all;
  all.strategy = ControlStrategy::all;
  all.refine = false;
  PipelineConfig regular = all;
  regular.strategy = ControlStrategy::regular;
  regular.control_count = sc.mesh.num_vertices();
  CorrespondenceSet a = sc.corr, b = sc.corr;
  const ReconstructResult ra = Pipeline(sc.mesh, all).run(a);
  const ReconstructResult rb = Pipeline(sc.mesh, regular).run(b);
  EXPECT_EQ(ra.x, rb.x);
}

TEST(Pipeline, NonplanarTemplate) {
  const TriMesh mesh = synth::half_cylinder();
  synth::DeformParams d;
  d.family = synth::DeformFamily::rigid;
  d.rotation = synth::axis_angle(Vec3(1, 0, 0), 0.4);
  d.translation = Vec3(0, 0, 500);
  const Eigen::VectorXd gt = synth::deform(mesh, d);
  synth::Sample s = synth::sample_correspondences(mesh, gt, synth::default_camera(), {300, 0.0, 0.5, 2});
  const WarningHandler prev = set_warning_handler([](const std::string&) {});
  const Pipeline pl(mesh, PipelineConfig{});
  set_warning_handler(prev);
  EXPECT_EQ(pl.regularizer().mode, RegularizerMode::nonplanar);
  const ReconstructResult r = pl.run(s.corr);
  synth::Scenario sc{"hc", mesh, gt, synth::default_camera(), s.corr, s.truth_outlier, 2};
  EXPECT_TRUE(synth::evaluate(r.x, sc).success);
}

TEST(Pipeline, PenetrationMeasure) {
  Eigen::VectorXd x(6);
  x << 0.0, 5.0, 0.0, 0.0, 0.0, 0.0;  // (0,0,0) and (5,0,0)
  const Cylinder c{Vec3::Zero(), Vec3::UnitY(), 2.0};
  EXPECT_DOUBLE_EQ(max_penetration(x, 2, c), 2.0);
  x[0] = 3.0;
  EXPECT_DOUBLE_EQ(max_penetration(x, 2, c), 0.0);
}

TEST(Pipeline, BallRun) {
  const synth::BallScene b = synth::ball_scene({});
  PipelineConfig cfg;
  cfg.control_count = kBallControlCount;
  const Pipeline pl(b.mesh, cfg);
  std::vector<CorrespondenceSet> frames;
  for (const auto& f : b.frames) frames.push_back(f.scene.corr);
  BallRunConfig rc;
  rc.obstacle = b.bat;
  const BallRunResult r = run_ball(pl, frames, rc);
  ASSERT_EQ(r.frames.size(), b.frames.size());
  EXPECT_TRUE(r.frames.back().impact);
  EXPECT_LE(r.frames.back().max_penetration, 1e-6 * b.bat.radius);
  const double err = synth::evaluate(r.frames.back().recon.x, b.frames.back().scene).mean_error_3d;
  EXPECT_LE(err, 0.02 * 73.52);
  EXPECT_LE(std::acos(std::min(1.0, std::abs(r.trajectory.direction.dot(b.trajectory.direction)))), 0.05);
}
