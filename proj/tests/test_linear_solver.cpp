#include <random>

#include <gtest/gtest.h>

#include "lapmesh/lapmesh.hpp"
#include "test_util.hpp"

using namespace lapmesh;
using namespace lapmesh::testing;

namespace {

struct Fixture {
  synth::Scenario sc;
  Topology topo;
  Regularizer reg;
  ControlBasis basis;

  explicit Fixture(double bend_radius = 400.0, int n = 300) {
    synth::SheetSceneParams p;
    p.bend_radius = bend_radius;
    p.sample.n_inliers = n;
    sc = synth::bent_sheet_scene(p);
    topo = build_topology(sc.mesh);
    reg = build_planar(sc.mesh, topo);
    basis = build_P(reg, select_controls(sc.mesh, ControlStrategy::regular, 25));
  }

  LinearSolution solve(double w_r = 1.0, EigenMethod method = EigenMethod::automatic,
                       bool spectrum = false) const {
    LinearSolveConfig cfg;
    cfg.w_r = w_r;
    cfg.method = method;
    cfg.keep_spectrum = spectrum;
    return solve_initial(assemble_data_rows(sc.mesh, sc.corr), basis, topo, cfg);
  }
};

double rms(const std::vector<double>& e) {
  double s = 0.0;
  for (double v : e) s += v * v;
  return std::sqrt(s / e.size());
}

}  // namespace

TEST(LinearSolve, NoiselessProjectionsAccurate) {
  const Fixture f;
  const LinearSolution s = f.solve();
  EXPECT_LE(rms(reprojection_errors(f.sc.mesh, f.sc.camera, f.sc.corr, s.x)), 0.1);
  EXPECT_DOUBLE_EQ(s.w_r, 1.0);
}

TEST(LinearSolve, ScaleMatchesReferenceEdges) {
  const Fixture f;
  const LinearSolution s = f.solve();
  const double want = f.topo.mean_edge_length();
  EXPECT_LE(std::abs(mean_edge_length(f.topo, s.x, f.sc.mesh.num_vertices()) - want), 1e-9 * want);
  EXPECT_LE((f.basis.apply(s.c) - s.x).norm(), 1e-10 * s.x.norm());
}

TEST(LinearSolve, PositiveMeanDepth) {
  const Fixture f;
  const LinearSolution s = f.solve();
  EXPECT_GT(s.x.tail(f.sc.mesh.num_vertices()).mean(), 0.0);
}

TEST(LinearSolve, ObjectiveBelowRandomDirections) {
  const Fixture f;
  const LinearSolution s = f.solve();
  const Eigen::MatrixXd mwr = stacked_system(f.basis.right_multiply(assemble_data_rows(f.sc.mesh, f.sc.corr)),
                                             f.basis, 1.0);
  EXPECT_NEAR((mwr * s.c.normalized()).squaredNorm(), s.objective, 1e-9 * (1.0 + s.objective));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(s.c.size(), [&] { return n(rng); }).normalized();
    EXPECT_LE(s.objective, (mwr * v).squaredNorm());
  }
}

TEST(LinearSolve, StackedGramMatchesRegularizer) {
  const Fixture f;
  const Eigen::MatrixXd mp = f.basis.right_multiply(assemble_data_rows(f.sc.mesh, f.sc.corr));
  const Eigen::MatrixXd mwr = stacked_system(mp, f.basis, 2.5);
  const Eigen::MatrixXd ap = Eigen::MatrixXd(f.reg.a_full) * f.basis.p_full();
  const Eigen::MatrixXd want = mp.transpose() * mp + 6.25 * ap.transpose() * ap;
  EXPECT_LE((mwr.transpose() * mwr - want).norm(), 1e-9 * want.norm());
}

TEST(LinearSolve, FixedPointUnderResolve) {
  const Fixture f;
  const LinearSolution a = f.solve();
  const LinearSolution b = f.solve();
  EXPECT_LE((a.c - b.c).norm(), 1e-10 * a.c.norm());
}

TEST(LinearSolve, EigenPathAgreesWithSvd) {
  const Fixture f;
  const LinearSolution a = f.solve(1.0, EigenMethod::dense_svd, true);
  const LinearSolution b = f.solve(1.0, EigenMethod::normal_eigen, true);
  EXPECT_LE((a.x - b.x).norm(), 1e-6 * a.x.norm());
  ASSERT_EQ(a.spectrum.size(), b.spectrum.size());
  EXPECT_NEAR(a.spectrum[a.spectrum.size() - 1], b.spectrum[b.spectrum.size() - 1],
              1e-8 * a.spectrum.maxCoeff());
}

TEST(LinearSolve, SpectrumHasNoZeros) {
  const Fixture f;
  const LinearSolution s = f.solve(1.0, EigenMethod::automatic, true);
  ASSERT_EQ(s.spectrum.size(), 75);
  EXPECT_TRUE(std::is_sorted(s.spectrum.data(), s.spectrum.data() + s.spectrum.size()));
  EXPECT_GT(s.spectrum[1], 1e-8 * s.spectrum.maxCoeff());
}

TEST(LinearSolve, RejectsNonPositiveWeight) {
  const Fixture f;
  try {
    f.solve(0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParamOutOfRange);
  }
}

TEST(LinearSolve, WarnsWhenFewCorrespondences) {
  const Fixture f(400.0, 10);
  int warnings = 0;
  const WarningHandler prev = set_warning_handler([&](const std::string&) { ++warnings; });
  f.solve();
  set_warning_handler(prev);
  EXPECT_EQ(warnings, 1);
}

TEST(Conditioning, UShapedCurve) {
  const Fixture f(200.0);
  const auto grid = log_grid(1.0 / 120.0, 120.0, 33);
  ASSERT_EQ(grid.size(), 33u);
  const auto rows = conditioning_report(assemble_data_rows(f.sc.mesh, f.sc.corr), f.basis, grid);
  ASSERT_EQ(rows.size(), 33u);
  const auto at = [&](double w) {
    return conditioning_report(assemble_data_rows(f.sc.mesh, f.sc.corr), f.basis, {w})[0].condition;
  };
  const double c1 = at(1.0);
  EXPECT_LT(c1, rows.front().condition);
  EXPECT_LT(c1, rows.back().condition);
  std::size_t best = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].condition < rows[best].condition) best = k;
    EXPECT_EQ(rows[k].spectrum.size(), 75);
  }
  EXPECT_GE(rows[best].w_r, 0.5);
  EXPECT_LE(rows[best].w_r, 20.0);
}

TEST(Conditioning, SmallWeightApproachesDataSpectrum) {
  const Fixture f;
  const RowSparseMatrix m = assemble_data_rows(f.sc.mesh, f.sc.corr);
  const Eigen::MatrixXd mp = f.basis.right_multiply(m);
  Eigen::VectorXd s0 = Eigen::JacobiSVD<Eigen::MatrixXd>(mp).singularValues().reverse();
  const auto rows = conditioning_report(m, f.basis, {1e-6});
  EXPECT_LE((rows[0].spectrum - s0).cwiseAbs().maxCoeff(), 1e-5 * s0.maxCoeff());
}

TEST(Conditioning, LogGrid) {
  const auto g = log_grid(0.01, 100.0, 5);
  EXPECT_DOUBLE_EQ(g.front(), 0.01);
  EXPECT_DOUBLE_EQ(g.back(), 100.0);
  EXPECT_NEAR(g[2], 1.0, 1e-12);
  EXPECT_THROW(log_grid(0.0, 1.0, 3), Error);
  EXPECT_THROW(conditioning_report(RowSparseMatrix(2, 3), ControlBasis{}, {}), Error);
}
