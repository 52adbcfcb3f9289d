// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lapmesh/lapmesh.hpp"
#include "oracles/oracles.hpp"

using namespace lapmesh;

namespace {

// tolerances and budgets
constexpr double kKernelTol = 1e-8;
constexpr double kRigidTol = 1e-8;
constexpr double kZeroSingularTol = 1e-8;
constexpr double kSpectrumAgreement = 0.02;
constexpr double kRankTol = 1e-6;
constexpr double kIdentityTol = 1e-12;
constexpr double kOracleTol = 1e-8;
constexpr double kCondLo = 0.5, kCondHi = 20.0;
constexpr double kRmsPx = 1.0;
constexpr double kRefinedVsLinear = 0.2;
constexpr double kDiameterFraction = 0.02;
constexpr int kAccuracyTrials = 100, kAccuracyNeeded = 95;
constexpr double kHighRate = 0.99, kLowRate = 0.2;
constexpr double kGradientTol = 1e-5;
constexpr double kPenetrationTol = 1e-6;
constexpr double kReconstructBudget = 0.5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget;  // seconds
  std::function<Outcome()> run;
};

double spectral_norm(const Eigen::MatrixXd& a) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
}

Eigen::VectorXd apply_affine(const Eigen::VectorXd& x, const Eigen::Matrix3d& l, const Vec3& t) {
  const int nv = static_cast<int>(x.size() / 3);
  Eigen::VectorXd out(x.size());
  for (int i = 0; i < nv; ++i) set_vertex(out, nv, i, l * vertex_at(x, nv, i) + t);
  return out;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  const Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-12);
}

synth::SheetSceneParams sheet(int n_inliers, double ratio, double noise, std::uint64_t seed) {
  synth::SheetSceneParams p;
  p.sample.n_inliers = n_inliers;
  p.sample.outlier_ratio = ratio;
  p.sample.noise_sigma = noise;
  p.sample.seed = seed;
  return p;
}

Outcome planar_kernel() {
  const TriMesh mesh = synth::grid_sheet();
  const Regularizer reg = build_planar(mesh, build_topology(mesh));
  const Eigen::MatrixXd a(reg.a_full);
  const double norm_a = spectral_norm(a);
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Eigen::Matrix3d l = Eigen::Matrix3d::NullaryExpr([&] { return u(rng); });
    const Vec3 t = 100.0 * Vec3::NullaryExpr([&] { return u(rng); });
    const Eigen::VectorXd x = apply_affine(mesh.coords(), l, t);
    worst = std::max(worst, (a * x).norm() / (norm_a * x.norm()));
  }
  return {worst <= kKernelTol, fmt::format("max |Ax|/(|A||x|) = {:.2e}, limit {:.0e}", worst, kKernelTol)};
}

Outcome rigid_invariance() {
  const TriMesh mesh = synth::half_cylinder();
  const Regularizer reg = build_nonplanar(mesh, build_topology(mesh));
  std::mt19937_64 rng(202);
  std::normal_distribution<double> n(0.0, 3.0);
  Eigen::VectorXd x = mesh.coords();
  x += Eigen::VectorXd::NullaryExpr(x.size(), [&] { return n(rng); });
  const double base = (reg.a_full * x).norm();
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Vec3 t = 50.0 * Vec3::NullaryExpr([&] { return n(rng); });
    const Eigen::VectorXd moved = apply_affine(x, random_rotation(rng), t);
    worst = std::max(worst, std::abs((reg.a_full * moved).norm() - base) / base);
  }
  return {worst <= kRigidTol, fmt::format("max relative change {:.2e}, limit {:.0e}", worst, kRigidTol)};
}

Outcome spectrum_shape() {
  const TriMesh mesh = synth::icosphere(2, 36.76);
  const Topology topo = build_topology(mesh);
  std::vector<Eigen::VectorXd> spectra;
  int zeros = 0;
  for (double sigma : {1.0, 2.0, 5.0}) {
    const Regularizer reg = build_nonplanar(mesh, topo, sigma);
    if (sigma == 1.0) {
      const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(reg.a_prime)).singularValues();
      for (Eigen::Index k = 0; k < s.size(); ++k) zeros += s[k] < kZeroSingularTol * s[0] ? 1 : 0;
    }
    spectra.push_back(normalized_spectrum(reg.a_prime));
  }
  const double d2 = (spectra[1] - spectra[0]).cwiseAbs().maxCoeff();
  const double d5 = (spectra[2] - spectra[0]).cwiseAbs().maxCoeff();
  const bool ok = zeros >= 4 && d2 <= kSpectrumAgreement && d5 <= kSpectrumAgreement;
  return {ok, fmt::format("{} near-zero singular values (need 4); spectrum gap sigma 2: {:.4f}, sigma 5: {:.4f}, "
                          "limit {}",
                          zeros, d2, d5, kSpectrumAgreement)};
}

Outcome m_rank_deficiency() {
  const synth::Scenario sc = synth::bent_sheet_scene(sheet(300, 0.0, 0.0, 11));
  const Eigen::MatrixXd m(assemble_M(sc.mesh, sc.corr));
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  const int nv = sc.mesh.num_vertices();
  int small = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) small += s[k] < kRankTol * s[0] ? 1 : 0;
  const double ratio_at_nv = s[s.size() - nv] / s[0];
  return {small >= nv, fmt::format("{} of {} singular values below {:.0e} x largest (need {}); "
                                   "{}th smallest ratio {:.2e}",
                                   small, m.cols(), kRankTol, nv, nv, ratio_at_nv)};
}

Outcome p_matrix() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  const std::vector<std::pair<TriMesh, int>> cases{{synth::grid_sheet(6, 5), 8},
                                                   {synth::half_cylinder(5, 5, 40.0, 80.0), 8},
                                                   {synth::sphere_patch(3, 8, 50.0, 0.8), 10}};
  double identity = 0.0, oracle = 0.0;
  for (const auto& [mesh, count] : cases) {
    const Topology topo = build_topology(mesh);
    const Regularizer reg = build_regularizer(mesh, topo, std::nullopt, 1.0);
    const ControlBasis b = build_P(reg, select_controls(mesh, ControlStrategy::regular, count));
    const Eigen::MatrixXd p = b.p_full();
    const int nv = b.num_vertices(), nc = b.num_controls();
    Eigen::MatrixXd pc(3 * nc, p.cols());
    for (int d = 0; d < 3; ++d) {
      for (int k = 0; k < nc; ++k) pc.row(d * nc + k) = p.row(d * nv + b.indices[k]);
    }
    identity = std::max(identity, (pc - Eigen::MatrixXd::Identity(3 * nc, 3 * nc)).cwiseAbs().maxCoeff());
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd c = Eigen::VectorXd::NullaryExpr(3 * nc, [&] { return u(rng); });
      oracle = std::max(oracle, rel_err(b.apply(c), oracles::kkt_constrained_lsq(reg.a_full, b.indices, c)));
    }
  }
  return {identity <= kIdentityTol && oracle <= kOracleTol,
          fmt::format("max |P_c P - I| = {:.2e} (limit {:.0e}); max oracle gap {:.2e} (limit {:.0e})", identity,
                      kIdentityTol, oracle, kOracleTol)};
}

Outcome conditioning() {
  const synth::Scenario sc = synth::bent_sheet_scene(sheet(300, 0.0, 1.0, 13));
  PipelineConfig cfg;
  const Pipeline pl(sc.mesh, cfg);
  const RowSparseMatrix m = assemble_data_rows(sc.mesh, sc.corr);
  const auto rows = conditioning_report(m, pl.basis(), log_grid(1.0 / 120.0, 120.0, 33));
  const double at1 = conditioning_report(m, pl.basis(), {1.0})[0].condition;
  const auto best = std::min_element(rows.begin(), rows.end(),
                                     [](const auto& a, const auto& b) { return a.condition < b.condition; });
  const bool ok = at1 < rows.front().condition && at1 < rows.back().condition && best->w_r >= kCondLo &&
                  best->w_r <= kCondHi;
  return {ok, fmt::format("cond(1/120) {:.3g}, cond(1) {:.3g}, cond(120) {:.3g}; minimum at w_r = {:.3g} "
                          "(need [{}, {}])",
                          rows.front().condition, at1, rows.back().condition, best->w_r, kCondLo, kCondHi)};
}

Outcome linear_vs_refined() {
  synth::Scenario sc = synth::bent_sheet_scene(sheet(300, 0.0, 0.0, 17));
  PipelineConfig cfg;
  cfg.robust = false;
  const Pipeline pl(sc.mesh, cfg);
  const ReconstructResult r = pl.run(sc.corr);
  const synth::Metrics lin = synth::evaluate(r.linear.x, sc);
  const synth::Metrics ref = synth::evaluate(r.x, sc);
  const bool ok = r.refined && r.refined->status == RefineStatus::converged && lin.reprojection_rms <= kRmsPx &&
                  ref.reprojection_rms <= kRmsPx && ref.mean_error_3d <= kRefinedVsLinear * lin.mean_error_3d;
  return {ok, fmt::format("RMS linear {:.3f} px, refined {:.3f} px; 3D error linear {:.3f}, refined {:.3f} "
                          "(ratio {:.3f}, limit {})",
                          lin.reprojection_rms, ref.reprojection_rms, lin.mean_error_3d, ref.mean_error_3d,
                          ref.mean_error_3d / lin.mean_error_3d, kRefinedVsLinear)};
}

Outcome end_to_end() {
  const PipelineConfig cfg;
  std::optional<Pipeline> pl;
  int good = 0, successes = 0;
  double worst = 0.0, total = 0.0, diameter = 0.0;
  for (int t = 0; t < kAccuracyTrials; ++t) {
    // 240 inliers + 60 outliers = 300 correspondences
    synth::Scenario sc = synth::bent_sheet_scene(sheet(240, 0.2, 1.0, synth::splitmix64(1000 + t)));
    if (!pl) {
      pl.emplace(sc.mesh, cfg);
      diameter = synth::mesh_diameter(sc.mesh);
    }
    bool ok = false;
    try {
      const ReconstructResult r = pl->run(sc.corr);
      const synth::Metrics m = synth::evaluate(r.x, sc);
      worst = std::max(worst, m.mean_error_3d);
      total += m.mean_error_3d;
      successes += m.success ? 1 : 0;
      ok = m.success && m.mean_error_3d <= kDiameterFraction * diameter;
    } catch (const Error&) {
      worst = std::numeric_limits<double>::infinity();
    }
    good += ok ? 1 : 0;
  }
  return {good >= kAccuracyNeeded,
          fmt::format("{} of {} trials succeed with 3D error <= {:.3g} (2% of diameter {:.1f}); "
                      "successes {}, mean error {:.3f}, worst {:.3f}",
                      good, kAccuracyTrials, kDiameterFraction * diameter, diameter, successes,
                      total / kAccuracyTrials, worst)};
}

Outcome robustness_grid() {
  const synth::SweepGrid grid;  // {10,50,100,200,400} x {0,.2,.4,.6,.8} x 50
  const auto cells = robustness_sweep({}, grid, PipelineConfig{}, 0);
  const auto cell = [&](int n, double r) -> const synth::SweepCell& {
    return *std::find_if(cells.begin(), cells.end(), [&](const synth::SweepCell& c) {
      return c.n_inliers == n && std::abs(c.outlier_ratio - r) < 1e-9;
    });
  };
  bool ok = true;
  std::string table;
  for (int n : grid.inliers) {
    table += fmt::format(" {}:", n);
    for (double r : grid.ratios) table += fmt::format(" {:.2f}", cell(n, r).success_rate);
    for (std::size_t i = 0; i < grid.ratios.size(); ++i) {
      for (std::size_t j = i + 1; j < grid.ratios.size(); ++j) {
        const auto& a = cell(n, grid.ratios[i]);
        const auto& b = cell(n, grid.ratios[j]);
        if (synth::significant_increase(a.successes, a.trials, b.successes, b.trials)) {
          ok = false;
          table += fmt::format(" [increase {}->{}]", grid.ratios[i], grid.ratios[j]);
        }
      }
    }
  }
  for (double r : {0.0, 0.2, 0.4}) ok = ok && cell(200, r).success_rate >= kHighRate;
  ok = ok && cell(10, 0.8).success_rate <= kLowRate;
  return {ok, "success rates by inliers over ratios" + table};
}

Outcome gradient_checks() {
  synth::Scenario sc = synth::bent_sheet_scene(sheet(120, 0.0, 0.0, 19));
  PipelineConfig cfg;
  cfg.robust = false;
  cfg.refine = false;
  const Pipeline pl(sc.mesh, cfg);
  const Eigen::MatrixXd mp = pl.basis().right_multiply(assemble_data_rows(sc.mesh, sc.corr));
  const RefineProblem p(mp, pl.basis(), pl.topology(), 1.3);
  const Eigen::VectorXd c_ref = pl.basis().restrict(sc.gt);
  const double scale = c_ref.cwiseAbs().maxCoeff();
  const double h = 1e-6 * scale;
  const Cylinder cyl{Vec3(0, 0, 700), Vec3(0.1, 1.0, 0.05).normalized(), 40.0};
  const Line3 line{Vec3(10, -5, 590), Vec3(1.0, 0.2, 0.3).normalized()};
  const int n = p.num_coords(), ne = p.num_edges(), nv = p.num_vertices();

  std::mt19937_64 rng(1010);
  std::normal_distribution<double> jitter(0.0, 0.05 * scale);
  std::uniform_real_distribution<double> slack(-5.0, 5.0);
  double worst = 0.0;
  const auto check = [&](const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
    worst = std::max(worst, rel_err(analytic, numeric));
  };
  using oracles::finite_difference_gradient;
  using oracles::finite_difference_jacobian;
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd c = c_ref + Eigen::VectorXd::NullaryExpr(n, [&] { return jitter(rng); });
    const Eigen::VectorXd se = Eigen::VectorXd::NullaryExpr(ne, [&] { return slack(rng); });
    const Eigen::VectorXd so = Eigen::VectorXd::NullaryExpr(nv, [&] { return slack(rng); });
    check(p.data_gradient(c), finite_difference_gradient([&](const Eigen::VectorXd& v) { return p.data_term(v); }, c, h));
    check(p.regularization_gradient(c),
          finite_difference_gradient([&](const Eigen::VectorXd& v) { return p.regularization_term(v); }, c, h));
    check(p.slack_gradient(se, 0.4),
          finite_difference_gradient([&](const Eigen::VectorXd& v) { return p.slack_term(v, 0.4); }, se, 1e-6));
    check(p.edge_residual_jacobian(c),
          finite_difference_jacobian([&](const Eigen::VectorXd& v) { return p.edge_residuals(v); }, c, h));
    Eigen::VectorXd ze(n + ne);
    ze << c, se;
    check(p.edge_constraint_jacobian(c, se),
          finite_difference_jacobian(
              [&](const Eigen::VectorXd& v) { return p.edge_constraints(v.head(n), v.tail(ne)); }, ze, h));
    check(p.edge_penalty_gradient(c, 0.7),
          finite_difference_gradient([&](const Eigen::VectorXd& v) { return p.edge_penalty(v, 0.7); }, c, h));
    check(p.trajectory_gradient(c, line, 2.0),
          finite_difference_gradient([&](const Eigen::VectorXd& v) { return p.trajectory_term(v, line, 2.0); }, c, h));
    check(p.obstacle_residual_jacobian(c, cyl),
          finite_difference_jacobian([&](const Eigen::VectorXd& v) { return p.obstacle_residuals(v, cyl); }, c, h));
    Eigen::VectorXd zo(n + nv);
    zo << c, so;
    check(p.obstacle_constraint_jacobian(c, so, cyl),
          finite_difference_jacobian(
              [&](const Eigen::VectorXd& v) { return p.obstacle_constraints(v.head(n), v.tail(nv), cyl); }, zo, h));
  }
  return {worst <= kGradientTol, fmt::format("9 terms x 20 iterates, max relative gap {:.2e}, limit {:.0e}", worst,
                                             kGradientTol)};
}

Outcome ball() {
  const synth::BallScene scene = synth::ball_scene({});
  PipelineConfig cfg;
  cfg.control_count = kBallControlCount;
  const Pipeline pl(scene.mesh, cfg);
  std::vector<CorrespondenceSet> frames;
  for (const auto& f : scene.frames) frames.push_back(f.scene.corr);
  BallRunConfig rc;
  rc.obstacle = scene.bat;
  const BallRunResult r = run_ball(pl, frames, rc);
  const double diameter = synth::BallSceneParams{}.diameter;
  const double pen = r.frames.back().max_penetration;
  const double err = synth::evaluate(r.frames.back().recon.x, scene.frames.back().scene).mean_error_3d;
  const bool ok = pen <= kPenetrationTol * scene.bat.radius && err <= kDiameterFraction * diameter;
  return {ok, fmt::format("penetration {:.2e} (limit {:.2e}); impact 3D error {:.3f} = {:.2f}% of diameter "
                          "(limit 2%)",
                          pen, kPenetrationTol * scene.bat.radius, err, 100.0 * err / diameter)};
}

Outcome performance() {
  std::vector<double> times;
  bool ok = true;
  for (int t = 0; t < 5; ++t) {
    synth::Scenario sc = synth::bent_sheet_scene(sheet(240, 0.2, 1.0, 2000 + t));
    const auto start = std::chrono::steady_clock::now();
    const Pipeline pl(sc.mesh, PipelineConfig{});
    const ReconstructResult r = pl.run(sc.corr);
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    ok = ok && r.refined.has_value() && pl.basis().num_controls() == 25;
  }
  std::sort(times.begin(), times.end());
  const double median = times[times.size() / 2];
  return {ok && median <= kReconstructBudget,
          fmt::format("median {:.3f} s, slowest {:.3f} s over 5 runs (budget {} s, single thread)", median,
                      times.back(), kReconstructBudget)};
}

}  // namespace

int main(int argc, char** argv) {
  set_warning_handler([](const std::string&) {});
  setenv("LAPMESH_THREADS", "1", 1);

  const std::vector<Criterion> criteria{
      {1, "planar regularizer kernel", 1.0, planar_kernel},
      {2, "non-planar rigid invariance", 5.0, rigid_invariance},
      {3, "non-planar spectrum shape", 10.0, spectrum_shape},
      {4, "projection matrix rank deficiency", 10.0, m_rank_deficiency},
      {5, "control basis correctness", 10.0, p_matrix},
      {6, "conditioning sweep", 60.0, conditioning},
      {7, "linear vs refined on a bent sheet", 30.0, linear_vs_refined},
      {8, "end-to-end accuracy", 600.0, end_to_end},
      {9, "robustness grid shape", 1800.0, robustness_grid},
      {10, "refine gradient checks", 60.0, gradient_checks},
      {11, "ball impact", 120.0, ball},
      {12, "reconstruct time budget", 1e9, performance},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    const std::string budget = c.budget < 1e8 ? fmt::format(", budget {:g} s", c.budget) : "";
    std::cout << fmt::format("criterion {:2d} {}: {} ({}; {:.2f} s{}{})", c.id, c.name, pass ? "PASS" : "FAIL",
                             o.detail, secs, budget, in_time ? "" : ", over budget")
              << std::endl;
  }
  std::cout << fmt::format("{} criteria failed", failed) << std::endl;
  return failed == 0 ? 0 : 1;
}
