#include "lapmesh/refine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lapmesh/error.hpp"

namespace lapmesh {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(RefineStatus s) {
  switch (s) {
    case RefineStatus::converged: return "converged";
    case RefineStatus::max_iterations: return "max_iterations";
  }
  return "unknown";
}

double default_slack_weight(double w_r) { return 0.3 * w_r; }

double resolved_slack_weight(const RefineConfig& cfg) {
  return cfg.slack_weight > 0.0 ? cfg.slack_weight : default_slack_weight(cfg.w_r);
}

namespace {

Eigen::Matrix3d axis_projector(const Vec3& direction) {
  const Vec3 u = direction.normalized();
  return Eigen::Matrix3d::Identity() - u * u.transpose();
}

}  // namespace

RefineProblem::RefineProblem(MatrixXd mp, const ControlBasis& basis, const Topology& topo, double w_r)
    : mp_(std::move(mp)), p_(basis.p_prime), r_(basis.ap_factor), w_r_(w_r) {
  const int nc = basis.num_controls();
  if (mp_.cols() != 3 * nc) {
    throw Error(ErrorCode::InvalidArgument, "reprojection rows do not match the control basis");
  }
  const int ne = topo.num_edges();
  diff_.resize(ne, nc);
  rest_.resize(ne);
  for (int e = 0; e < ne; ++e) {
    diff_.row(e) = p_.row(topo.edges[e].a) - p_.row(topo.edges[e].b);
    rest_[e] = topo.ref_edge_lengths[e];
  }
  mean_row_ = p_.colwise().mean();
  q_ = mp_.transpose() * mp_ + w_r_ * w_r_ * regularization_quadratic();
}

MatrixXd RefineProblem::regularization_quadratic() const {
  const int nc = num_controls();
  const MatrixXd rtr = r_.transpose() * r_;
  MatrixXd out = MatrixXd::Zero(3 * nc, 3 * nc);
  for (int d = 0; d < 3; ++d) out.block(d * nc, d * nc, nc, nc) = rtr;
  return out;
}

VectorXd RefineProblem::coords(const VectorXd& c) const {
  const int nv = num_vertices(), nc = num_controls();
  VectorXd x(3 * nv);
  for (int d = 0; d < 3; ++d) x.segment(d * nv, nv) = p_ * c.segment(d * nc, nc);
  return x;
}

double RefineProblem::data_term(const VectorXd& c) const { return (mp_ * c).squaredNorm(); }

VectorXd RefineProblem::data_gradient(const VectorXd& c) const {
  return 2.0 * (mp_.transpose() * (mp_ * c));
}

double RefineProblem::regularization_term(const VectorXd& c) const {
  const int nc = num_controls();
  double sum = 0.0;
  for (int d = 0; d < 3; ++d) sum += (r_ * c.segment(d * nc, nc)).squaredNorm();
  return w_r_ * w_r_ * sum;
}

VectorXd RefineProblem::regularization_gradient(const VectorXd& c) const {
  const int nc = num_controls();
  VectorXd g(3 * nc);
  for (int d = 0; d < 3; ++d) {
    g.segment(d * nc, nc) = 2.0 * w_r_ * w_r_ * (r_.transpose() * (r_ * c.segment(d * nc, nc)));
  }
  return g;
}

double RefineProblem::slack_term(const VectorXd& s, double w_s) const {
  return w_s * w_s * s.squaredNorm();
}

VectorXd RefineProblem::slack_gradient(const VectorXd& s, double w_s) const {
  return 2.0 * w_s * w_s * s;
}

VectorXd RefineProblem::edge_residuals(const VectorXd& c) const {
  const int nc = num_controls();
  VectorXd sq = VectorXd::Zero(num_edges());
  for (int d = 0; d < 3; ++d) sq += (diff_ * c.segment(d * nc, nc)).cwiseAbs2();
  return sq - rest_.cwiseAbs2();
}

MatrixXd RefineProblem::edge_residual_jacobian(const VectorXd& c) const {
  const int nc = num_controls();
  MatrixXd j(num_edges(), 3 * nc);
  for (int d = 0; d < 3; ++d) {
    const VectorXd delta = diff_ * c.segment(d * nc, nc);
    j.middleCols(d * nc, nc) = 2.0 * delta.asDiagonal() * diff_;
  }
  return j;
}

VectorXd RefineProblem::edge_constraints(const VectorXd& c, const VectorXd& s) const {
  return edge_residuals(c) + s.cwiseAbs2();
}

MatrixXd RefineProblem::edge_constraint_jacobian(const VectorXd& c, const VectorXd& s) const {
  const int ne = num_edges(), n = num_coords();
  MatrixXd j = MatrixXd::Zero(ne, n + ne);
  j.leftCols(n) = edge_residual_jacobian(c);
  j.rightCols(ne) = (2.0 * s).asDiagonal();
  return j;
}

VectorXd RefineProblem::edge_lengths(const VectorXd& c) const {
  return (edge_residuals(c) + rest_.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
}

double RefineProblem::edge_penalty(const VectorXd& c, double w_l) const {
  return w_l * w_l * (edge_lengths(c) - rest_).squaredNorm();
}

VectorXd RefineProblem::edge_penalty_gradient(const VectorXd& c, double w_l) const {
  const VectorXd len = edge_lengths(c);
  // d(len)/dc = J_a / (2 len)
  const VectorXd coef = (w_l * w_l) * (len - rest_).cwiseQuotient(len.cwiseMax(1e-300));
  return edge_residual_jacobian(c).transpose() * coef;
}

MatrixXd RefineProblem::trajectory_jacobian(const Line3& line) const {
  const int nc = num_controls();
  MatrixXd jc = MatrixXd::Zero(3, 3 * nc);
  for (int d = 0; d < 3; ++d) jc.block(d, d * nc, 1, nc) = mean_row_;
  return axis_projector(line.direction) * jc;
}

double RefineProblem::trajectory_term(const VectorXd& c, const Line3& line, double w_t) const {
  const VectorXd r = trajectory_jacobian(line) * c - axis_projector(line.direction) * line.point;
  return w_t * w_t * r.squaredNorm();
}

VectorXd RefineProblem::trajectory_gradient(const VectorXd& c, const Line3& line, double w_t) const {
  const MatrixXd j = trajectory_jacobian(line);
  const VectorXd r = j * c - axis_projector(line.direction) * line.point;
  return 2.0 * w_t * w_t * (j.transpose() * r);
}

VectorXd RefineProblem::obstacle_residuals(const VectorXd& c, const Cylinder& cyl) const {
  const int nv = num_vertices();
  const VectorXd x = coords(c);
  const Eigen::Matrix3d proj = axis_projector(cyl.direction);
  VectorXd out(nv);
  for (int i = 0; i < nv; ++i) {
    out[i] = (proj * (vertex_at(x, nv, i) - cyl.point)).squaredNorm() - cyl.radius * cyl.radius;
  }
  return out;
}

MatrixXd RefineProblem::obstacle_residual_jacobian(const VectorXd& c, const Cylinder& cyl) const {
  const int nv = num_vertices(), nc = num_controls();
  const VectorXd x = coords(c);
  const Eigen::Matrix3d proj = axis_projector(cyl.direction);
  MatrixXd q(nv, 3);
  for (int i = 0; i < nv; ++i) q.row(i) = (proj * (vertex_at(x, nv, i) - cyl.point)).transpose();
  MatrixXd j(nv, 3 * nc);
  for (int d = 0; d < 3; ++d) j.middleCols(d * nc, nc) = 2.0 * q.col(d).asDiagonal() * p_;
  return j;
}

VectorXd RefineProblem::obstacle_constraints(const VectorXd& c, const VectorXd& s,
                                             const Cylinder& cyl) const {
  return obstacle_residuals(c, cyl) - s.cwiseAbs2();
}

MatrixXd RefineProblem::obstacle_constraint_jacobian(const VectorXd& c, const VectorXd& s,
                                                     const Cylinder& cyl) const {
  const int nv = num_vertices(), n = num_coords();
  MatrixXd j = MatrixXd::Zero(nv, n + nv);
  j.leftCols(n) = obstacle_residual_jacobian(c, cyl);
  j.rightCols(nv) = (-2.0 * s).asDiagonal();
  return j;
}

namespace {

// One family of constraints a_i(c) + sign * t_i = 0 with t_i = s_i^2 >= 0 and
// cost weight * t_i. The slacks are minimized out in closed form, which
// leaves a once-differentiable merit in c alone.
struct ConstraintBlock {
  std::function<VectorXd(const VectorXd&)> residual;
  std::function<MatrixXd(const VectorXd&)> jacobian;
  std::function<MatrixXd(const VectorXd&)> curvature;  // sum kappa_i * Hess(a_i)
  std::function<double(const VectorXd&)> violation;   // feasibility measure of c
  double sign = 1.0;
  double weight = 0.0;
  VectorXd scale;   // per-constraint normalization of residuals
  VectorXd lambda;
  double mu = 1.0;

  VectorXd slack_sq(const VectorXd& a) const {
    VectorXd t(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      t[i] = std::max(0.0, -sign * a[i] - (weight + sign * lambda[i]) / mu);
    }
    return t;
  }

  double merit(const VectorXd& a) const {
    const VectorXd t = slack_sq(a);
    const VectorXd r = a + sign * t;
    return weight * t.sum() + lambda.dot(r) + 0.5 * mu * r.squaredNorm();
  }
};

struct SoftTerm {
  std::function<double(const VectorXd&)> value;
  std::function<void(const VectorXd&, VectorXd&, MatrixXd&)> add_derivatives;
};

struct AlProblem {
  const MatrixXd* q = nullptr;
  std::vector<SoftTerm> soft;
  std::vector<ConstraintBlock> blocks;

  // merit without the quadratic part
  double merit_rest(const VectorXd& c) const {
    double m = 0.0;
    for (const auto& s : soft) m += s.value(c);
    for (const auto& b : blocks) m += b.merit(b.residual(c));
    return m;
  }

  double merit(const VectorXd& c) const { return c.dot(*q * c) + merit_rest(c); }

  // merit(c + step) - merit(c), with the quadratic part expanded so that large
  // coordinates do not swamp small changes
  double merit_change(const VectorXd& c, const VectorXd& step, double rest_at_c) const {
    const VectorXd qs = *q * step;
    return step.dot(2.0 * (*q * c) + qs) + (merit_rest(c + step) - rest_at_c);
  }

  double evaluate(const VectorXd& c, VectorXd& g, MatrixXd& h) const {
    g = 2.0 * (*q * c);
    h = 2.0 * *q;
    double m = c.dot(*q * c);
    for (const auto& s : soft) {
      m += s.value(c);
      s.add_derivatives(c, g, h);
    }
    for (const auto& b : blocks) {
      const VectorXd a = b.residual(c);
      const VectorXd t = b.slack_sq(a);
      const VectorXd r = a + b.sign * t;
      m += b.weight * t.sum() + b.lambda.dot(r) + 0.5 * b.mu * r.squaredNorm();
      const VectorXd dpsi = b.lambda + b.mu * r;
      const MatrixXd j = b.jacobian(c);
      g.noalias() += j.transpose() * dpsi;
      VectorXd active(a.size());
      for (Eigen::Index i = 0; i < a.size(); ++i) active[i] = t[i] == 0.0 ? b.mu : 0.0;
      h.noalias() += j.transpose() * active.asDiagonal() * j;
      h += b.curvature(dpsi.cwiseMax(0.0));
    }
    return m;
  }
};

struct InnerStats {
  int steps = 0;
  bool converged = false;
};

InnerStats minimize_inner(const AlProblem& prob, VectorXd& c, const RefineConfig& cfg,
                          std::vector<double>& trace) {
  InnerStats stats;
  VectorXd g;
  MatrixXd h;
  double phi = prob.evaluate(c, g, h);
  double rest = prob.merit_rest(c);
  double level = phi;
  double nu = 1e-6;
  for (int it = 0; it < cfg.max_inner_iterations; ++it) {
    const double hscale = std::max(h.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    bool accepted = false;
    VectorXd step;
    double change = 0.0;
    for (int tries = 0; tries < 60; ++tries) {
      MatrixXd hd = h;
      hd.diagonal().array() += nu * (h.diagonal().cwiseAbs().array() + 1e-9 * hscale);
      step = hd.ldlt().solve(-g);
      if (!step.allFinite()) {
        nu *= 10.0;
        continue;
      }
      change = prob.merit_change(c, step, rest);
      if (change <= 0.0) {
        accepted = true;
        break;
      }
      nu *= 4.0;
    }
    if (!accepted) {
      stats.converged = true;  // no descent direction left at this damping
      break;
    }
    c += step;
    ++stats.steps;
    nu = std::max(nu / 3.0, 1e-12);
    // a tiny step under heavy damping is not convergence
    const bool small_step = step.norm() <= cfg.step_tolerance * (1.0 + c.norm()) && nu <= 1e-4;
    const bool flat = -change <= 1e-15 * std::abs(phi);
    phi = prob.evaluate(c, g, h);
    rest = prob.merit_rest(c);
    level += change;
    trace.push_back(level);
    if (small_step || flat) {
      stats.converged = true;
      break;
    }
  }
  return stats;
}

double initial_mu(const MatrixXd& q, const MatrixXd& jac) {
  const double qscale = 2.0 * q.trace() / std::max<Eigen::Index>(q.rows(), 1);
  const double jscale = jac.rows() > 0 ? jac.rowwise().squaredNorm().mean() : 0.0;
  if (!(jscale > 0.0)) return 1.0;
  return std::max(qscale, 1e-12) / jscale;
}

struct OuterResult {
  RefineStatus status = RefineStatus::max_iterations;
  int iterations = 0;
  int inner = 0;
  double violation = 0.0;
};

OuterResult run_augmented_lagrangian(AlProblem& prob, VectorXd& c, const RefineConfig& cfg,
                                     std::vector<std::vector<double>>& trace) {
  OuterResult out;
  std::vector<double> prev_residual(prob.blocks.size(), std::numeric_limits<double>::infinity());
  std::vector<double> mu0;
  for (const auto& b : prob.blocks) mu0.push_back(b.mu);
  for (int outer = 0; outer < cfg.max_iterations; ++outer) {
    trace.emplace_back();
    const InnerStats inner = minimize_inner(prob, c, cfg, trace.back());
    out.inner += inner.steps;
    out.iterations = outer + 1;

    double worst_residual = 0.0;
    double worst_violation = 0.0;
    for (std::size_t k = 0; k < prob.blocks.size(); ++k) {
      auto& b = prob.blocks[k];
      const VectorXd a = b.residual(c);
      const VectorXd r = a + b.sign * b.slack_sq(a);
      const double res = r.cwiseQuotient(b.scale).cwiseAbs().maxCoeff();
      worst_residual = std::max(worst_residual, res);
      worst_violation = std::max(worst_violation, b.violation(c));
      b.lambda += b.mu * r;
      if (res > 0.25 * prev_residual[k]) b.mu = std::min(b.mu * 10.0, 1e12 * mu0[k]);
      prev_residual[k] = res;
    }
    out.violation = worst_violation;
    if (prob.blocks.empty() ||
        (inner.converged && worst_violation <= cfg.violation_tolerance &&
         worst_residual <= cfg.violation_tolerance)) {
      out.status = RefineStatus::converged;
      break;
    }
  }
  return out;
}

void check_config(const RefineConfig& cfg) {
  if (!(cfg.w_r > 0.0) || cfg.max_iterations < 1 || cfg.max_inner_iterations < 1 ||
      !(cfg.step_tolerance > 0.0) || !(cfg.violation_tolerance > 0.0)) {
    throw Error(ErrorCode::ParamOutOfRange,
                "refinement needs positive w_r, iteration caps and tolerances");
  }
}

}  // namespace

RefineResult refine_constrained(const VectorXd& c0, const MatrixXd& mp, const ControlBasis& basis,
                                const Topology& topo, const RefineConfig& cfg) {
  check_config(cfg);
  const double w_s = resolved_slack_weight(cfg);
  const RefineProblem problem(mp, basis, topo, cfg.w_r);
  if (c0.size() != problem.num_coords()) {
    throw Error(ErrorCode::InvalidArgument, "initial controls have the wrong size");
  }
  const int nc = problem.num_controls();
  const MatrixXd& diff = problem.edge_differences();
  const VectorXd rest_sq = problem.rest_lengths().cwiseAbs2();

  AlProblem prob;
  prob.q = &problem.quadratic();
  ConstraintBlock edges;
  edges.sign = 1.0;
  edges.weight = w_s * w_s;
  edges.scale = rest_sq;
  edges.lambda = VectorXd::Zero(problem.num_edges());
  edges.residual = [&](const VectorXd& c) { return problem.edge_residuals(c); };
  edges.jacobian = [&](const VectorXd& c) { return problem.edge_residual_jacobian(c); };
  edges.curvature = [&, nc](const VectorXd& kappa) {
    const MatrixXd block = 2.0 * diff.transpose() * kappa.asDiagonal() * diff;
    MatrixXd h = MatrixXd::Zero(3 * nc, 3 * nc);
    for (int d = 0; d < 3; ++d) h.block(d * nc, d * nc, nc, nc) = block;
    return h;
  };
  edges.violation = [&](const VectorXd& c) {
    const VectorXd stretch = problem.edge_lengths(c).cwiseQuotient(problem.rest_lengths());
    return std::max(0.0, stretch.maxCoeff() - 1.0);
  };
  edges.mu = initial_mu(problem.quadratic(), problem.edge_residual_jacobian(c0));
  prob.blocks.push_back(std::move(edges));

  VectorXd c = c0;
  RefineResult result;
  const OuterResult run = run_augmented_lagrangian(prob, c, cfg, result.merit_trace);

  const VectorXd a = problem.edge_residuals(c);
  result.c = c;
  result.x = problem.coords(c);
  result.slack = (-a).cwiseMax(0.0).cwiseSqrt();
  result.status = run.status;
  result.iterations = run.iterations;
  result.inner_iterations = run.inner;
  result.max_violation = run.violation;
  result.objective = problem.data_term(c) + problem.regularization_term(c) +
                     problem.slack_term(result.slack, w_s);
  return result;
}

RefineResult refine_ball(const VectorXd& c0, const MatrixXd& mp, const ControlBasis& basis,
                         const Topology& topo, const RefineConfig& cfg, const BallConfig& ball) {
  check_config(cfg);
  if (!(ball.obstacle.radius > 0.0) || ball.w_l < 0.0 || ball.w_t < 0.0 ||
      !(ball.obstacle.direction.norm() > 0.0) || !(ball.trajectory.direction.norm() > 0.0)) {
    throw Error(ErrorCode::ParamOutOfRange,
                "ball refinement needs a positive radius, non-negative weights and non-zero directions");
  }
  const RefineProblem problem(mp, basis, topo, cfg.w_r);
  if (c0.size() != problem.num_coords()) {
    throw Error(ErrorCode::InvalidArgument, "initial controls have the wrong size");
  }
  const int nc = problem.num_controls();
  const Cylinder cyl{ball.obstacle.point, ball.obstacle.direction.normalized(), ball.obstacle.radius};
  const Line3 line{ball.trajectory.point, ball.trajectory.direction.normalized()};
  const Eigen::Matrix3d proj = axis_projector(cyl.direction);
  const MatrixXd& pp = problem.p_prime();

  AlProblem prob;
  prob.q = &problem.quadratic();

  if (ball.w_l > 0.0) {
    prob.soft.push_back(SoftTerm{
        [&](const VectorXd& c) { return problem.edge_penalty(c, ball.w_l); },
        [&](const VectorXd& c, VectorXd& g, MatrixXd& h) {
          const VectorXd len = problem.edge_lengths(c).cwiseMax(1e-300);
          const MatrixXd jd = 0.5 * len.cwiseInverse().asDiagonal() * problem.edge_residual_jacobian(c);
          const double w2 = ball.w_l * ball.w_l;
          g.noalias() += 2.0 * w2 * (jd.transpose() * (len - problem.rest_lengths()));
          h.noalias() += 2.0 * w2 * (jd.transpose() * jd);
        }});
  }
  if (ball.w_t > 0.0) {
    const MatrixXd jt = problem.trajectory_jacobian(line);
    prob.soft.push_back(SoftTerm{
        [&](const VectorXd& c) { return problem.trajectory_term(c, line, ball.w_t); },
        [&, jt](const VectorXd& c, VectorXd& g, MatrixXd& h) {
          g += problem.trajectory_gradient(c, line, ball.w_t);
          h.noalias() += 2.0 * ball.w_t * ball.w_t * (jt.transpose() * jt);
        }});
  }

  ConstraintBlock obstacle;
  obstacle.sign = -1.0;
  obstacle.weight = 0.0;
  obstacle.scale = VectorXd::Constant(problem.num_vertices(), cyl.radius * cyl.radius);
  obstacle.lambda = VectorXd::Zero(problem.num_vertices());
  obstacle.residual = [&](const VectorXd& c) { return problem.obstacle_residuals(c, cyl); };
  obstacle.jacobian = [&](const VectorXd& c) { return problem.obstacle_residual_jacobian(c, cyl); };
  obstacle.curvature = [&, nc](const VectorXd& kappa) {
    const MatrixXd block = 2.0 * pp.transpose() * kappa.asDiagonal() * pp;
    MatrixXd h = MatrixXd::Zero(3 * nc, 3 * nc);
    for (int d = 0; d < 3; ++d) {
      for (int e = 0; e < 3; ++e) h.block(d * nc, e * nc, nc, nc) = proj(d, e) * block;
    }
    return h;
  };
  obstacle.violation = [&](const VectorXd& c) {
    const VectorXd a = problem.obstacle_residuals(c, cyl);
    const VectorXd rho = (a.array() + cyl.radius * cyl.radius).max(0.0).sqrt();
    return std::max(0.0, (cyl.radius - rho.minCoeff()) / cyl.radius);
  };
  obstacle.mu = initial_mu(problem.quadratic(), problem.obstacle_residual_jacobian(c0, cyl));
  prob.blocks.push_back(std::move(obstacle));

  VectorXd c = c0;
  RefineResult result;
  const OuterResult run = run_augmented_lagrangian(prob, c, cfg, result.merit_trace);

  result.c = c;
  result.x = problem.coords(c);
  result.slack = problem.obstacle_residuals(c, cyl).cwiseMax(0.0).cwiseSqrt();
  result.status = run.status;
  result.iterations = run.iterations;
  result.inner_iterations = run.inner;
  result.max_violation = run.violation;
  result.objective = problem.data_term(c) + problem.regularization_term(c) +
                     problem.edge_penalty(c, ball.w_l) + problem.trajectory_term(c, line, ball.w_t);
  return result;
}

Line3 fit_trajectory(const std::vector<Vec3>& centroids) {
  if (centroids.size() < 2) {
    throw Error(ErrorCode::DegenerateInput, "a trajectory needs at least two points");
  }
  Vec3 mean = Vec3::Zero();
  for (const auto& p : centroids) mean += p;
  mean /= static_cast<double>(centroids.size());
  Eigen::MatrixX3d centered(centroids.size(), 3);
  double extent = 0.0;
  for (std::size_t k = 0; k < centroids.size(); ++k) {
    centered.row(k) = (centroids[k] - mean).transpose();
    extent = std::max(extent, centered.row(k).norm());
  }
  const double scale = std::max(mean.norm(), 1.0);
  if (!(extent > 1e-12 * scale)) {
    throw Error(ErrorCode::DegenerateInput, "trajectory points are all coincident");
  }
  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(centered, Eigen::ComputeFullV);
  Vec3 dir = svd.matrixV().col(0);
  if (dir.dot(centroids.back() - centroids.front()) < 0.0) dir = -dir;
  return {mean, dir.normalized()};
}

double distance_to_line(const Vec3& p, const Line3& line) {
  return (axis_projector(line.direction) * (p - line.point)).norm();
}

}  // namespace lapmesh
