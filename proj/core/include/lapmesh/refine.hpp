#pragma once

#include <vector>

#include <Eigen/Core>

#include "lapmesh/controls.hpp"
#include "lapmesh/mesh.hpp"
#include "lapmesh/projection.hpp"

namespace lapmesh {

struct Line3 {
  Vec3 point = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();  // unit length
};

struct Cylinder {
  Vec3 point = Vec3::Zero();       // on the axis
  Vec3 direction = Vec3::UnitY();  // unit length
  double radius = 1.0;
};

struct RefineConfig {
  double w_r = 1.0;
  /// Weight on the slack norm; zero or negative means default_slack_weight(w_r).
  double slack_weight = 0.0;
  int max_iterations = 50;        // outer multiplier updates
  int max_inner_iterations = 100; // damped Gauss-Newton steps per outer pass
  double step_tolerance = 1e-8;   // relative to 1 + ||c||
  double violation_tolerance = 1e-7;  // relative (length / radius)
};

struct BallConfig {
  double w_l = 0.0;  // edge-length penalty
  double w_t = 0.0;  // trajectory penalty
  Cylinder obstacle;
  Line3 trajectory;
};

enum class RefineStatus { converged, max_iterations };

const char* to_string(RefineStatus s);

struct RefineResult {
  Eigen::VectorXd c;
  Eigen::VectorXd x;
  Eigen::VectorXd slack;   // one per constraint
  RefineStatus status = RefineStatus::max_iterations;
  int iterations = 0;      // outer
  int inner_iterations = 0;
  double objective = 0.0;  // value of the refined objective (slacks included)
  double max_violation = 0.0;  // relative stretch (edges) or penetration (obstacle)
  /// Merit after every accepted step, one list per outer iteration. Entries
  /// start from the merit at the outer iterate and add the exact step changes.
  std::vector<std::vector<double>> merit_trace;
};

/// Slack weight used when RefineConfig::slack_weight is not set.
double default_slack_weight(double w_r);
double resolved_slack_weight(const RefineConfig& cfg);

/// Terms of the refinement objectives and their derivatives with respect to
/// the control coordinates c (blocked, 3 N_c) and the slack vector s.
class RefineProblem {
 public:
  RefineProblem(Eigen::MatrixXd mp, const ControlBasis& basis, const Topology& topo, double w_r);

  int num_coords() const { return static_cast<int>(q_.rows()); }
  int num_controls() const { return static_cast<int>(p_.cols()); }
  int num_vertices() const { return static_cast<int>(p_.rows()); }
  int num_edges() const { return static_cast<int>(diff_.rows()); }
  const Eigen::VectorXd& rest_lengths() const { return rest_; }

  Eigen::VectorXd coords(const Eigen::VectorXd& c) const;

  /// ||M P c||^2 + w_r^2 ||A P c||^2 = c^T Q c.
  const Eigen::MatrixXd& quadratic() const { return q_; }

  double data_term(const Eigen::VectorXd& c) const;
  Eigen::VectorXd data_gradient(const Eigen::VectorXd& c) const;
  double regularization_term(const Eigen::VectorXd& c) const;
  Eigen::VectorXd regularization_gradient(const Eigen::VectorXd& c) const;

  double slack_term(const Eigen::VectorXd& s, double w_s) const;
  Eigen::VectorXd slack_gradient(const Eigen::VectorXd& s, double w_s) const;

  /// ||x_i - x_j||^2 - l_ij^2 per edge, and its E x 3N_c Jacobian.
  Eigen::VectorXd edge_residuals(const Eigen::VectorXd& c) const;
  Eigen::MatrixXd edge_residual_jacobian(const Eigen::VectorXd& c) const;
  /// Equality form with slacks: residual + s^2; Jacobian over [c; s].
  Eigen::VectorXd edge_constraints(const Eigen::VectorXd& c, const Eigen::VectorXd& s) const;
  Eigen::MatrixXd edge_constraint_jacobian(const Eigen::VectorXd& c, const Eigen::VectorXd& s) const;

  Eigen::VectorXd edge_lengths(const Eigen::VectorXd& c) const;
  double edge_penalty(const Eigen::VectorXd& c, double w_l) const;
  Eigen::VectorXd edge_penalty_gradient(const Eigen::VectorXd& c, double w_l) const;

  /// Squared distance of the vertex centroid from `line`, times w_t^2.
  double trajectory_term(const Eigen::VectorXd& c, const Line3& line, double w_t) const;
  Eigen::VectorXd trajectory_gradient(const Eigen::VectorXd& c, const Line3& line, double w_t) const;

  /// rho_i^2 - r^2 per vertex (rho = distance to the cylinder axis).
  Eigen::VectorXd obstacle_residuals(const Eigen::VectorXd& c, const Cylinder& cyl) const;
  Eigen::MatrixXd obstacle_residual_jacobian(const Eigen::VectorXd& c, const Cylinder& cyl) const;
  /// Equality form with slacks: residual - s^2; Jacobian over [c; s].
  Eigen::VectorXd obstacle_constraints(const Eigen::VectorXd& c, const Eigen::VectorXd& s,
                                       const Cylinder& cyl) const;
  Eigen::MatrixXd obstacle_constraint_jacobian(const Eigen::VectorXd& c, const Eigen::VectorXd& s,
                                               const Cylinder& cyl) const;

  // Pieces shared with the solver.
  const Eigen::MatrixXd& edge_differences() const { return diff_; }
  const Eigen::MatrixXd& p_prime() const { return p_; }
  const Eigen::MatrixXd& mp() const { return mp_; }
  Eigen::MatrixXd trajectory_jacobian(const Line3& line) const;  // 3 x 3N_c, projected
  Eigen::MatrixXd regularization_quadratic() const;

 private:
  Eigen::MatrixXd mp_;
  Eigen::MatrixXd p_;      // N_v x N_c
  Eigen::MatrixXd r_;      // N_c x N_c factor of A'P'
  Eigen::MatrixXd diff_;   // E x N_c, rows P'_a - P'_b
  Eigen::VectorXd rest_;   // E
  Eigen::RowVectorXd mean_row_;  // 1 x N_c, centroid weights
  Eigen::MatrixXd q_;
  double w_r_;
};

/// Augmented-Lagrangian refinement of ||M P c||^2 + w_r^2 ||A P c||^2 +
/// w_s^2 ||s||^2 subject to ||x_i - x_j||^2 - l_ij^2 + s_e^2 = 0 on every edge.
/// `mp` holds the inlier rows of M already multiplied by P.
RefineResult refine_constrained(const Eigen::VectorXd& c0, const Eigen::MatrixXd& mp,
                                const ControlBasis& basis, const Topology& topo,
                                const RefineConfig& cfg);

/// Soft edge-length and trajectory terms, hard "outside the cylinder"
/// constraint per vertex (slack unpenalized).
RefineResult refine_ball(const Eigen::VectorXd& c0, const Eigen::MatrixXd& mp,
                         const ControlBasis& basis, const Topology& topo, const RefineConfig& cfg,
                         const BallConfig& ball);

/// Total-least-squares line through the points. Throws DegenerateInput.
Line3 fit_trajectory(const std::vector<Vec3>& centroids);

double distance_to_line(const Vec3& p, const Line3& line);

}  // namespace lapmesh
