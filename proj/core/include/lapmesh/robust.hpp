#pragma once

#include <vector>

#include "lapmesh/controls.hpp"
#include "lapmesh/linear_solver.hpp"
#include "lapmesh/mesh.hpp"
#include "lapmesh/projection.hpp"

namespace lapmesh {

/// Both the regularization weight and the rejection radius are halved after
/// every round, so the defaults end at w_r = 1 and a 6 px gate.
struct RobustConfig {
  int iterations = 6;
  double w_r_start = 32.0;
  double radius_start = 192.0;  // pixels
  EigenMethod method = EigenMethod::automatic;
};

struct RobustResult {
  std::vector<bool> inliers;    // gating of the last round
  LinearSolution solution;      // solve of the last round
  std::vector<double> errors;   // reprojection errors under solution.x
  double final_radius = 0.0;
  double final_w_r = 0.0;
};

/// Alternates linear solves on the current inliers with reprojection gating.
/// Every correspondence is re-tested each round, so earlier rejections can be
/// undone. Writes the final flags back into `corr`. Throws AllRejected.
RobustResult reject_outliers(const TriMesh& mesh, const Topology& topo, CorrespondenceSet& corr,
                             const ControlBasis& basis, const RobustConfig& cfg = {});

/// Rows of `mp` belonging to flagged correspondences (two rows each).
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& mp, const std::vector<bool>& flags);

}  // namespace lapmesh
