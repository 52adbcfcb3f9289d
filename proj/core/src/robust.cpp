#include "lapmesh/robust.hpp"

#include <fmt/format.h>

#include "lapmesh/error.hpp"

namespace lapmesh {

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& mp, const std::vector<bool>& flags) {
  int n = 0;
  for (bool f : flags) n += f ? 1 : 0;
  Eigen::MatrixXd out(2 * n, mp.cols());
  int r = 0;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (!flags[k]) continue;
    out.middleRows(2 * r, 2) = mp.middleRows(2 * static_cast<Eigen::Index>(k), 2);
    ++r;
  }
  return out;
}

RobustResult reject_outliers(const TriMesh& mesh, const Topology& topo, CorrespondenceSet& corr,
                             const ControlBasis& basis, const RobustConfig& cfg) {
  if (cfg.iterations < 1 || !(cfg.w_r_start > 0.0) || !(cfg.radius_start > 0.0)) {
    throw Error(ErrorCode::ParamOutOfRange,
                "robust rejection needs iterations >= 1 and positive w_r / radius");
  }
  if (corr.items.empty()) throw Error(ErrorCode::EmptyInlierSet, "no correspondences");

  const Eigen::MatrixXd mp_all = basis.right_multiply(assemble_data_rows_all(mesh, corr));
  std::vector<bool> flags(corr.items.size(), true);

  RobustResult out;
  double w_r = cfg.w_r_start;
  double radius = cfg.radius_start;
  for (int round = 0; round < cfg.iterations; ++round) {
    LinearSolveConfig lin;
    lin.w_r = w_r;
    lin.method = cfg.method;
    out.solution = solve_reduced(select_rows(mp_all, flags), basis, topo, lin);
    out.errors = reprojection_errors(mesh, corr.camera, corr, out.solution.x);

    int kept = 0;
    for (std::size_t k = 0; k < flags.size(); ++k) {
      flags[k] = !(out.errors[k] > radius);
      kept += flags[k] ? 1 : 0;
    }
    out.final_w_r = w_r;
    out.final_radius = radius;
    if (kept == 0) {
      throw Error(ErrorCode::AllRejected,
                  fmt::format("every correspondence exceeds the {:.3g} px gate in round {}", radius,
                              round + 1));
    }
    w_r *= 0.5;
    radius *= 0.5;
  }
  out.inliers = flags;
  corr.set_inlier_flags(flags);
  return out;
}

}  // namespace lapmesh
