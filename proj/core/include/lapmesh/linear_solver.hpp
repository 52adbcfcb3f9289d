#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "lapmesh/controls.hpp"
#include "lapmesh/mesh.hpp"
#include "lapmesh/projection.hpp"

namespace lapmesh {

enum class EigenMethod {
  automatic,   // dense SVD when 3 N_c <= 300, normal-matrix eigen otherwise
  dense_svd,   // SVD of the stacked matrix M_wr
  normal_eigen // symmetric eigen-decomposition of M_wr^T M_wr
};

struct LinearSolveConfig {
  double w_r = 1.0;
  EigenMethod method = EigenMethod::automatic;
  /// Warn when fewer inlier correspondences are available; -1 means 3 N_c / 2.
  int min_correspondences = -1;
  bool keep_spectrum = false;
  /// How many of the smallest singular vectors may be tried when the first
  /// one places vertices behind the camera. 1 disables the check.
  int cheirality_candidates = 3;
};

struct LinearSolution {
  Eigen::VectorXd c;         // control coordinates after sign and scale fix
  Eigen::VectorXd x;         // P c
  Eigen::VectorXd spectrum;  // singular values of M_wr, ascending (if requested)
  double objective = 0.0;    // ||M P c||^2 + w_r^2 ||A P c||^2 at unit-norm c
  double w_r = 1.0;
};

/// Dense stacked matrix [M P; w_r (I_3 (x) R)] whose Gram equals that of
/// [M P; w_r A P]; R is the basis' triangular factor of A' P'.
Eigen::MatrixXd stacked_system(const Eigen::MatrixXd& mp, const ControlBasis& basis, double w_r);

/// Unit-norm minimizer of ||M P c||^2 + w_r^2 ||A P c||^2, flipped so the mean
/// vertex depth is positive and scaled so the mean edge length matches the
/// reference. If that shape has vertices behind the camera, the next singular
/// vectors (up to cfg.cheirality_candidates) are tried in order and the first
/// one entirely in front is used. `mp` is M already multiplied by P.
LinearSolution solve_reduced(const Eigen::MatrixXd& mp, const ControlBasis& basis,
                             const Topology& topo, const LinearSolveConfig& cfg);

LinearSolution solve_initial(const Eigen::SparseMatrix<double, Eigen::RowMajor>& M,
                             const ControlBasis& basis, const Topology& topo,
                             const LinearSolveConfig& cfg = {});

struct ConditioningRow {
  double w_r = 0.0;
  double condition = 0.0;    // sigma_max / sigma_min of M_wr
  Eigen::VectorXd spectrum;  // ascending
};

std::vector<ConditioningRow> conditioning_report(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& M, const ControlBasis& basis,
    const std::vector<double>& w_r_grid);

/// `count` log-spaced values from `lo` to `hi` inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

}  // namespace lapmesh
