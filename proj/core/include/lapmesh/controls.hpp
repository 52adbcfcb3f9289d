#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lapmesh/mesh.hpp"
#include "lapmesh/regularizer.hpp"

namespace lapmesh {

enum class ControlStrategy { regular, random, all };

const char* to_string(ControlStrategy s);
ControlStrategy parse_control_strategy(const std::string& name);

/// Control-vertex indices, returned sorted ascending.
///  - regular: farthest-point sampling seeded at the vertex nearest the centroid
///  - random:  seeded uniform sample without replacement
///  - all:     every vertex (count is ignored)
/// Throws CountOutOfRange unless 4 <= count <= N_v.
std::vector<int> select_controls(const TriMesh& mesh, ControlStrategy strategy, int count,
                                 std::uint64_t seed = 0);

/// Linear map from control coordinates to the minimum-regularization mesh
/// through them: x = P c with P = I_3 (x) p_prime.
struct ControlBasis {
  std::vector<int> indices;
  ControlStrategy selection = ControlStrategy::regular;
  Eigen::MatrixXd p_prime;  // N_v x N_c

  // Upper-triangular factor R with R^T R = (A' P')^T (A' P'), so that
  // ||A P c||^2 = sum_d ||R c_d||^2 for the three coordinate blocks c_d.
  Eigen::MatrixXd ap_factor;

  int num_vertices() const { return static_cast<int>(p_prime.rows()); }
  int num_controls() const { return static_cast<int>(indices.size()); }

  /// Full 3N_v x 3N_c matrix.
  Eigen::MatrixXd p_full() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& c) const;
  /// Control coordinates (blocked) extracted from a full coordinate vector.
  Eigen::VectorXd restrict(const Eigen::VectorXd& x) const;
  /// Right-multiplies a 3N_v-column operator by P.
  Eigen::MatrixXd right_multiply(const Eigen::SparseMatrix<double, Eigen::RowMajor>& m) const;
};

/// Throws RankDeficientInterior when the non-control columns of A' do not
/// have full column rank (smallest eigenvalue of A_l^T A_l < 1e-10 x largest).
ControlBasis build_P(const Regularizer& reg, std::vector<int> indices,
                     ControlStrategy selection = ControlStrategy::regular);

}  // namespace lapmesh
