#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "lapmesh/mesh.hpp"

namespace lapmesh {

enum class RegularizerMode { planar, nonplanar };

const char* to_string(RegularizerMode mode);

/// Linear operator whose norm penalizes non-rigid deviation from the
/// reference. `a_prime` acts on one coordinate block; `a_full` is the
/// block-diagonal I_3 (x) a_prime acting on a full coordinate vector.
struct Regularizer {
  RegularizerMode mode = RegularizerMode::planar;
  double sigma = 0.0;  // virtual-vertex scale, non-planar only
  int num_vertices = 0;
  int num_virtual = 0;
  Eigen::SparseMatrix<double> a_prime;
  Eigen::SparseMatrix<double> a_full;

  int rows() const { return static_cast<int>(a_prime.rows()); }
};

/// Four weights with sum w_i p_i = 0, sum w_i = 0, sum w_i^2 = 1 for coplanar
/// points, sign fixed so the first non-negligible weight is positive.
/// Throws DegenerateConfiguration unless the solution is unique.
Eigen::Vector4d facet_pair_weights(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4);

/// Five-point analogue of facet_pair_weights for points spanning 3D.
Eigen::Matrix<double, 5, 1> tet_pair_weights(const std::array<Vec3, 5>& points);

/// Throws NotPlanar when the reference deviates from its best-fit plane by
/// more than 1e-6 of the bounding-box diagonal, DegenerateConfiguration for
/// collinear facet pairs.
Regularizer build_planar(const TriMesh& mesh, const Topology& topo);

/// Points placed above and below every facet centroid. Virtual vertex of
/// facet f on side s (0 = above, 1 = below) has global index
/// num_real + 2 f + s.
struct VirtualAugmentation {
  int num_real = 0;
  double sigma = 1.0;
  std::vector<Vec3> virtual_vertices;
  std::vector<std::array<int, 4>> tetrahedra;  // per facet: above, below

  int index_of(int facet, int side) const { return num_real + 2 * facet + side; }
};

VirtualAugmentation add_virtual_vertices(const TriMesh& mesh, double sigma);

/// Two tetrahedra sharing `shared_face`; `vertices` are the five distinct
/// vertices (real or virtual indices) that define one regularizer row.
struct TetPair {
  std::array<int, 3> shared_face{};
  std::array<int, 5> vertices{};
};

/// Pairs of (a) the above/below tetrahedra of each facet and (b) a facet
/// tetrahedron with the edge tetrahedron spanning a shared mesh edge and the
/// same-side virtual vertices of the two adjacent facets.
std::vector<TetPair> enumerate_tet_pairs(const VirtualAugmentation& aug, const TriMesh& mesh,
                                         const Topology& topo);

/// Builds the augmented operator over real + virtual vertices and eliminates
/// the virtual columns. Throws ParamOutOfRange for sigma <= 0.
Regularizer build_nonplanar(const TriMesh& mesh, const Topology& topo, double sigma = 1.0);

/// Singular values of `a` in ascending order divided by the largest.
Eigen::VectorXd normalized_spectrum(const Eigen::SparseMatrix<double>& a);

/// I_3 (x) a, i.e. three copies of `a` along the diagonal.
Eigen::SparseMatrix<double> kron_identity3(const Eigen::SparseMatrix<double>& a);

}  // namespace lapmesh
