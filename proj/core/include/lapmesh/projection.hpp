#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "lapmesh/mesh.hpp"

namespace lapmesh {

using SparseMatrix = Eigen::SparseMatrix<double>;
using RowSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Pinhole camera expressed in its own frame (no extrinsics).
struct Camera {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  std::optional<Eigen::Vector2i> image_size;  // (width, height)

  static Camera from_intrinsics(double fx, double fy, double cx, double cy,
                                std::optional<Eigen::Vector2i> size = std::nullopt);

  double fx() const { return K(0, 0); }
  double fy() const { return K(1, 1); }
  double cx() const { return K(0, 2); }
  double cy() const { return K(1, 2); }

  /// Depth below which a point is treated as behind the camera.
  static constexpr double kMinDepth = 1e-9;

  /// Pixel of a camera-frame point, or nullopt when its depth is <= kMinDepth.
  std::optional<Vec2> project(const Vec3& p) const;
};

/// Throws InvalidArgument unless K[2][2] == 1 and both focal entries are positive.
void validate(const Camera& camera);

struct Correspondence {
  BaryPoint point;
  Vec2 pixel = Vec2::Zero();
  bool inlier = true;
};

struct CorrespondenceSet {
  std::vector<Correspondence> items;
  Camera camera;

  int size() const { return static_cast<int>(items.size()); }
  int num_inliers() const;
  std::vector<bool> inlier_flags() const;
  void set_inlier_flags(const std::vector<bool>& flags);
};

/// K_{2x3} - [u; v] K_3: the two rows whose product with a surface point
/// vanishes when the point lies on the line of sight of (u, v).
Eigen::Matrix<double, 2, 3> h_matrix(const Camera& camera, const Vec2& pixel);

/// Stacks [b1 H, b2 H, b3 H] for every inlier-flagged correspondence into a
/// 2n x 3N_v sparse matrix (blocked coordinate layout). Throws EmptyInlierSet.
RowSparseMatrix assemble_M(const TriMesh& mesh, const CorrespondenceSet& corr);

/// Same as assemble_M but includes every correspondence regardless of its
/// inlier flag; row pair k belongs to corr.items[k].
RowSparseMatrix assemble_M_all(const TriMesh& mesh, const CorrespondenceSet& corr);

/// 2 / (f_x + f_y). M times this factor measures residuals in normalized image
/// units, which is what the solvers work with so that w_r does not depend on
/// the focal length.
double image_plane_scale(const Camera& camera);

/// assemble_M / assemble_M_all scaled by image_plane_scale.
RowSparseMatrix assemble_data_rows(const TriMesh& mesh, const CorrespondenceSet& corr);
RowSparseMatrix assemble_data_rows_all(const TriMesh& mesh, const CorrespondenceSet& corr);

/// Pixel distance between each observed pixel and the projection of its
/// template point under `x`. Points at non-positive depth give +infinity.
std::vector<double> reprojection_errors(const TriMesh& mesh, const Camera& camera,
                                        const CorrespondenceSet& corr, const Eigen::VectorXd& x);

/// Projections of all vertices of `x`; rows with non-positive depth are NaN.
Eigen::MatrixX2d project_vertices(const Camera& camera, const Eigen::VectorXd& x, int num_vertices);

}  // namespace lapmesh
