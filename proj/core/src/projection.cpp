#include "lapmesh/projection.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lapmesh/error.hpp"

namespace lapmesh {

Camera Camera::from_intrinsics(double fx, double fy, double cx, double cy,
                               std::optional<Eigen::Vector2i> size) {
  Camera cam;
  cam.K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  cam.image_size = size;
  validate(cam);
  return cam;
}

std::optional<Vec2> Camera::project(const Vec3& p) const {
  const Vec3 h = K * p;
  if (!(h.z() > kMinDepth)) return std::nullopt;
  return Vec2(h.x() / h.z(), h.y() / h.z());
}

void validate(const Camera& camera) {
  if (camera.K(2, 2) != 1.0 || camera.K(2, 0) != 0.0 || camera.K(2, 1) != 0.0) {
    throw Error(ErrorCode::InvalidArgument, "camera K must have last row [0 0 1]");
  }
  if (!(camera.K(0, 0) > 0.0) || !(camera.K(1, 1) > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "camera focal lengths must be positive");
  }
  if (!camera.K.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "camera K has non-finite entries");
  }
}

int CorrespondenceSet::num_inliers() const {
  int n = 0;
  for (const auto& c : items) n += c.inlier ? 1 : 0;
  return n;
}

std::vector<bool> CorrespondenceSet::inlier_flags() const {
  std::vector<bool> flags(items.size());
  for (std::size_t k = 0; k < items.size(); ++k) flags[k] = items[k].inlier;
  return flags;
}

void CorrespondenceSet::set_inlier_flags(const std::vector<bool>& flags) {
  if (flags.size() != items.size()) {
    throw Error(ErrorCode::InvalidArgument, "inlier flag count does not match correspondences");
  }
  for (std::size_t k = 0; k < items.size(); ++k) items[k].inlier = flags[k];
}

Eigen::Matrix<double, 2, 3> h_matrix(const Camera& camera, const Vec2& pixel) {
  Eigen::Matrix<double, 2, 3> H = camera.K.topRows<2>();
  H.row(0) -= pixel.x() * camera.K.row(2);
  H.row(1) -= pixel.y() * camera.K.row(2);
  return H;
}

namespace {

RowSparseMatrix assemble(const TriMesh& mesh, const CorrespondenceSet& corr, bool inliers_only) {
  const int nv = mesh.num_vertices();
  int rows = 0;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(corr.items.size() * 18);
  for (const auto& c : corr.items) {
    if (inliers_only && !c.inlier) continue;
    if (c.point.facet < 0 || c.point.facet >= mesh.num_facets()) {
      throw Error(ErrorCode::FacetOutOfRange,
                  fmt::format("correspondence facet {} out of range", c.point.facet));
    }
    const auto H = h_matrix(corr.camera, c.pixel);
    const auto& t = mesh.facets[c.point.facet];
    for (int r = 0; r < 2; ++r) {
      for (int k = 0; k < 3; ++k) {
        for (int d = 0; d < 3; ++d) {
          const double v = c.point.b[k] * H(r, d);
          if (v != 0.0) triplets.emplace_back(rows + r, d * nv + t[k], v);
        }
      }
    }
    rows += 2;
  }
  if (rows == 0) throw Error(ErrorCode::EmptyInlierSet, "no inlier correspondences");
  RowSparseMatrix M(rows, 3 * nv);
  M.setFromTriplets(triplets.begin(), triplets.end());
  return M;
}

}  // namespace

RowSparseMatrix assemble_M(const TriMesh& mesh, const CorrespondenceSet& corr) {
  return assemble(mesh, corr, true);
}

RowSparseMatrix assemble_M_all(const TriMesh& mesh, const CorrespondenceSet& corr) {
  return assemble(mesh, corr, false);
}

double image_plane_scale(const Camera& camera) { return 2.0 / (camera.fx() + camera.fy()); }

RowSparseMatrix assemble_data_rows(const TriMesh& mesh, const CorrespondenceSet& corr) {
  return assemble(mesh, corr, true) * image_plane_scale(corr.camera);
}

RowSparseMatrix assemble_data_rows_all(const TriMesh& mesh, const CorrespondenceSet& corr) {
  return assemble(mesh, corr, false) * image_plane_scale(corr.camera);
}

std::vector<double> reprojection_errors(const TriMesh& mesh, const Camera& camera,
                                        const CorrespondenceSet& corr, const Eigen::VectorXd& x) {
  std::vector<double> errors;
  errors.reserve(corr.items.size());
  for (const auto& c : corr.items) {
    const auto uv = camera.project(bary_to_world(mesh, c.point, x));
    errors.push_back(uv ? (*uv - c.pixel).norm() : std::numeric_limits<double>::infinity());
  }
  return errors;
}

Eigen::MatrixX2d project_vertices(const Camera& camera, const Eigen::VectorXd& x, int num_vertices) {
  Eigen::MatrixX2d uv(num_vertices, 2);
  for (int i = 0; i < num_vertices; ++i) {
    const auto p = camera.project(vertex_at(x, num_vertices, i));
    if (p) {
      uv.row(i) = p->transpose();
    } else {
      uv.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return uv;
}

}  // namespace lapmesh
