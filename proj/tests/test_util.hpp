#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "lapmesh/lapmesh.hpp"

namespace lapmesh::testing {

inline TriMesh single_triangle() {
  TriMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.facets = {{0, 1, 2}};
  return m;
}

// unit square, diagonal 1-2
inline TriMesh two_triangles() {
  TriMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  m.facets = {{0, 1, 2}, {1, 3, 2}};
  return m;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

// y = L v + t for every vertex of the blocked vector x.
inline Eigen::VectorXd transform(const Eigen::VectorXd& x, const Eigen::Matrix3d& l, const Vec3& t) {
  const int nv = static_cast<int>(x.size() / 3);
  Eigen::VectorXd y(x.size());
  for (int i = 0; i < nv; ++i) set_vertex(y, nv, i, l * vertex_at(x, nv, i) + t);
  return y;
}

inline double relative_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace lapmesh::testing
