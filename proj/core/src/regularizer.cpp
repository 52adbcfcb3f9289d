#include "lapmesh/regularizer.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include "lapmesh/error.hpp"
#include "lapmesh/log.hpp"

namespace lapmesh {

const char* to_string(RegularizerMode mode) {
  return mode == RegularizerMode::planar ? "planar" : "nonplanar";
}

namespace {

// Second-smallest singular value below this fraction of the largest means the
// null space is not one-dimensional.
constexpr double kUniqueNullTol = 1e-8;
// For four points the smallest singular value must vanish (coplanarity).
constexpr double kCoplanarTol = 1e-6;
constexpr double kSignTol = 1e-12;

// Null vector of the (4 x N) system [p_x; p_y; p_z; 1]. The row space is
// unchanged by affine maps of the points, so the points are centered and
// scaled first for conditioning.
template <int N>
Eigen::Matrix<double, N, 1> affine_null_weights(std::span<const Vec3, N> pts) {
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= N;
  double rms = 0.0;
  for (const auto& p : pts) rms += (p - centroid).squaredNorm();
  rms = std::sqrt(rms / N);
  if (!(rms > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "coincident points");

  Eigen::Matrix<double, 4, N> sys;
  for (int i = 0; i < N; ++i) {
    sys.template block<3, 1>(0, i) = (pts[i] - centroid) / rms;
    sys(3, i) = 1.0;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 4, N>> svd(sys, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();  // descending, min(4, N) entries
  if constexpr (N == 4) {
    if (s[3] > kCoplanarTol * s[0]) {
      throw Error(ErrorCode::DegenerateConfiguration, "points are not coplanar");
    }
    if (s[2] < kUniqueNullTol * s[0]) {
      throw Error(ErrorCode::DegenerateConfiguration, "three or more points are collinear");
    }
  } else {
    if (s[3] < kUniqueNullTol * s[0]) {
      throw Error(ErrorCode::DegenerateConfiguration, "points do not span 3D");
    }
  }
  Eigen::Matrix<double, N, 1> w = svd.matrixV().col(N - 1);
  w.normalize();
  for (int i = 0; i < N; ++i) {
    if (std::abs(w[i]) > kSignTol) {
      if (w[i] < 0.0) w = -w;
      break;
    }
  }
  return w;
}

void check_planar(const TriMesh& mesh) {
  const int n = mesh.num_vertices();
  Vec3 centroid = Vec3::Zero();
  for (const auto& v : mesh.vertices) centroid += v;
  centroid /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& v : mesh.vertices) cov += (v - centroid) * (v - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Vec3 normal = eig.eigenvectors().col(0);
  const double tol = 1e-6 * mesh.bbox_diagonal();
  double worst = 0.0;
  for (const auto& v : mesh.vertices) worst = std::max(worst, std::abs(normal.dot(v - centroid)));
  if (worst > tol) {
    throw Error(ErrorCode::NotPlanar,
                fmt::format("reference deviates {:.3g} from its plane (tolerance {:.3g})", worst, tol));
  }
}

}  // namespace

Eigen::Vector4d facet_pair_weights(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4) {
  const std::array<Vec3, 4> pts{p1, p2, p3, p4};
  return affine_null_weights<4>(std::span<const Vec3, 4>(pts));
}

Eigen::Matrix<double, 5, 1> tet_pair_weights(const std::array<Vec3, 5>& points) {
  return affine_null_weights<5>(std::span<const Vec3, 5>(points));
}

Eigen::SparseMatrix<double> kron_identity3(const Eigen::SparseMatrix<double>& a) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(3 * a.nonZeros());
  for (int d = 0; d < 3; ++d) {
    for (int k = 0; k < a.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
        triplets.emplace_back(d * a.rows() + it.row(), d * a.cols() + it.col(), it.value());
      }
    }
  }
  Eigen::SparseMatrix<double> out(3 * a.rows(), 3 * a.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Regularizer build_planar(const TriMesh& mesh, const Topology& topo) {
  check_planar(mesh);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * topo.facet_pairs.size());
  for (std::size_t k = 0; k < topo.facet_pairs.size(); ++k) {
    const auto& q = topo.facet_pairs[k].quad;
    Eigen::Vector4d w;
    try {
      w = facet_pair_weights(mesh.vertices[q[0]], mesh.vertices[q[1]], mesh.vertices[q[2]],
                             mesh.vertices[q[3]]);
    } catch (const Error& e) {
      throw Error(ErrorCode::DegenerateConfiguration,
                  fmt::format("facet pair {} ({}, {}): {}", k, topo.facet_pairs[k].f0,
                              topo.facet_pairs[k].f1, e.what()));
    }
    for (int i = 0; i < 4; ++i) triplets.emplace_back(static_cast<int>(k), q[i], w[i]);
  }
  Regularizer reg;
  reg.mode = RegularizerMode::planar;
  reg.num_vertices = mesh.num_vertices();
  reg.a_prime.resize(static_cast<Eigen::Index>(topo.facet_pairs.size()), mesh.num_vertices());
  reg.a_prime.setFromTriplets(triplets.begin(), triplets.end());
  reg.a_full = kron_identity3(reg.a_prime);
  return reg;
}

VirtualAugmentation add_virtual_vertices(const TriMesh& mesh, double sigma) {
  VirtualAugmentation aug;
  aug.num_real = mesh.num_vertices();
  aug.sigma = sigma;
  aug.virtual_vertices.reserve(2 * mesh.facets.size());
  aug.tetrahedra.reserve(2 * mesh.facets.size());
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const auto& t = mesh.facets[f];
    const Vec3& vi = mesh.vertices[t[0]];
    const Vec3& vj = mesh.vertices[t[1]];
    const Vec3& vk = mesh.vertices[t[2]];
    const Vec3 center = (vi + vj + vk) / 3.0;
    const Vec3 n = (vj - vi).cross(vk - vi);
    const double len = n.norm();
    if (!(len > 0.0)) throw Error(ErrorCode::ZeroAreaFacet, fmt::format("facet {}", f));
    const Vec3 offset = sigma * n / std::sqrt(len);
    aug.virtual_vertices.push_back(center + offset);
    aug.virtual_vertices.push_back(center - offset);
    // Both orderings have positive signed volume.
    aug.tetrahedra.push_back({t[0], t[1], t[2], aug.index_of(f, 0)});
    aug.tetrahedra.push_back({t[0], t[2], t[1], aug.index_of(f, 1)});
  }
  return aug;
}

std::vector<TetPair> enumerate_tet_pairs(const VirtualAugmentation& aug, const TriMesh& mesh,
                                         const Topology& topo) {
  std::vector<TetPair> pairs;
  pairs.reserve(mesh.facets.size() + 4 * topo.facet_pairs.size());
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const auto& t = mesh.facets[f];
    pairs.push_back({{t[0], t[1], t[2]},
                     {t[0], t[1], t[2], aug.index_of(f, 0), aug.index_of(f, 1)}});
  }
  for (const auto& fp : topo.facet_pairs) {
    const Edge& e = topo.edges[fp.edge];
    const int opp0 = fp.quad[0];
    const int opp1 = fp.quad[3];
    for (int side = 0; side < 2; ++side) {
      const int v0 = aug.index_of(fp.f0, side);
      const int v1 = aug.index_of(fp.f1, side);
      // Edge tetrahedron (a, b, v0, v1) against the facet tetrahedron of f0
      // (shares a, b, v0) and of f1 (shares a, b, v1).
      pairs.push_back({{e.a, e.b, v0}, {e.a, e.b, v0, opp0, v1}});
      pairs.push_back({{e.a, e.b, v1}, {e.a, e.b, v1, opp1, v0}});
    }
  }
  return pairs;
}

Regularizer build_nonplanar(const TriMesh& mesh, const Topology& topo, double sigma) {
  if (!(sigma > 0.0)) {
    throw Error(ErrorCode::ParamOutOfRange, fmt::format("sigma must be positive (got {})", sigma));
  }
  const VirtualAugmentation aug = add_virtual_vertices(mesh, sigma);
  const auto pairs = enumerate_tet_pairs(aug, mesh, topo);
  const int nv = mesh.num_vertices();
  const int nvirt = static_cast<int>(aug.virtual_vertices.size());
  auto point = [&](int idx) -> const Vec3& {
    return idx < nv ? mesh.vertices[idx] : aug.virtual_vertices[idx - nv];
  };

  std::vector<Eigen::Triplet<double>> real_t, virt_t;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    std::array<Vec3, 5> pts;
    for (int i = 0; i < 5; ++i) pts[i] = point(pairs[r].vertices[i]);
    Eigen::Matrix<double, 5, 1> w;
    try {
      w = tet_pair_weights(pts);
    } catch (const Error& e) {
      throw Error(ErrorCode::DegenerateConfiguration,
                  fmt::format("tetrahedron pair {}: {}", r, e.what()));
    }
    for (int i = 0; i < 5; ++i) {
      const int idx = pairs[r].vertices[i];
      if (idx < nv) {
        real_t.emplace_back(static_cast<int>(r), idx, w[i]);
      } else {
        virt_t.emplace_back(static_cast<int>(r), idx - nv, w[i]);
      }
    }
  }
  const auto rows = static_cast<Eigen::Index>(pairs.size());
  Eigen::SparseMatrix<double> a_real(rows, nv), a_virt(rows, nvirt);
  a_real.setFromTriplets(real_t.begin(), real_t.end());
  a_virt.setFromTriplets(virt_t.begin(), virt_t.end());

  // Virtual coordinates minimizing ||a_real x + a_virt x_v|| are
  // x_v = -(a_virt^T a_virt)^{-1} a_virt^T a_real x; substituting back gives
  // A' = a_real - a_virt (a_virt^T a_virt)^{-1} a_virt^T a_real.
  const Eigen::SparseMatrix<double> gram = a_virt.transpose() * a_virt;
  const Eigen::MatrixXd rhs = Eigen::MatrixXd(a_virt.transpose() * a_real);
  Eigen::MatrixXd elim;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(gram);
  bool ok = ldlt.info() == Eigen::Success;
  if (ok) {
    const auto d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    ok = d.minCoeff() > 1e-10 * dmax;
  }
  if (ok) {
    elim = ldlt.solve(rhs);
  } else {
    warn("virtual-vertex Gram matrix is singular; eliminating with a pseudo-inverse");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(gram)};
    if (eig.info() != Eigen::Success) {
      throw Error(ErrorCode::VirtualGramSingular, "eigen-decomposition of the virtual Gram failed");
    }
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double cutoff = 1e-10 * ev.maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev[i] > cutoff) inv[i] = 1.0 / ev[i];
    }
    const Eigen::MatrixXd& U = eig.eigenvectors();
    elim = U * inv.asDiagonal() * (U.transpose() * rhs);
  }
  const Eigen::MatrixXd dense = Eigen::MatrixXd(a_real) - a_virt * elim;

  Regularizer reg;
  reg.mode = RegularizerMode::nonplanar;
  reg.sigma = sigma;
  reg.num_vertices = nv;
  reg.num_virtual = nvirt;
  const double cutoff = 1e-15 * dense.cwiseAbs().maxCoeff();
  reg.a_prime = dense.sparseView(1.0, cutoff);
  reg.a_full = kron_identity3(reg.a_prime);
  return reg;
}

Eigen::VectorXd normalized_spectrum(const Eigen::SparseMatrix<double>& a) {
  const Eigen::MatrixXd dense(a);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense);
  Eigen::VectorXd s = svd.singularValues();
  // A wide matrix has extra exact zeros beyond its row count.
  if (s.size() < a.cols()) {
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(a.cols());
    padded.head(s.size()) = s;
    s = padded;
  }
  std::sort(s.data(), s.data() + s.size());
  const double top = s.size() ? s[s.size() - 1] : 0.0;
  if (top > 0.0) s /= top;
  return s;
}

}  // namespace lapmesh
