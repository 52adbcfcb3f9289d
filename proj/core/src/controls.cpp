#include "lapmesh/controls.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lapmesh/error.hpp"

namespace lapmesh {

const char* to_string(ControlStrategy s) {
  switch (s) {
    case ControlStrategy::regular: return "regular";
    case ControlStrategy::random: return "random";
    case ControlStrategy::all: return "all";
  }
  return "unknown";
}

ControlStrategy parse_control_strategy(const std::string& name) {
  if (name == "regular") return ControlStrategy::regular;
  if (name == "random") return ControlStrategy::random;
  if (name == "all") return ControlStrategy::all;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown control strategy '{}'", name));
}

std::vector<int> select_controls(const TriMesh& mesh, ControlStrategy strategy, int count,
                                 std::uint64_t seed) {
  const int n = mesh.num_vertices();
  if (strategy == ControlStrategy::all) {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  if (count < 4 || count > n) {
    throw Error(ErrorCode::CountOutOfRange,
                fmt::format("control count {} outside [4, {}]", count, n));
  }

  std::vector<int> picked;
  picked.reserve(count);
  if (strategy == ControlStrategy::random) {
    std::mt19937_64 rng(seed);
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int k = 0; k < count; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(pool[k], pool[pick(rng)]);
      picked.push_back(pool[k]);
    }
  } else {
    Vec3 centroid = Vec3::Zero();
    for (const auto& v : mesh.vertices) centroid += v;
    centroid /= n;
    int seed_vertex = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double d = (mesh.vertices[i] - centroid).squaredNorm();
      if (d < best) {
        best = d;
        seed_vertex = i;
      }
    }
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    int next = seed_vertex;
    for (int k = 0; k < count; ++k) {
      picked.push_back(next);
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        dist[i] = std::min(dist[i], (mesh.vertices[i] - mesh.vertices[next]).squaredNorm());
        if (dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      next = far;
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

Eigen::MatrixXd ControlBasis::p_full() const {
  const int nv = num_vertices(), nc = num_controls();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(3 * nv, 3 * nc);
  for (int d = 0; d < 3; ++d) P.block(d * nv, d * nc, nv, nc) = p_prime;
  return P;
}

Eigen::VectorXd ControlBasis::apply(const Eigen::VectorXd& c) const {
  const int nv = num_vertices(), nc = num_controls();
  Eigen::VectorXd x(3 * nv);
  for (int d = 0; d < 3; ++d) x.segment(d * nv, nv) = p_prime * c.segment(d * nc, nc);
  return x;
}

Eigen::VectorXd ControlBasis::restrict(const Eigen::VectorXd& x) const {
  const int nv = num_vertices(), nc = num_controls();
  Eigen::VectorXd c(3 * nc);
  for (int d = 0; d < 3; ++d) {
    for (int k = 0; k < nc; ++k) c[d * nc + k] = x[d * nv + indices[k]];
  }
  return c;
}

Eigen::MatrixXd ControlBasis::right_multiply(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& m) const {
  const int nv = num_vertices(), nc = num_controls();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), 3 * nc);
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, r); it; ++it) {
      const int d = static_cast<int>(it.col()) / nv;
      const int v = static_cast<int>(it.col()) % nv;
      out.row(r).segment(d * nc, nc) += it.value() * p_prime.row(v);
    }
  }
  return out;
}

ControlBasis build_P(const Regularizer& reg, std::vector<int> indices, ControlStrategy selection) {
  const int nv = reg.num_vertices;
  std::sort(indices.begin(), indices.end());
  if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
    throw Error(ErrorCode::InvalidArgument, "control indices must be distinct");
  }
  if (indices.empty() || indices.front() < 0 || indices.back() >= nv) {
    throw Error(ErrorCode::CountOutOfRange, "control indices out of range");
  }
  const int nc = static_cast<int>(indices.size());

  std::vector<int> interior;
  interior.reserve(nv - nc);
  for (int i = 0, k = 0; i < nv; ++i) {
    if (k < nc && indices[k] == i) {
      ++k;
    } else {
      interior.push_back(i);
    }
  }

  ControlBasis basis;
  basis.indices = indices;
  basis.selection = selection;
  basis.p_prime = Eigen::MatrixXd::Zero(nv, nc);
  for (int k = 0; k < nc; ++k) basis.p_prime(indices[k], k) = 1.0;

  if (!interior.empty()) {
    const Eigen::MatrixXd gram = Eigen::MatrixXd(reg.a_prime.transpose() * reg.a_prime);
    const int ni = static_cast<int>(interior.size());
    Eigen::MatrixXd g_ll(ni, ni), g_lc(ni, nc);
    for (int i = 0; i < ni; ++i) {
      for (int j = 0; j < ni; ++j) g_ll(i, j) = gram(interior[i], interior[j]);
      for (int k = 0; k < nc; ++k) g_lc(i, k) = gram(interior[i], indices[k]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g_ll, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    if (!(lmax > 0.0) || lmin < 1e-10 * lmax) {
      throw Error(ErrorCode::RankDeficientInterior,
                  fmt::format("interior block is rank deficient (eigenvalue ratio {:.3g}); "
                              "use more or better spread control vertices",
                              lmax > 0.0 ? lmin / lmax : 0.0));
    }
    const Eigen::MatrixXd lambda = -g_ll.llt().solve(g_lc);
    for (int i = 0; i < ni; ++i) basis.p_prime.row(interior[i]) = lambda.row(i);
  }

  const Eigen::MatrixXd ap = reg.a_prime * basis.p_prime;
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(nc, nc);
  if (ap.rows() > 0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(ap);
    const Eigen::Index k = std::min<Eigen::Index>(ap.rows(), nc);
    r.topRows(k) = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  }
  basis.ap_factor = std::move(r);
  return basis;
}

}  // namespace lapmesh
