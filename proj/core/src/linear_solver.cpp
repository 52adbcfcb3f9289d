#include "lapmesh/linear_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lapmesh/error.hpp"
#include "lapmesh/log.hpp"

namespace lapmesh {

namespace {

constexpr int kDenseSvdMaxColumns = 300;

struct SmallestSingular {
  Eigen::MatrixXd vectors;   // right singular vectors, ascending singular value
  Eigen::VectorXd spectrum;  // ascending
};

SmallestSingular smallest_singular(const Eigen::MatrixXd& mwr, EigenMethod method) {
  const Eigen::Index cols = mwr.cols();
  if (method == EigenMethod::automatic) {
    method = cols <= kDenseSvdMaxColumns ? EigenMethod::dense_svd : EigenMethod::normal_eigen;
  }
  SmallestSingular out;
  if (method == EigenMethod::dense_svd) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mwr, Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "SVD did not converge");
    const Eigen::VectorXd& s = svd.singularValues();
    out.spectrum = Eigen::VectorXd::Zero(cols);
    out.spectrum.head(s.size()) = s.reverse();
    if (s.size() < cols) {
      // Fewer rows than columns: the null space is not represented in thin V.
      Eigen::JacobiSVD<Eigen::MatrixXd> full(mwr, Eigen::ComputeFullV);
      out.vectors = full.matrixV().rowwise().reverse();
      std::sort(out.spectrum.data(), out.spectrum.data() + cols);
    } else {
      out.vectors = svd.matrixV().rowwise().reverse();
    }
  } else {
    const Eigen::MatrixXd normal = mwr.transpose() * mwr;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
    if (eig.info() != Eigen::Success) {
      throw Error(ErrorCode::EigenFailure, "eigen-decomposition did not converge");
    }
    out.vectors = eig.eigenvectors();
    out.spectrum = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  }
  return out;
}

}  // namespace

Eigen::MatrixXd stacked_system(const Eigen::MatrixXd& mp, const ControlBasis& basis, double w_r) {
  const int nc = basis.num_controls();
  Eigen::MatrixXd mwr = Eigen::MatrixXd::Zero(mp.rows() + 3 * nc, 3 * nc);
  mwr.topRows(mp.rows()) = mp;
  for (int d = 0; d < 3; ++d) {
    mwr.block(mp.rows() + d * nc, d * nc, nc, nc) = w_r * basis.ap_factor;
  }
  return mwr;
}

LinearSolution solve_reduced(const Eigen::MatrixXd& mp, const ControlBasis& basis,
                             const Topology& topo, const LinearSolveConfig& cfg) {
  if (!(cfg.w_r > 0.0)) {
    throw Error(ErrorCode::ParamOutOfRange, fmt::format("w_r must be positive (got {})", cfg.w_r));
  }
  const int nc = basis.num_controls();
  const int nv = basis.num_vertices();
  const int min_corr = cfg.min_correspondences >= 0 ? cfg.min_correspondences : (3 * nc) / 2;
  if (mp.rows() / 2 < min_corr) {
    warn(fmt::format("only {} correspondences for {} control vertices", mp.rows() / 2, nc));
  }

  const Eigen::MatrixXd mwr = stacked_system(mp, basis, cfg.w_r);
  const SmallestSingular sol = smallest_singular(mwr, cfg.method);

  // Smallest singular vector first; later ones only replace it when its shape
  // crosses the camera plane and theirs does not.
  const int candidates = std::clamp(cfg.cheirality_candidates, 1, static_cast<int>(mwr.cols()));
  Eigen::VectorXd c, x;
  bool found = false;
  for (int k = 0; k < candidates && !found; ++k) {
    Eigen::VectorXd ck = sol.vectors.col(k);
    Eigen::VectorXd xk = basis.apply(ck);
    const double mean_depth = xk.segment(2 * nv, nv).mean();
    if (!(std::abs(mean_depth) > 0.0)) {
      if (k == 0) {
        throw Error(ErrorCode::AllBehindCamera, "solution has zero mean depth for both signs");
      }
      continue;
    }
    if (mean_depth < 0.0) {
      ck = -ck;
      xk = -xk;
    }
    found = xk.segment(2 * nv, nv).minCoeff() > Camera::kMinDepth;
    if (k == 0 || found) {
      c = std::move(ck);
      x = std::move(xk);
    }
  }

  LinearSolution out;
  out.w_r = cfg.w_r;
  out.objective = (mwr * c).squaredNorm();
  const double len = mean_edge_length(topo, x, nv);
  if (!(len > 0.0) || !std::isfinite(len)) {
    throw Error(ErrorCode::EigenFailure, "solution collapsed to a point");
  }
  const double scale = topo.mean_edge_length() / len;
  out.c = scale * c;
  out.x = scale * x;
  if (cfg.keep_spectrum) out.spectrum = sol.spectrum;
  return out;
}

LinearSolution solve_initial(const Eigen::SparseMatrix<double, Eigen::RowMajor>& M,
                             const ControlBasis& basis, const Topology& topo,
                             const LinearSolveConfig& cfg) {
  return solve_reduced(basis.right_multiply(M), basis, topo, cfg);
}

std::vector<ConditioningRow> conditioning_report(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& M, const ControlBasis& basis,
    const std::vector<double>& w_r_grid) {
  if (w_r_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty w_r grid");
  const Eigen::MatrixXd mp = basis.right_multiply(M);
  std::vector<ConditioningRow> rows;
  rows.reserve(w_r_grid.size());
  for (double w : w_r_grid) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked_system(mp, basis, w));
    Eigen::VectorXd s = svd.singularValues().reverse();
    ConditioningRow row;
    row.w_r = w;
    row.condition = s[0] > 0.0 ? s[s.size() - 1] / s[0] : std::numeric_limits<double>::infinity();
    row.spectrum = std::move(s);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) {
    throw Error(ErrorCode::InvalidArgument, "log grid needs count >= 1 and 0 < lo <= hi");
  }
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < count; ++i) grid[i] = std::exp(a + (b - a) * i / (count - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

}  // namespace lapmesh
