#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "lapmesh/lapmesh.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

using namespace lapmesh;
using namespace lapmesh::testing;

namespace {

struct QuietWarnings {
  QuietWarnings() : previous(set_warning_handler([](const std::string&) {})) {}
  ~QuietWarnings() { set_warning_handler(previous); }
  WarningHandler previous;
};

double op_norm(const Eigen::SparseMatrix<double>& a) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(a)).singularValues()[0];
}

Eigen::Matrix3d random_affine(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Matrix3d l;
  for (int i = 0; i < 9; ++i) l(i / 3, i % 3) = u(rng);
  return l + 1.5 * Eigen::Matrix3d::Identity();
}

}  // namespace

TEST(FacetPairWeights, UnitSquare) {
  const Eigen::Vector4d w = facet_pair_weights(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0));
  EXPECT_LT((w - Eigen::Vector4d(0.5, -0.5, -0.5, 0.5)).norm(), 1e-12);
}

TEST(FacetPairWeights, RigidMotionKeepsWeights) {
  std::mt19937_64 rng(2);
  const Eigen::Matrix3d r = random_rotation(rng);
  const Vec3 t = random_vec(rng, 10.0);
  const std::array<Vec3, 4> p{Vec3(0, 0, 0), Vec3(2, 0.3, 0), Vec3(-0.2, 1, 0), Vec3(1.4, 1.5, 0)};
  const Eigen::Vector4d a = facet_pair_weights(p[0], p[1], p[2], p[3]);
  const Eigen::Vector4d b = facet_pair_weights(r * p[0] + t, r * p[1] + t, r * p[2] + t, r * p[3] + t);
  EXPECT_LT((a - b).norm(), 1e-12);
}

TEST(FacetPairWeights, MatchesNullspaceOracle) {
  const std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  const Eigen::Vector4d w = facet_pair_weights(p[0], p[1], p[2], p[3]);
  EXPECT_LT((w - oracles::nullspace_weights(p)).norm(), 1e-12);
  Vec3 sum = Vec3::Zero();
  for (int i = 0; i < 4; ++i) sum += w[i] * p[i];
  EXPECT_LT(sum.norm(), 1e-12);
  EXPECT_LT(std::abs(w.sum()), 1e-12);
  EXPECT_LT(std::abs(w.squaredNorm() - 1.0), 1e-12);
  EXPECT_GT(w[0], 0.0);
}

TEST(FacetPairWeights, RandomCoplanarAgreesWithOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix3d r = random_rotation(rng);
    std::vector<Vec3> p;
    for (int i = 0; i < 4; ++i) {
      Vec3 q = random_vec(rng, 5.0);
      q.z() = 0.0;
      p.push_back(r * q);
    }
    const Eigen::Vector4d w = facet_pair_weights(p[0], p[1], p[2], p[3]);
    EXPECT_LT((w - oracles::nullspace_weights(p)).norm(), 1e-12);
  }
}

TEST(FacetPairWeights, CollinearIsDegenerate) {
  try {
    facet_pair_weights(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateConfiguration);
  }
}

TEST(TetPairWeights, DefiningIdentitiesAndOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::array<Vec3, 5> p;
    std::vector<Vec3> pv;
    for (auto& q : p) {
      q = random_vec(rng, 3.0);
      pv.push_back(q);
    }
    const Eigen::Matrix<double, 5, 1> w = tet_pair_weights(p);
    Vec3 sum = Vec3::Zero();
    for (int i = 0; i < 5; ++i) sum += w[i] * p[i];
    EXPECT_LT(sum.norm(), 1e-12 * 3.0);
    EXPECT_LE(std::abs(w.sum()), 1e-12);
    EXPECT_LE(std::abs(w.squaredNorm() - 1.0), 1e-12);
    EXPECT_LT((w - oracles::nullspace_weights(pv)).norm(), 1e-12);
  }
}

TEST(TetPairWeights, SymmetricLayoutResolvedByOracle) {
  // p5 = p1 + p2 - p3 - p4 style layout
  const Vec3 p1(1, 0, 0), p2(0, 1, 0), p3(0, 0, 1), p4(0.2, 0.3, 0.1);
  const std::array<Vec3, 5> p{p1, p2, p3, p4, p1 + p2 - p3 - p4};
  const Eigen::Matrix<double, 5, 1> w = tet_pair_weights(p);
  const Eigen::VectorXd o = oracles::nullspace_weights({p.begin(), p.end()});
  EXPECT_LT((w - o).norm(), 1e-12);
  Vec3 sum = Vec3::Zero();
  for (int i = 0; i < 5; ++i) sum += w[i] * p[i];
  EXPECT_LT(sum.norm(), 1e-12);
  EXPECT_LE(std::abs(w.sum()), 1e-12);
}

TEST(TetPairWeights, RigidMotionKeepsWeights) {
  std::mt19937_64 rng(13);
  std::array<Vec3, 5> p, q;
  const Eigen::Matrix3d r = random_rotation(rng);
  const Vec3 t = random_vec(rng, 20.0);
  for (int i = 0; i < 5; ++i) {
    p[i] = random_vec(rng);
    q[i] = r * p[i] + t;
  }
  EXPECT_LT((tet_pair_weights(p) - tet_pair_weights(q)).norm(), 1e-10);
}

TEST(Planar, KernelHoldsReferenceAndAffineImages) {
  const TriMesh m = synth::grid_sheet();
  const Regularizer r = build_planar(m, build_topology(m));
  EXPECT_EQ(r.mode, RegularizerMode::planar);
  const Eigen::VectorXd x = m.coords();
  const double na = op_norm(r.a_full);
  EXPECT_LE((r.a_full * x).norm(), 1e-8 * na * x.norm());
  for (int d = 0; d < 3; ++d) {
    EXPECT_LE((r.a_prime * x.segment(d * 99, 99)).norm(), 1e-8 * na * x.norm());
  }
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd y = transform(x, random_affine(rng), random_vec(rng, 100.0));
    EXPECT_LE((r.a_full * y).norm(), 1e-8 * na * y.norm());
  }
}

TEST(Planar, OneRowPerInteriorEdge) {
  const TriMesh m = synth::grid_sheet();
  const Topology t = build_topology(m);
  const Regularizer r = build_planar(m, t);
  EXPECT_EQ(r.rows(), 99 + 160 - 1 - t.num_boundary_edges());
  EXPECT_EQ(r.rows(), static_cast<int>(t.interior_edges.size()));
  const Eigen::MatrixXd a(r.a_prime);
  for (int row = 0; row < a.rows(); ++row) {
    EXPECT_LT(std::abs(a.row(row).sum()), 1e-12);
    EXPECT_NEAR(a.row(row).norm(), 1.0, 1e-12);
  }
}

TEST(Planar, KroneckerStructure) {
  const TriMesh m = synth::grid_sheet(5, 4);
  const Regularizer r = build_planar(m, build_topology(m));
  const Eigen::MatrixXd full(r.a_full);
  const Eigen::MatrixXd a(r.a_prime);
  const Eigen::Index R = a.rows(), n = a.cols();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Eigen::MatrixXd blk = full.block(i * R, j * n, R, n);
      if (i == j) EXPECT_EQ(blk, a);
      else EXPECT_EQ(blk.norm(), 0.0);
    }
  }
  EXPECT_EQ(Eigen::MatrixXd(kron_identity3(r.a_prime)), full);
}

TEST(Planar, BendingIncreasesNorm) {
  const TriMesh m = synth::grid_sheet();
  const Regularizer r = build_planar(m, build_topology(m));
  double last = 0.0;
  for (double radius : {1000.0, 500.0, 300.0, 200.0, 120.0}) {
    synth::DeformParams p;
    p.family = synth::DeformFamily::cylinder_bend;
    p.bend_radius = radius;
    const double n = (r.a_full * synth::deform(m, p)).norm();
    EXPECT_GT(n, last);
    last = n;
  }
}

TEST(Planar, CurvedReferenceRejected) {
  const TriMesh m = synth::half_cylinder();
  try {
    build_planar(m, build_topology(m));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPlanar);
  }
}

TEST(VirtualVertices, EquilateralTriangle) {
  TriMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2.0, 0)};
  m.facets = {{0, 1, 2}};
  const VirtualAugmentation aug = add_virtual_vertices(m, 1.0);
  ASSERT_EQ(aug.virtual_vertices.size(), 2u);
  const Vec3 centroid(0.5, std::sqrt(3.0) / 6.0, 0.0);
  const double offset = std::sqrt(std::sqrt(3.0) / 2.0);
  EXPECT_NEAR(offset, 0.9306, 1e-4);
  EXPECT_LT((aug.virtual_vertices[0] - (centroid + Vec3(0, 0, offset))).norm(), 1e-12);
  EXPECT_LT((aug.virtual_vertices[1] - (centroid - Vec3(0, 0, offset))).norm(), 1e-12);
  EXPECT_EQ(aug.index_of(0, 0), 3);
  EXPECT_EQ(aug.index_of(0, 1), 4);
}

TEST(VirtualVertices, ZeroSigmaCollapsesOntoCentroid) {
  const TriMesh m = single_triangle();
  const VirtualAugmentation aug = add_virtual_vertices(m, 0.0);
  EXPECT_EQ(aug.virtual_vertices[0], aug.virtual_vertices[1]);
  EXPECT_THROW(build_nonplanar(m, build_topology(m), 0.0), Error);
}

TEST(VirtualVertices, CountAndPositiveVolume) {
  const TriMesh m = synth::half_cylinder();
  const VirtualAugmentation aug = add_virtual_vertices(m, 1.0);
  EXPECT_EQ(aug.virtual_vertices.size(), 2u * m.facets.size());
  auto at = [&](int i) { return i < aug.num_real ? m.vertices[i] : aug.virtual_vertices[i - aug.num_real]; };
  for (const auto& t : aug.tetrahedra) {
    const double vol = (at(t[1]) - at(t[0])).cross(at(t[2]) - at(t[0])).dot(at(t[3]) - at(t[0]));
    EXPECT_GT(std::abs(vol), 0.0);
  }
}

TEST(TetPairs, SingleFacet) {
  const TriMesh m = single_triangle();
  const auto pairs = enumerate_tet_pairs(add_virtual_vertices(m, 1.0), m, build_topology(m));
  ASSERT_EQ(pairs.size(), 1u);
  int real = 0, virt = 0;
  for (int v : pairs[0].vertices) (v < 3 ? real : virt) += 1;
  EXPECT_EQ(real, 3);
  EXPECT_EQ(virt, 2);
}

TEST(TetPairs, TwoAdjacentFacets) {
  const TriMesh m = two_triangles();
  const auto pairs = enumerate_tet_pairs(add_virtual_vertices(m, 1.0), m, build_topology(m));
  EXPECT_EQ(pairs.size(), 2u + 4u);
  for (const auto& p : pairs) {
    std::array<int, 5> v = p.vertices;
    std::sort(v.begin(), v.end());
    EXPECT_EQ(std::adjacent_find(v.begin(), v.end()), v.end());
  }
}

TEST(Nonplanar, ReferenceInKernel) {
  QuietWarnings quiet;
  for (const TriMesh& m : {synth::half_cylinder(), synth::sphere_patch(), synth::icosphere(1, 30.0)}) {
    const Regularizer r = build_nonplanar(m, build_topology(m), 1.0);
    const Eigen::VectorXd x = m.coords();
    EXPECT_LE((r.a_full * x).norm(), 1e-8 * op_norm(r.a_full) * x.norm()) << m.name;
  }
}

TEST(Nonplanar, RigidMotionInvariance) {
  QuietWarnings quiet;
  const TriMesh m = synth::half_cylinder();
  const Regularizer r = build_nonplanar(m, build_topology(m), 1.0);
  std::mt19937_64 rng(6);
  synth::DeformParams p;
  p.family = synth::DeformFamily::cosine_wave;
  p.wave_amplitude = 8.0;
  const Eigen::VectorXd x = synth::deform(m, p);
  const double ax = (r.a_full * x).norm();
  ASSERT_GT(ax, 0.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd y = transform(x, random_rotation(rng), random_vec(rng, 200.0));
    EXPECT_LE(std::abs((r.a_full * y).norm() - ax), 1e-8 * ax);
  }
}

TEST(Nonplanar, FourZeroSingularValues) {
  QuietWarnings quiet;
  const TriMesh m = synth::sphere_patch();
  const Eigen::VectorXd s = normalized_spectrum(build_nonplanar(m, build_topology(m), 1.0).a_prime);
  ASSERT_GE(s.size(), 5);
  EXPECT_DOUBLE_EQ(s[s.size() - 1], 1.0);
  for (int i = 0; i < 4; ++i) EXPECT_LT(s[i], 1e-8);
}

TEST(Nonplanar, SpectraSuperposeForLargeSigma) {
  QuietWarnings quiet;
  const TriMesh m = synth::icosphere(2, 36.76);
  const Topology t = build_topology(m);
  const Eigen::VectorXd s1 = normalized_spectrum(build_nonplanar(m, t, 1.0).a_prime);
  for (double sigma : {2.0, 5.0}) {
    const Eigen::VectorXd s = normalized_spectrum(build_nonplanar(m, t, sigma).a_prime);
    ASSERT_EQ(s.size(), s1.size());
    EXPECT_LE((s - s1).cwiseAbs().maxCoeff(), 0.02) << "sigma " << sigma;
  }
}

TEST(BuildRegularizer, AutoModePicksPlanarForFlatSheets) {
  QuietWarnings quiet;
  const TriMesh flat = synth::grid_sheet();
  EXPECT_EQ(build_regularizer(flat, build_topology(flat), std::nullopt, 1.0).mode, RegularizerMode::planar);
  const TriMesh curved = synth::half_cylinder();
  EXPECT_EQ(build_regularizer(curved, build_topology(curved), std::nullopt, 1.0).mode,
            RegularizerMode::nonplanar);
}
