#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lapmesh {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Facet = std::array<int, 3>;

// Coordinate vectors are stored coordinate-blocked: x = [X_0..X_{n-1},
// Y_0..Y_{n-1}, Z_0..Z_{n-1}]. With this layout the full regularizer is the
// block-diagonal I_3 (x) A' and every per-coordinate operator acts on one
// contiguous segment.

inline Vec3 vertex_at(const Eigen::VectorXd& x, int num_vertices, int i) {
  return {x[i], x[num_vertices + i], x[2 * num_vertices + i]};
}

inline void set_vertex(Eigen::VectorXd& x, int num_vertices, int i, const Vec3& v) {
  x[i] = v.x();
  x[num_vertices + i] = v.y();
  x[2 * num_vertices + i] = v.z();
}

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Facet> facets;
  std::string name;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_facets() const { return static_cast<int>(facets.size()); }

  /// Reference coordinate vector (blocked layout).
  Eigen::VectorXd coords() const;

  /// Copy of this mesh with vertex positions taken from `x`.
  TriMesh with_coords(const Eigen::VectorXd& x) const;

  double facet_area(int f) const;
  double bbox_diagonal() const;
};

/// Throws DegenerateFacet / FacetOutOfRange when the facet list is unusable.
void validate(const TriMesh& mesh);

struct Edge {
  int a = 0;  // a < b
  int b = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Two facets sharing an interior edge. `quad` lists the four vertices in the
/// order used to build regularizer rows: opposite vertex of `f0`, the shared
/// edge endpoints, opposite vertex of `f1`.
struct FacetPair {
  int f0 = -1;
  int f1 = -1;
  int edge = -1;
  std::array<int, 4> quad{};
};

struct Topology {
  std::vector<Edge> edges;                     // lexicographic
  std::vector<std::array<int, 2>> edge_facets;  // second entry -1 on the boundary
  std::vector<int> interior_edges;             // indices into `edges`
  std::vector<FacetPair> facet_pairs;          // one per interior edge, same order
  std::vector<double> ref_edge_lengths;

  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_boundary_edges() const { return num_edges() - static_cast<int>(interior_edges.size()); }
  double mean_edge_length() const;
};

/// Enumerates edges, interior facet pairs and reference lengths.
/// Throws NonManifold when an edge has more than two incident facets.
Topology build_topology(const TriMesh& mesh);

int euler_characteristic(const TriMesh& mesh, const Topology& topo);

struct BaryPoint {
  int facet = 0;
  Vec3 b = Vec3::Constant(1.0 / 3.0);
};

/// sum_i b_i v_{f,i} evaluated on the coordinate vector `x` (not necessarily
/// the reference).
Vec3 bary_to_world(const TriMesh& mesh, const BaryPoint& pt, const Eigen::VectorXd& x);

double mean_edge_length(const Topology& topo, const Eigen::VectorXd& x, int num_vertices);

}  // namespace lapmesh
