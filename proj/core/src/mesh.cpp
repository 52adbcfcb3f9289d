#include "lapmesh/mesh.hpp"

#include <algorithm>
#include <map>

#include <Eigen/Geometry>
#include <fmt/format.h>

#include "lapmesh/error.hpp"

namespace lapmesh {

Eigen::VectorXd TriMesh::coords() const {
  const int n = num_vertices();
  Eigen::VectorXd x(3 * n);
  for (int i = 0; i < n; ++i) set_vertex(x, n, i, vertices[i]);
  return x;
}

TriMesh TriMesh::with_coords(const Eigen::VectorXd& x) const {
  TriMesh out = *this;
  const int n = num_vertices();
  for (int i = 0; i < n; ++i) out.vertices[i] = vertex_at(x, n, i);
  return out;
}

double TriMesh::facet_area(int f) const {
  const auto& t = facets[f];
  const Vec3 e1 = vertices[t[1]] - vertices[t[0]];
  const Vec3 e2 = vertices[t[2]] - vertices[t[0]];
  return 0.5 * e1.cross(e2).norm();
}

double TriMesh::bbox_diagonal() const {
  if (vertices.empty()) return 0.0;
  Vec3 lo = vertices.front(), hi = vertices.front();
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

void validate(const TriMesh& mesh) {
  const int n = mesh.num_vertices();
  const double scale = std::max(mesh.bbox_diagonal(), 1e-300);
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const auto& t = mesh.facets[f];
    for (int k : t) {
      if (k < 0 || k >= n) {
        throw Error(ErrorCode::FacetOutOfRange,
                    fmt::format("facet {} references vertex {} (mesh has {})", f, k, n));
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw Error(ErrorCode::DegenerateFacet, fmt::format("facet {} repeats a vertex", f));
    }
    if (mesh.facet_area(f) <= 1e-14 * scale * scale) {
      throw Error(ErrorCode::DegenerateFacet, fmt::format("facet {} has zero area", f));
    }
  }
}

namespace {

// True when the facet visits a then b in its winding order.
bool traverses(const Facet& t, int a, int b) {
  for (int k = 0; k < 3; ++k) {
    if (t[k] == a && t[(k + 1) % 3] == b) return true;
  }
  return false;
}

}  // namespace

double Topology::mean_edge_length() const {
  if (ref_edge_lengths.empty()) return 0.0;
  double sum = 0.0;
  for (double l : ref_edge_lengths) sum += l;
  return sum / static_cast<double>(ref_edge_lengths.size());
}

Topology build_topology(const TriMesh& mesh) {
  validate(mesh);

  std::map<Edge, std::vector<int>> incidence;
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const auto& t = mesh.facets[f];
    for (int k = 0; k < 3; ++k) {
      const int i = t[k], j = t[(k + 1) % 3];
      incidence[Edge{std::min(i, j), std::max(i, j)}].push_back(f);
    }
  }

  Topology topo;
  topo.edges.reserve(incidence.size());
  for (auto& [edge, facets] : incidence) {
    if (facets.size() > 2) {
      throw Error(ErrorCode::NonManifold,
                  fmt::format("edge ({}, {}) has {} incident facets", edge.a, edge.b, facets.size()));
    }
    std::sort(facets.begin(), facets.end());
    const int e = static_cast<int>(topo.edges.size());
    topo.edges.push_back(edge);
    topo.edge_facets.push_back({facets[0], facets.size() == 2 ? facets[1] : -1});
    topo.ref_edge_lengths.push_back((mesh.vertices[edge.a] - mesh.vertices[edge.b]).norm());

    if (facets.size() == 2) {
      if (traverses(mesh.facets[facets[0]], edge.a, edge.b) ==
          traverses(mesh.facets[facets[1]], edge.a, edge.b)) {
        throw Error(ErrorCode::NonManifold,
                    fmt::format("facets {} and {} are inconsistently oriented", facets[0], facets[1]));
      }
      topo.interior_edges.push_back(e);
      auto opposite = [&](int f) {
        for (int k : mesh.facets[f]) {
          if (k != edge.a && k != edge.b) return k;
        }
        return -1;
      };
      FacetPair pair;
      pair.f0 = facets[0];
      pair.f1 = facets[1];
      pair.edge = e;
      pair.quad = {opposite(facets[0]), edge.a, edge.b, opposite(facets[1])};
      topo.facet_pairs.push_back(pair);
    }
  }
  return topo;
}

int euler_characteristic(const TriMesh& mesh, const Topology& topo) {
  return mesh.num_vertices() - topo.num_edges() + mesh.num_facets();
}

Vec3 bary_to_world(const TriMesh& mesh, const BaryPoint& pt, const Eigen::VectorXd& x) {
  if (pt.facet < 0 || pt.facet >= mesh.num_facets()) {
    throw Error(ErrorCode::FacetOutOfRange,
                fmt::format("facet {} out of range [0, {})", pt.facet, mesh.num_facets()));
  }
  const int n = mesh.num_vertices();
  const auto& t = mesh.facets[pt.facet];
  return pt.b[0] * vertex_at(x, n, t[0]) + pt.b[1] * vertex_at(x, n, t[1]) +
         pt.b[2] * vertex_at(x, n, t[2]);
}

double mean_edge_length(const Topology& topo, const Eigen::VectorXd& x, int num_vertices) {
  if (topo.edges.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : topo.edges) {
    sum += (vertex_at(x, num_vertices, e.a) - vertex_at(x, num_vertices, e.b)).norm();
  }
  return sum / static_cast<double>(topo.edges.size());
}

}  // namespace lapmesh
