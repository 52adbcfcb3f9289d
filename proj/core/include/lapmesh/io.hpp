#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "lapmesh/controls.hpp"
#include "lapmesh/mesh.hpp"
#include "lapmesh/projection.hpp"

namespace lapmesh::io {

// Wavefront OBJ restricted to `v x y z` and `f i j k` records (1-based,
// triangles only). Comments and blank lines are skipped; anything else is a
// ParseError.
TriMesh parse_obj(std::istream& in, const std::string& name = "mesh");
TriMesh read_obj(const std::filesystem::path& path);
void write_obj(std::ostream& out, const TriMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);

// {"fx","fy","cx","cy","width","height"}; width/height optional.
Camera parse_camera_json(const std::string& text);
Camera read_camera_json(const std::filesystem::path& path);
void write_camera_json(const std::filesystem::path& path, const Camera& camera);

// CSV with header `facet,b1,b2,b3,u,v`; facet indices are 0-based.
CorrespondenceSet parse_correspondences_csv(std::istream& in, const Camera& camera);
CorrespondenceSet read_correspondences_csv(const std::filesystem::path& path,
                                           const Camera& camera);
void write_correspondences_csv(const std::filesystem::path& path, const CorrespondenceSet& corr);

// MatrixMarket: sparse matrices as `coordinate real general`, dense ones as
// `array real general` (column-major). Values written with 17 significant
// digits so a write/read round trip is exact.
void write_matrix_market(std::ostream& out, const Eigen::SparseMatrix<double>& m);
void write_matrix_market(const std::filesystem::path& path, const Eigen::SparseMatrix<double>& m);
void write_matrix_market(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::SparseMatrix<double> parse_matrix_market(std::istream& in);
Eigen::SparseMatrix<double> read_matrix_market(const std::filesystem::path& path);

// index,inlier (0/1) per correspondence.
void write_inlier_mask_csv(const std::filesystem::path& path, const std::vector<bool>& flags);
std::vector<bool> read_inlier_mask_csv(const std::filesystem::path& path);

// basis.json with the index set plus a MatrixMarket sidecar holding the
// per-coordinate N_v x N_c block of P.
void write_basis(const std::filesystem::path& json_path, const ControlBasis& basis,
                 std::uint64_t seed);
struct BasisFile {
  std::vector<int> indices;
  ControlStrategy selection = ControlStrategy::regular;
  Eigen::MatrixXd p_prime;
};
BasisFile read_basis(const std::filesystem::path& json_path);

// Rows of (index, value...) with a header; used for spectra and sweep tables.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lapmesh::io
