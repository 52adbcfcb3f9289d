#include "lapmesh/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lapmesh/error.hpp"

namespace lapmesh::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view s, const std::string& where) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: bad number '{}'", where, s));
  }
  return value;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open '{}' for reading", path.string()));
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot open '{}' for writing", path.string()));
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, fmt::format("write to '{}' failed", path.string()));
}

}  // namespace

TriMesh parse_obj(std::istream& in, const std::string& name) {
  TriMesh mesh;
  mesh.name = name;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = fmt::format("{}:{}", name, lineno);
    const auto tok = tokens(trim(line));
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() != 4) throw Error(ErrorCode::ParseError, where + ": vertex needs 3 coordinates");
      mesh.vertices.emplace_back(parse_number<double>(tok[1], where),
                                 parse_number<double>(tok[2], where),
                                 parse_number<double>(tok[3], where));
    } else if (tok[0] == "f") {
      if (tok.size() != 4) {
        throw Error(ErrorCode::ParseError, where + ": only triangular facets are supported");
      }
      Facet f{};
      for (int k = 0; k < 3; ++k) {
        const std::string_view idx = tok[k + 1];
        if (idx.find('/') != std::string_view::npos) {
          throw Error(ErrorCode::ParseError, where + ": texture/normal indices are not supported");
        }
        const int i = parse_number<int>(idx, where);
        if (i < 1) throw Error(ErrorCode::ParseError, where + ": facet indices are 1-based and positive");
        f[k] = i - 1;
      }
      mesh.facets.push_back(f);
    } else {
      throw Error(ErrorCode::ParseError,
                  fmt::format("{}: unsupported record '{}'", where, tok[0]));
    }
  }
  if (mesh.vertices.empty() || mesh.facets.empty()) {
    throw Error(ErrorCode::ParseError, name + ": mesh has no vertices or no facets");
  }
  validate(mesh);
  return mesh;
}

TriMesh read_obj(const fs::path& path) {
  auto in = open_in(path);
  return parse_obj(in, path.string());
}

void write_obj(std::ostream& out, const TriMesh& mesh) {
  if (!mesh.name.empty()) out << "# " << mesh.name << '\n';
  for (const auto& v : mesh.vertices) out << fmt::format("v {:.17g} {:.17g} {:.17g}\n", v.x(), v.y(), v.z());
  for (const auto& f : mesh.facets) out << fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
}

void write_obj(const fs::path& path, const TriMesh& mesh) {
  auto out = open_out(path);
  write_obj(out, mesh);
  finish(out, path);
}

Camera parse_camera_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("camera JSON: {}", e.what()));
  }
  auto num = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw Error(ErrorCode::ParseError, fmt::format("camera JSON: missing numeric '{}'", key));
    }
    return j[key].get<double>();
  };
  std::optional<Eigen::Vector2i> size;
  if (j.contains("width") || j.contains("height")) {
    size = Eigen::Vector2i(static_cast<int>(num("width")), static_cast<int>(num("height")));
  }
  return Camera::from_intrinsics(num("fx"), num("fy"), num("cx"), num("cy"), size);
}

Camera read_camera_json(const fs::path& path) {
  try {
    return parse_camera_json(read_text(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_camera_json(const fs::path& path, const Camera& camera) {
  json j = {{"fx", camera.fx()}, {"fy", camera.fy()}, {"cx", camera.cx()}, {"cy", camera.cy()}};
  if (camera.image_size) {
    j["width"] = camera.image_size->x();
    j["height"] = camera.image_size->y();
  }
  write_text(path, j.dump(2) + "\n");
}

CorrespondenceSet parse_correspondences_csv(std::istream& in, const Camera& camera) {
  CorrespondenceSet set;
  set.camera = camera;
  std::string line;
  if (!std::getline(in, line) || trim(line) != "facet,b1,b2,b3,u,v") {
    throw Error(ErrorCode::ParseError, "correspondence CSV must start with 'facet,b1,b2,b3,u,v'");
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = fmt::format("correspondences:{}", lineno);
    const auto f = split(trim(line), ',');
    if (f.size() != 6) throw Error(ErrorCode::ParseError, where + ": expected 6 fields");
    Correspondence c;
    c.point.facet = parse_number<int>(f[0], where);
    c.point.b = Vec3(parse_number<double>(f[1], where), parse_number<double>(f[2], where),
                     parse_number<double>(f[3], where));
    c.pixel = Vec2(parse_number<double>(f[4], where), parse_number<double>(f[5], where));
    if (!c.pixel.allFinite() || !c.point.b.allFinite()) {
      throw Error(ErrorCode::ParseError, where + ": non-finite value");
    }
    set.items.push_back(c);
  }
  if (set.items.empty()) throw Error(ErrorCode::ParseError, "correspondence CSV has no rows");
  return set;
}

CorrespondenceSet read_correspondences_csv(const fs::path& path, const Camera& camera) {
  auto in = open_in(path);
  try {
    return parse_correspondences_csv(in, camera);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_correspondences_csv(const fs::path& path, const CorrespondenceSet& corr) {
  auto out = open_out(path);
  out << "facet,b1,b2,b3,u,v\n";
  for (const auto& c : corr.items) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", c.point.facet, c.point.b[0],
                       c.point.b[1], c.point.b[2], c.pixel.x(), c.pixel.y());
  }
  finish(out, path);
}

void write_matrix_market(std::ostream& out, const Eigen::SparseMatrix<double>& m) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << fmt::format("{} {} {}\n", m.rows(), m.cols(), m.nonZeros());
  for (Eigen::Index col = 0; col < m.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, col); it; ++it) {
      out << fmt::format("{} {} {:.17g}\n", it.row() + 1, it.col() + 1, it.value());
    }
  }
}

void write_matrix_market(const fs::path& path, const Eigen::SparseMatrix<double>& m) {
  auto out = open_out(path);
  write_matrix_market(out, m);
  finish(out, path);
}

void write_matrix_market(const fs::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix array real general\n";
  out << fmt::format("{} {}\n", m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) out << fmt::format("{:.17g}\n", m(i, j));
  }
  finish(out, path);
}

Eigen::SparseMatrix<double> parse_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "MatrixMarket: empty input");
  const auto banner = tokens(trim(line));
  if (banner.size() != 5 || banner[0] != "%%MatrixMarket" || banner[1] != "matrix" ||
      banner[3] != "real" || banner[4] != "general") {
    throw Error(ErrorCode::ParseError, "MatrixMarket: only 'matrix coordinate|array real general'");
  }
  const bool dense = banner[2] == "array";
  if (!dense && banner[2] != "coordinate") {
    throw Error(ErrorCode::ParseError, "MatrixMarket: unknown format " + std::string(banner[2]));
  }
  do {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "MatrixMarket: missing size line");
  } while (trim(line).empty() || trim(line).front() == '%');
  const auto size = tokens(trim(line));
  if (size.size() != (dense ? 2u : 3u)) throw Error(ErrorCode::ParseError, "MatrixMarket: bad size line");
  const auto rows = parse_number<long>(size[0], "MatrixMarket");
  const auto cols = parse_number<long>(size[1], "MatrixMarket");
  const long count = dense ? rows * cols : parse_number<long>(size[2], "MatrixMarket");

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(count));
  long read = 0;
  while (read < count && std::getline(in, line)) {
    const auto t = tokens(trim(line));
    if (t.empty() || t[0].front() == '%') continue;
    if (dense) {
      if (t.size() != 1) throw Error(ErrorCode::ParseError, "MatrixMarket: bad array entry");
      const double v = parse_number<double>(t[0], "MatrixMarket");
      if (v != 0.0) triplets.emplace_back(read % rows, read / rows, v);
    } else {
      if (t.size() != 3) throw Error(ErrorCode::ParseError, "MatrixMarket: bad coordinate entry");
      const long i = parse_number<long>(t[0], "MatrixMarket") - 1;
      const long j = parse_number<long>(t[1], "MatrixMarket") - 1;
      if (i < 0 || i >= rows || j < 0 || j >= cols) {
        throw Error(ErrorCode::ParseError, "MatrixMarket: entry index out of range");
      }
      triplets.emplace_back(i, j, parse_number<double>(t[2], "MatrixMarket"));
    }
    ++read;
  }
  if (read != count) throw Error(ErrorCode::ParseError, "MatrixMarket: truncated entry list");
  Eigen::SparseMatrix<double> m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

Eigen::SparseMatrix<double> read_matrix_market(const fs::path& path) {
  auto in = open_in(path);
  return parse_matrix_market(in);
}

void write_inlier_mask_csv(const fs::path& path, const std::vector<bool>& flags) {
  auto out = open_out(path);
  out << "index,inlier\n";
  for (std::size_t k = 0; k < flags.size(); ++k) out << k << ',' << (flags[k] ? 1 : 0) << '\n';
  finish(out, path);
}

std::vector<bool> read_inlier_mask_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "index,inlier") {
    throw Error(ErrorCode::ParseError, path.string() + ": expected header 'index,inlier'");
  }
  std::vector<bool> flags;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 2) throw Error(ErrorCode::ParseError, path.string() + ": expected 2 fields");
    flags.push_back(parse_number<int>(f[1], path.string()) != 0);
  }
  return flags;
}

void write_basis(const fs::path& json_path, const ControlBasis& basis, std::uint64_t seed) {
  fs::path sidecar = json_path;
  sidecar.replace_extension(".P.mtx");
  write_matrix_market(sidecar, basis.p_prime);
  json j = {{"strategy", to_string(basis.selection)},
            {"seed", seed},
            {"num_vertices", basis.num_vertices()},
            {"num_controls", basis.num_controls()},
            {"indices", basis.indices},
            {"p_prime", sidecar.filename().string()}};
  write_text(json_path, j.dump(2) + "\n");
}

BasisFile read_basis(const fs::path& json_path) {
  json j;
  try {
    j = json::parse(read_text(json_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", json_path.string(), e.what()));
  }
  BasisFile out;
  try {
    out.indices = j.at("indices").get<std::vector<int>>();
    out.selection = parse_control_strategy(j.at("strategy").get<std::string>());
    const fs::path sidecar = json_path.parent_path() / j.at("p_prime").get<std::string>();
    out.p_prime = Eigen::MatrixXd(read_matrix_market(sidecar));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", json_path.string(), e.what()));
  }
  return out;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  auto out = open_out(path);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << fmt::format("{}", row[k]);
    out << '\n';
  }
  finish(out, path);
}

std::string read_text(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

}  // namespace lapmesh::io
