#include "lapmesh/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lapmesh/error.hpp"
#include "lapmesh/io.hpp"

namespace lapmesh::synth {

namespace fs = std::filesystem;

TriMesh grid_sheet(int nx, int ny, double width, double height) {
  if (nx < 2 || ny < 2 || !(width > 0.0) || !(height > 0.0)) {
    throw Error(ErrorCode::ParamOutOfRange, "grid sheet needs at least 2 x 2 vertices and a positive size");
  }
  TriMesh mesh;
  mesh.name = fmt::format("sheet_{}x{}", nx, ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      mesh.vertices.emplace_back(-0.5 * width + width * i / (nx - 1),
                                 -0.5 * height + height * j / (ny - 1), 0.0);
    }
  }
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int v00 = j * nx + i, v10 = v00 + 1, v01 = v00 + nx, v11 = v01 + 1;
      mesh.facets.push_back({v00, v10, v11});
      mesh.facets.push_back({v00, v11, v01});
    }
  }
  return mesh;
}

TriMesh half_cylinder(int n_around, int n_along, double radius, double length) {
  if (n_around < 3 || n_along < 2 || !(radius > 0.0) || !(length > 0.0)) {
    throw Error(ErrorCode::ParamOutOfRange, "half cylinder needs n_around >= 3, n_along >= 2");
  }
  TriMesh mesh;
  mesh.name = "half_cylinder";
  for (int j = 0; j < n_along; ++j) {
    const double y = -0.5 * length + length * j / (n_along - 1);
    for (int i = 0; i < n_around; ++i) {
      const double theta = -0.5 * std::numbers::pi + std::numbers::pi * i / (n_around - 1);
      mesh.vertices.emplace_back(radius * std::sin(theta), y, -radius * std::cos(theta));
    }
  }
  for (int j = 0; j + 1 < n_along; ++j) {
    for (int i = 0; i + 1 < n_around; ++i) {
      const int v00 = j * n_around + i, v10 = v00 + 1, v01 = v00 + n_around, v11 = v01 + 1;
      mesh.facets.push_back({v00, v11, v10});
      mesh.facets.push_back({v00, v01, v11});
    }
  }
  return mesh;
}

TriMesh sphere_patch(int rings, int segments, double radius, double half_angle) {
  if (rings < 1 || segments < 3 || !(radius > 0.0) || !(half_angle > 0.0) ||
      !(half_angle < std::numbers::pi)) {
    throw Error(ErrorCode::ParamOutOfRange, "sphere patch parameters out of range");
  }
  TriMesh mesh;
  mesh.name = "sphere_patch";
  mesh.vertices.emplace_back(0.0, 0.0, -radius);
  for (int r = 1; r <= rings; ++r) {
    const double phi = half_angle * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double psi = 2.0 * std::numbers::pi * s / segments;
      mesh.vertices.emplace_back(radius * std::sin(phi) * std::cos(psi),
                                 radius * std::sin(phi) * std::sin(psi), -radius * std::cos(phi));
    }
  }
  auto ring = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) mesh.facets.push_back({0, ring(1, s + 1), ring(1, s)});
  for (int r = 1; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      mesh.facets.push_back({ring(r, s), ring(r, s + 1), ring(r + 1, s + 1)});
      mesh.facets.push_back({ring(r, s), ring(r + 1, s + 1), ring(r + 1, s)});
    }
  }
  return mesh;
}

TriMesh icosphere(int subdivisions, double radius) {
  if (subdivisions < 0 || subdivisions > 6 || !(radius > 0.0)) {
    throw Error(ErrorCode::ParamOutOfRange, "icosphere needs 0..6 subdivisions and a positive radius");
  }
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                         {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                         {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Facet> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                          {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                          {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                          {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& p : v) p.normalize();
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int idx = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Facet> next;
    next.reserve(4 * f.size());
    for (const auto& tri : f) {
      const int a = mid(tri[0], tri[1]), b = mid(tri[1], tri[2]), c = mid(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  TriMesh mesh;
  mesh.name = fmt::format("icosphere_{}", subdivisions);
  for (const auto& p : v) mesh.vertices.push_back(radius * p);
  mesh.facets = std::move(f);
  return mesh;
}

const char* to_string(DeformFamily f) {
  switch (f) {
    case DeformFamily::rigid: return "rigid";
    case DeformFamily::cylinder_bend: return "cylinder_bend";
    case DeformFamily::cosine_wave: return "cosine_wave";
  }
  return "unknown";
}

DeformFamily parse_deform_family(const std::string& name) {
  if (name == "rigid") return DeformFamily::rigid;
  if (name == "cylinder_bend" || name == "cylinder-bend") return DeformFamily::cylinder_bend;
  if (name == "cosine_wave" || name == "cosine-wave") return DeformFamily::cosine_wave;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown deformation family '{}'", name));
}

Eigen::Matrix3d axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Eigen::VectorXd deform(const TriMesh& mesh, const DeformParams& params) {
  const int n = mesh.num_vertices();
  std::vector<Vec3> pts = mesh.vertices;
  if (params.family == DeformFamily::cylinder_bend) {
    double half_extent = 0.0;
    for (const auto& p : pts) half_extent = std::max(half_extent, std::abs(p.x()));
    if (!(params.bend_radius >= half_extent) || !(params.bend_radius > 0.0)) {
      throw Error(ErrorCode::ParamOutOfRange,
                  fmt::format("bend radius {} is below half the sheet width {}", params.bend_radius,
                              half_extent));
    }
    if (std::abs(params.bend_sign) != 1.0) {
      throw Error(ErrorCode::ParamOutOfRange, "bend sign must be +1 or -1");
    }
    if (std::isfinite(params.bend_radius)) {
      const double r = params.bend_radius;
      for (auto& p : pts) {
        const double theta = p.x() / r;
        p = Vec3(r * std::sin(theta), p.y(), p.z() + params.bend_sign * r * (1.0 - std::cos(theta)));
      }
    }
  } else if (params.family == DeformFamily::cosine_wave) {
    if (!(params.wave_length > 0.0) || !std::isfinite(params.wave_amplitude)) {
      throw Error(ErrorCode::ParamOutOfRange, "cosine wave needs a positive wave length");
    }
    for (auto& p : pts) {
      p.z() += params.wave_amplitude * std::cos(2.0 * std::numbers::pi * p.x() / params.wave_length);
    }
  }
  const double det = params.rotation.determinant();
  if (std::abs(det - 1.0) > 1e-9 ||
      !(params.rotation.transpose() * params.rotation).isIdentity(1e-9)) {
    throw Error(ErrorCode::ParamOutOfRange, "rotation must be orthonormal with determinant 1");
  }
  Eigen::VectorXd x(3 * n);
  for (int i = 0; i < n; ++i) set_vertex(x, n, i, params.rotation * pts[i] + params.translation);
  return x;
}

Sample sample_correspondences(const TriMesh& mesh, const Eigen::VectorXd& gt, const Camera& camera,
                              const SampleParams& params) {
  if (params.n_inliers < 1 || !(params.outlier_ratio >= 0.0) || !(params.outlier_ratio < 1.0) ||
      !(params.noise_sigma >= 0.0)) {
    throw Error(ErrorCode::ParamOutOfRange, "need n_inliers >= 1, ratio in [0,1), sigma >= 0");
  }
  const int nv = mesh.num_vertices();
  std::vector<double> weights(mesh.num_facets(), 0.0);
  for (int f = 0; f < mesh.num_facets(); ++f) {
    weights[f] = mesh.facet_area(f);
    if (params.cull_backfaces) {
      const auto& t = mesh.facets[f];
      const Vec3 a = vertex_at(gt, nv, t[0]), b = vertex_at(gt, nv, t[1]), c = vertex_at(gt, nv, t[2]);
      if ((b - a).cross(c - a).dot((a + b + c) / 3.0) >= 0.0) weights[f] = 0.0;
    }
  }
  if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; })) {
    throw Error(ErrorCode::InvalidArgument, "no facet is visible from the camera");
  }

  const int n_out = static_cast<int>(
      std::lround(params.n_inliers * params.outlier_ratio / (1.0 - params.outlier_ratio)));
  std::mt19937_64 rng(params.seed);
  std::vector<bool> is_outlier(params.n_inliers + n_out, false);
  std::fill(is_outlier.begin() + params.n_inliers, is_outlier.end(), true);
  std::shuffle(is_outlier.begin(), is_outlier.end(), rng);

  std::discrete_distribution<int> pick_facet(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double img_w = camera.image_size ? camera.image_size->x() : 2.0 * camera.cx();
  const double img_h = camera.image_size ? camera.image_size->y() : 2.0 * camera.cy();

  Sample out;
  out.corr.camera = camera;
  out.truth_outlier = is_outlier;
  out.corr.items.reserve(is_outlier.size());
  for (bool outlier : is_outlier) {
    Correspondence c;
    c.point.facet = pick_facet(rng);
    const double s = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    c.point.b = Vec3(1.0 - s, s * (1.0 - r2), s * r2);
    if (outlier) {
      c.pixel = Vec2(img_w * unit(rng), img_h * unit(rng));
    } else {
      const auto px = camera.project(bary_to_world(mesh, c.point, gt));
      if (!px) throw Error(ErrorCode::AllBehindCamera, "ground-truth point behind the camera");
      const double nu = noise(rng), nv_ = noise(rng);
      c.pixel = *px + params.noise_sigma * Vec2(nu, nv_);
    }
    out.corr.items.push_back(c);
  }
  return out;
}

double mesh_diameter(const TriMesh& mesh) {
  double best = 0.0;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < mesh.vertices.size(); ++j) {
      best = std::max(best, (mesh.vertices[i] - mesh.vertices[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

namespace {

double mean_scaled_error(const Eigen::VectorXd& x, const Eigen::VectorXd& gt, int n, double s) {
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += (s * vertex_at(x, n, i) - vertex_at(gt, n, i)).norm();
  return sum / n;
}

}  // namespace

Metrics evaluate(const Eigen::VectorXd& x, const Scenario& scenario,
                 const std::optional<std::vector<bool>>& detected_inliers) {
  const int n = scenario.mesh.num_vertices();
  if (x.size() != 3 * n || scenario.gt.size() != 3 * n) {
    throw Error(ErrorCode::InvalidArgument, "coordinate vector does not match the mesh");
  }
  Metrics m;
  std::vector<double> err(n);
  for (int i = 0; i < n; ++i) err[i] = (vertex_at(x, n, i) - vertex_at(scenario.gt, n, i)).norm();
  double sum = 0.0;
  for (double e : err) sum += e;
  m.mean_error_3d = sum / n;
  std::vector<double> sorted = err;
  std::sort(sorted.begin(), sorted.end());
  m.median_error_3d = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  // The mean error is convex in the scale, so golden-section search suffices.
  double lo = 0.8, hi = 1.25;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = mean_scaled_error(x, scenario.gt, n, a), fb = mean_scaled_error(x, scenario.gt, n, b);
  for (int it = 0; it < 80; ++it) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = mean_scaled_error(x, scenario.gt, n, a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = mean_scaled_error(x, scenario.gt, n, b);
    }
  }
  m.best_scale = 0.5 * (lo + hi);
  m.scaled_mean_error_3d = std::min(mean_scaled_error(x, scenario.gt, n, m.best_scale), m.mean_error_3d);
  if (m.scaled_mean_error_3d == m.mean_error_3d) m.best_scale = 1.0;

  const Eigen::MatrixX2d proj = project_vertices(scenario.camera, x, n);
  const Eigen::MatrixX2d proj_gt = project_vertices(scenario.camera, scenario.gt, n);
  int within = 0;
  for (int i = 0; i < n; ++i) {
    const double d = (proj.row(i) - proj_gt.row(i)).norm();
    if (d <= 2.0) ++within;  // NaN rows (behind the camera) never count
  }
  m.vertex_success_fraction = static_cast<double>(within) / n;
  m.success = m.vertex_success_fraction >= 0.9;

  const auto errors = reprojection_errors(scenario.mesh, scenario.camera, scenario.corr, x);
  double sq = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (k < scenario.truth_outlier.size() && scenario.truth_outlier[k]) continue;
    sq += errors[k] * errors[k];
    ++count;
  }
  m.reprojection_rms = count ? std::sqrt(sq / count) : 0.0;

  if (detected_inliers) {
    const auto& det = *detected_inliers;
    int tp = 0, detected = 0, truth = 0;
    for (std::size_t k = 0; k < det.size(); ++k) {
      const bool true_inlier = k >= scenario.truth_outlier.size() || !scenario.truth_outlier[k];
      detected += det[k] ? 1 : 0;
      truth += true_inlier ? 1 : 0;
      tp += (det[k] && true_inlier) ? 1 : 0;
    }
    m.precision = detected ? static_cast<double>(tp) / detected : 0.0;
    m.recall = truth ? static_cast<double>(tp) / truth : 1.0;
  }
  return m;
}

Camera default_camera() {
  return Camera::from_intrinsics(528.0, 528.0, 320.0, 240.0, Eigen::Vector2i(640, 480));
}

Scenario bent_sheet_scene(const SheetSceneParams& params) {
  Scenario sc;
  sc.mesh = grid_sheet(params.nx, params.ny, params.width, params.height);
  sc.camera = default_camera();
  DeformParams def;
  def.family = params.family;
  def.bend_radius = params.bend_radius;
  def.bend_sign = params.bend_sign;
  def.wave_amplitude = params.wave_amplitude;
  def.wave_length = params.wave_length;
  def.rotation = axis_angle(Vec3::UnitX(), params.tilt) * axis_angle(Vec3::UnitY(), params.yaw);
  def.translation = Vec3(0.0, 0.0, params.depth);
  sc.gt = deform(sc.mesh, def);
  Sample s = sample_correspondences(sc.mesh, sc.gt, sc.camera, params.sample);
  sc.corr = std::move(s.corr);
  sc.truth_outlier = std::move(s.truth_outlier);
  sc.seed = params.sample.seed;
  sc.name = fmt::format("sheet_{}", to_string(params.family));
  return sc;
}

BallScene ball_scene(const BallSceneParams& params) {
  if (!(params.diameter > 0.0) || !(params.bat_radius > 0.0) || params.approach_frames < 0 ||
      !(params.penetration >= 0.0) || !(params.penetration < params.diameter)) {
    throw Error(ErrorCode::ParamOutOfRange, "ball scene parameters out of range");
  }
  BallScene scene;
  const double rb = 0.5 * params.diameter;
  scene.mesh = icosphere(params.subdivisions, rb);
  scene.mesh.name = "ball";
  scene.camera = Camera::from_intrinsics(params.focal, params.focal, 0.5 * params.width,
                                         0.5 * params.height,
                                         Eigen::Vector2i(params.width, params.height));
  scene.bat.point = Vec3(60.0, 0.0, params.depth);
  scene.bat.direction = Vec3(0.1, 1.0, 0.05).normalized();
  const Vec3 u = Vec3(1.0, 0.08, 0.25).normalized();
  const Eigen::Matrix3d across = Eigen::Matrix3d::Identity() - scene.bat.direction * scene.bat.direction.transpose();
  const Vec3 u_perp = (across * u).normalized();
  const Vec3 impact = scene.bat.point - (rb + params.bat_radius - params.penetration) * u_perp;
  scene.bat.radius = params.bat_radius;
  scene.trajectory = Line3{impact, u};

  const int nv = scene.mesh.num_vertices();
  const Vec3 spin_axis = Vec3(0.3, 1.0, 0.2).normalized();
  for (int k = params.approach_frames; k >= 0; --k) {
    DeformParams def;
    def.rotation = axis_angle(spin_axis, 0.15 * k);
    def.translation = impact - k * params.frame_spacing * u;
    Eigen::VectorXd gt = deform(scene.mesh, def);
    if (k == 0) {
      for (int i = 0; i < nv; ++i) {
        const Vec3 p = vertex_at(gt, nv, i);
        const Vec3 radial = across * (p - scene.bat.point);
        const double rho = radial.norm();
        if (rho < params.bat_radius) {
          set_vertex(gt, nv, i, p + (params.bat_radius - rho) * radial.normalized());
        }
      }
    }
    BallFrame frame;
    frame.deformed = k == 0;
    frame.scene.name = fmt::format("ball_frame_{}", params.approach_frames - k);
    frame.scene.mesh = scene.mesh;
    frame.scene.camera = scene.camera;
    frame.scene.gt = std::move(gt);
    SampleParams sp = params.sample;
    sp.seed = splitmix64(params.sample.seed + static_cast<std::uint64_t>(k));
    Sample s = sample_correspondences(frame.scene.mesh, frame.scene.gt, scene.camera, sp);
    frame.scene.corr = std::move(s.corr);
    frame.scene.truth_outlier = std::move(s.truth_outlier);
    frame.scene.seed = sp.seed;
    scene.frames.push_back(std::move(frame));
  }
  return scene;
}

void write_scenario(const fs::path& dir, const Scenario& scenario) {
  fs::create_directories(dir);
  io::write_obj(dir / "reference.obj", scenario.mesh);
  io::write_obj(dir / "gt.obj", scenario.mesh.with_coords(scenario.gt));
  io::write_camera_json(dir / "camera.json", scenario.camera);
  io::write_correspondences_csv(dir / "correspondences.csv", scenario.corr);
  std::string truth = "index,outlier\n";
  for (std::size_t k = 0; k < scenario.truth_outlier.size(); ++k) {
    truth += fmt::format("{},{}\n", k, scenario.truth_outlier[k] ? 1 : 0);
  }
  io::write_text(dir / "truth.csv", truth);
  nlohmann::json j = {{"name", scenario.name},
                      {"seed", scenario.seed},
                      {"num_vertices", scenario.mesh.num_vertices()},
                      {"num_correspondences", scenario.corr.size()},
                      {"files",
                       {{"reference", "reference.obj"},
                        {"ground_truth", "gt.obj"},
                        {"camera", "camera.json"},
                        {"correspondences", "correspondences.csv"},
                        {"truth", "truth.csv"}}}};
  io::write_text(dir / "scenario.json", j.dump(2) + "\n");
}

Scenario read_scenario(const fs::path& dir) {
  Scenario sc;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(dir / "scenario.json"));
    sc.name = j.value("name", std::string("scenario"));
    sc.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", (dir / "scenario.json").string(), e.what()));
  }
  sc.mesh = io::read_obj(dir / "reference.obj");
  const TriMesh gt = io::read_obj(dir / "gt.obj");
  if (gt.num_vertices() != sc.mesh.num_vertices()) {
    throw Error(ErrorCode::ParseError, "ground-truth mesh does not match the reference");
  }
  sc.gt = gt.coords();
  sc.camera = io::read_camera_json(dir / "camera.json");
  sc.corr = io::read_correspondences_csv(dir / "correspondences.csv", sc.camera);
  sc.truth_outlier.assign(sc.corr.items.size(), false);
  const fs::path truth = dir / "truth.csv";
  if (fs::exists(truth)) {
    std::istringstream in(io::read_text(truth));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      const std::size_t k = std::stoul(line.substr(0, comma));
      if (k < sc.truth_outlier.size()) sc.truth_outlier[k] = line.substr(comma + 1) == "1";
    }
  }
  return sc;
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 json_vec(const nlohmann::json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

}  // namespace

void write_ball_scene(const fs::path& dir, const BallScene& scene) {
  fs::create_directories(dir);
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t k = 0; k < scene.frames.size(); ++k) {
    const std::string name = fmt::format("frame_{}", k);
    write_scenario(dir / name, scene.frames[k].scene);
    frames.push_back({{"dir", name}, {"deformed", scene.frames[k].deformed}});
  }
  nlohmann::json j = {
      {"bat",
       {{"point", vec_json(scene.bat.point)},
        {"direction", vec_json(scene.bat.direction)},
        {"radius", scene.bat.radius}}},
      {"trajectory",
       {{"point", vec_json(scene.trajectory.point)},
        {"direction", vec_json(scene.trajectory.direction)}}},
      {"frames", frames}};
  io::write_text(dir / "ball.json", j.dump(2) + "\n");
}

BallScene read_ball_scene(const fs::path& dir) {
  const fs::path path = dir / "ball.json";
  BallScene scene;
  std::vector<std::pair<std::string, bool>> frames;
  try {
    const auto j = nlohmann::json::parse(io::read_text(path));
    scene.bat.point = json_vec(j.at("bat").at("point"));
    scene.bat.direction = json_vec(j.at("bat").at("direction")).normalized();
    scene.bat.radius = j.at("bat").at("radius").get<double>();
    scene.trajectory.point = json_vec(j.at("trajectory").at("point"));
    scene.trajectory.direction = json_vec(j.at("trajectory").at("direction")).normalized();
    for (const auto& f : j.at("frames")) {
      frames.emplace_back(f.at("dir").get<std::string>(), f.value("deformed", false));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", path.string(), e.what()));
  }
  if (frames.empty()) throw Error(ErrorCode::ParseError, fmt::format("{}: no frames", path.string()));
  for (const auto& [name, deformed] : frames) {
    BallFrame f;
    f.scene = read_scenario(dir / name);
    f.deformed = deformed;
    scene.frames.push_back(std::move(f));
  }
  scene.mesh = scene.frames.front().scene.mesh;
  scene.camera = scene.frames.front().scene.camera;
  return scene;
}

}  // namespace lapmesh::synth
