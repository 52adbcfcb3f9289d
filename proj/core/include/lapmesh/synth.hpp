#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lapmesh/mesh.hpp"
#include "lapmesh/projection.hpp"
#include "lapmesh/refine.hpp"

namespace lapmesh::synth {

// --- procedural meshes -----------------------------------------------------

/// nx x ny vertex grid spanning width x height in the z = 0 plane, centered
/// on the origin, normals along +z. 11 x 9 gives 99 vertices and 160 facets.
TriMesh grid_sheet(int nx = 11, int ny = 9, double width = 200.0, double height = 160.0);

/// Open half-cylinder shell around the y axis, bulging towards -z.
TriMesh half_cylinder(int n_around = 9, int n_along = 9, double radius = 80.0,
                      double length = 180.0);

/// Spherical cap of the given half-angle (radians) on a sphere of `radius`,
/// bulging towards -z.
TriMesh sphere_patch(int rings = 5, int segments = 16, double radius = 100.0,
                     double half_angle = 0.9);

/// Closed icosphere with outward normals.
TriMesh icosphere(int subdivisions, double radius);

// --- deformations ----------------------------------------------------------

enum class DeformFamily { rigid, cylinder_bend, cosine_wave };

const char* to_string(DeformFamily f);
DeformFamily parse_deform_family(const std::string& name);

struct DeformParams {
  DeformFamily family = DeformFamily::rigid;
  /// Cylinder bend around an axis parallel to y; must be at least half the
  /// sheet's x extent. Infinity means no bending.
  double bend_radius = std::numeric_limits<double>::infinity();
  /// +1 bends the sheet's ends towards +z, -1 towards -z.
  double bend_sign = 1.0;
  double wave_amplitude = 0.0;
  double wave_length = 100.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();
};

/// Deformed coordinates of the reference (blocked layout). The bend and wave
/// act on the reference first; rotation and translation are applied last for
/// every family. Throws ParamOutOfRange.
Eigen::VectorXd deform(const TriMesh& mesh, const DeformParams& params);

/// Rotation about `axis` by `angle` radians.
Eigen::Matrix3d axis_angle(const Vec3& axis, double angle);

// --- correspondences -------------------------------------------------------

struct SampleParams {
  int n_inliers = 100;
  double outlier_ratio = 0.0;  // fraction of the total, in [0, 1)
  double noise_sigma = 0.0;    // pixels, per axis
  std::uint64_t seed = 0;
  /// Skip facets facing away from the camera (closed meshes).
  bool cull_backfaces = false;
};

struct Sample {
  CorrespondenceSet corr;
  std::vector<bool> truth_outlier;
};

/// n_out = round(n_in * r / (1 - r)) outliers are mixed into the inliers in a
/// seeded random order. Outlier pixels are uniform over the image rectangle.
Sample sample_correspondences(const TriMesh& mesh, const Eigen::VectorXd& gt, const Camera& camera,
                              const SampleParams& params);

// --- scenarios and evaluation ------------------------------------------------

struct Scenario {
  std::string name;
  TriMesh mesh;
  Eigen::VectorXd gt;
  Camera camera;
  CorrespondenceSet corr;
  std::vector<bool> truth_outlier;
  std::uint64_t seed = 0;
};

struct Metrics {
  double mean_error_3d = 0.0;
  double median_error_3d = 0.0;
  double scaled_mean_error_3d = 0.0;  // after the scale search
  double best_scale = 1.0;
  double reprojection_rms = 0.0;      // over true inliers, pixels
  double vertex_success_fraction = 0.0;
  bool success = false;
  double precision = 1.0;  // of the detected inlier set
  double recall = 1.0;
};

/// Success means at least 90% of the vertices project within 2 px of the
/// ground-truth vertex projections. The scale search covers [0.8, 1.25].
Metrics evaluate(const Eigen::VectorXd& x, const Scenario& scenario,
                 const std::optional<std::vector<bool>>& detected_inliers = std::nullopt);

double mesh_diameter(const TriMesh& mesh);

// --- scene presets -----------------------------------------------------------

/// Pinhole camera with f = 528 px and a 640 x 480 image.
Camera default_camera();

struct SheetSceneParams {
  int nx = 11;
  int ny = 9;
  double width = 200.0;
  double height = 160.0;
  DeformFamily family = DeformFamily::cylinder_bend;
  double bend_radius = 200.0;
  double bend_sign = -1.0;
  double wave_amplitude = 10.0;
  double wave_length = 120.0;
  double depth = 600.0;
  double tilt = 0.35;  // radians about the x axis
  double yaw = 0.2;    // radians about the y axis
  SampleParams sample;
};

/// Deformed grid sheet in front of the default camera (cylinder bend unless
/// another family is chosen).
Scenario bent_sheet_scene(const SheetSceneParams& params);

struct BallFrame {
  Scenario scene;
  bool deformed = false;
};

struct BallSceneParams {
  double diameter = 73.52;
  int subdivisions = 2;
  double focal = 2853.0;
  int width = 1280;
  int height = 960;
  double depth = 450.0;       // distance of the impact point from the camera
  double bat_radius = 33.0;
  double penetration = 4.0;   // how far the undeformed ball would overlap the bat
  int approach_frames = 4;
  double frame_spacing = 30.0;
  SampleParams sample{300, 0.0, 0.5, 7, true};
};

struct BallScene {
  Camera camera;
  TriMesh mesh;
  Cylinder bat;
  Line3 trajectory;  // ground-truth centre line
  std::vector<BallFrame> frames;  // approach frames first, impact frame last
};

/// Ball travelling along a straight line towards a cylindrical bat. Vertices
/// that would penetrate the bat in the impact frame are pushed radially onto
/// its surface.
BallScene ball_scene(const BallSceneParams& params);

// --- bundles ---------------------------------------------------------------

/// reference.obj, gt.obj, camera.json, correspondences.csv, truth.csv and
/// scenario.json inside `dir`.
void write_scenario(const std::filesystem::path& dir, const Scenario& scenario);
Scenario read_scenario(const std::filesystem::path& dir);

/// frame_<k>/ scenario bundles plus ball.json with the bat, the true
/// trajectory and the per-frame deformation flags.
void write_ball_scene(const std::filesystem::path& dir, const BallScene& scene);
BallScene read_ball_scene(const std::filesystem::path& dir);

// --- robustness sweep ----------------------------------------------------------

struct SweepGrid {
  std::vector<int> inliers{10, 50, 100, 200, 400};
  std::vector<double> ratios{0.0, 0.2, 0.4, 0.6, 0.8};
  int trials = 50;
  double noise_sigma = 1.0;
  std::uint64_t seed = 1;
};

struct SweepCell {
  int n_inliers = 0;
  double outlier_ratio = 0.0;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_runtime = 0.0;  // seconds per trial
};

/// splitmix64 mixing step, used to derive independent per-trial seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Worker count: `requested` (0 = hardware concurrency) capped by the
/// LAPMESH_THREADS environment variable.
int worker_count(int requested);

/// One-sided two-proportion z-test: true when the rate of sample b is
/// significantly higher than that of sample a at the given confidence.
bool significant_increase(int successes_a, int n_a, int successes_b, int n_b,
                          double confidence = 0.95);

}  // namespace lapmesh::synth
