#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lapmesh/lapmesh.hpp"

namespace lapmesh::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// --- option plumbing -------------------------------------------------------

// A subcommand whose options can also come from a JSON object given with
// --config. Keys are the long flag names without dashes; flags win.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& help)
      : app_(parent.add_subcommand(name, help)) {
    app_->add_option("--config", config_, "JSON file with option values");
  }

  CLI::App* app() const { return app_; }

  template <class T>
  CLI::Option* option(const std::string& name, T& var, const std::string& help) {
    CLI::Option* o = app_->add_option("--" + name, var, help)->capture_default_str();
    bindings_[name] = {o, [&var](const json& j) { var = j.get<T>(); }};
    return o;
  }

  // --name / --no-name pair backed by one bool.
  CLI::Option* toggle(const std::string& name, bool& var, const std::string& help) {
    CLI::Option* o = app_->add_flag("--" + name + ",!--no-" + name, var, help)->capture_default_str();
    bindings_[name] = {o, [&var](const json& j) { var = j.get<bool>(); }};
    return o;
  }

  void apply_config() const {
    if (config_.empty()) return;
    json j;
    try {
      j = json::parse(io::read_text(config_));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, fmt::format("{}: {}", config_, e.what()));
    }
    if (!j.is_object()) {
      throw Error(ErrorCode::ParseError, fmt::format("{}: expected a JSON object", config_));
    }
    for (const auto& [key, value] : j.items()) {
      const auto it = bindings_.find(key);
      if (it == bindings_.end()) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("{}: unknown key '{}'", config_, key));
      }
      if (it->second.option->count() > 0) continue;
      try {
        it->second.assign(value);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("{}: bad value for '{}': {}", config_, key, e.what()));
      }
    }
  }

 private:
  struct Binding {
    CLI::Option* option = nullptr;
    std::function<void(const json&)> assign;
  };
  CLI::App* app_;
  std::string config_;
  std::map<std::string, Binding> bindings_;
};

std::vector<double> parse_numbers(const std::string& text, std::size_t expected,
                                  const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("{}: '{}' is not a number", what, item));
    }
  }
  if (values.size() != expected) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("{} needs {} comma-separated numbers (got {})", what, expected, values.size()));
  }
  return values;
}

std::optional<RegularizerMode> parse_mode(const std::string& s) {
  if (s == "auto") return std::nullopt;
  if (s == "planar") return RegularizerMode::planar;
  if (s == "nonplanar") return RegularizerMode::nonplanar;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown regularizer mode '{}'", s));
}

EigenMethod parse_method(const std::string& s) {
  if (s == "auto") return EigenMethod::automatic;
  if (s == "svd") return EigenMethod::dense_svd;
  if (s == "eigen") return EigenMethod::normal_eigen;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown eigen method '{}'", s));
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

// --- shared inputs ---------------------------------------------------------

struct InputArgs {
  std::string scenario;
  std::string mesh;
  std::string camera;
  std::string corr;
  std::string inliers;
};

void add_inputs(Command& c, InputArgs& a) {
  c.option("scenario", a.scenario, "scenario bundle directory (reference, camera, correspondences, ground truth)");
  c.option("mesh", a.mesh, "reference mesh (OBJ)");
  c.option("camera", a.camera, "camera intrinsics (JSON)");
  c.option("corr", a.corr, "correspondences (CSV)");
  c.option("inliers", a.inliers, "initial inlier mask (CSV); default all");
}

struct Inputs {
  TriMesh mesh;
  Camera camera;
  CorrespondenceSet corr;
  std::optional<synth::Scenario> truth;  // present when a bundle was given
};

Inputs load_inputs(const InputArgs& a, bool need_corr = true) {
  Inputs in;
  if (!a.scenario.empty()) {
    synth::Scenario sc = synth::read_scenario(a.scenario);
    in.mesh = sc.mesh;
    in.camera = sc.camera;
    in.corr = sc.corr;
    in.truth = std::move(sc);
  }
  if (!a.mesh.empty()) in.mesh = io::read_obj(a.mesh);
  if (!a.camera.empty()) in.camera = io::read_camera_json(a.camera);
  if (in.mesh.num_vertices() == 0) throw Error(ErrorCode::InvalidArgument, "missing --mesh (or --scenario)");
  if (a.scenario.empty() && a.camera.empty() && need_corr) {
    throw Error(ErrorCode::InvalidArgument, "missing --camera (or --scenario)");
  }
  if (!a.corr.empty()) {
    in.corr = io::read_correspondences_csv(a.corr, in.camera);
  } else if (a.scenario.empty() && need_corr) {
    throw Error(ErrorCode::InvalidArgument, "missing --corr (or --scenario)");
  }
  in.corr.camera = in.camera;
  if (!a.inliers.empty()) {
    const auto flags = io::read_inlier_mask_csv(a.inliers);
    if (flags.size() != in.corr.items.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("{}: {} flags for {} correspondences", a.inliers, flags.size(),
                              in.corr.items.size()));
    }
    in.corr.set_inlier_flags(flags);
  }
  if (in.truth) {
    // Ground truth only makes sense against the bundle's own reference.
    if (in.truth->mesh.num_vertices() != in.mesh.num_vertices()) {
      in.truth.reset();
    } else {
      in.truth->corr = in.corr;
    }
  }
  return in;
}

// --- pipeline settings -----------------------------------------------------

struct PipelineArgs {
  std::string mode = "auto";
  double sigma;
  std::string strategy;
  int count;
  std::uint64_t seed;
  double w_r;
  std::string method = "auto";
  bool robust;
  int robust_iterations;
  double robust_w_r;
  double robust_radius;
  bool refine;
  double refine_w_r;
  double slack_weight;
  int max_iterations;
  int max_inner_iterations;
  double step_tolerance;
  double violation_tolerance;

  PipelineArgs() {
    const PipelineConfig d;
    sigma = d.sigma;
    strategy = to_string(d.strategy);
    count = d.control_count;
    seed = d.seed;
    w_r = d.w_r;
    robust = d.robust;
    robust_iterations = d.robust_cfg.iterations;
    robust_w_r = d.robust_cfg.w_r_start;
    robust_radius = d.robust_cfg.radius_start;
    refine = d.refine;
    refine_w_r = d.refine_cfg.w_r;
    slack_weight = d.refine_cfg.slack_weight;
    max_iterations = d.refine_cfg.max_iterations;
    max_inner_iterations = d.refine_cfg.max_inner_iterations;
    step_tolerance = d.refine_cfg.step_tolerance;
    violation_tolerance = d.refine_cfg.violation_tolerance;
  }

  void add_model(Command& c) {
    c.option("mode", mode, "regularizer: auto, planar or nonplanar");
    c.option("sigma", sigma, "virtual-vertex scale for the non-planar regularizer");
    c.option("strategy", strategy, "control placement: regular, random or all");
    c.option("count", count, "number of control vertices");
    c.option("seed", seed, "seed for every random choice");
    c.option("method", method, "eigen solver: auto, svd or eigen");
  }

  void add_all(Command& c) {
    add_model(c);
    c.option("wr", w_r, "regularization weight of the linear solve without the robust stage");
    c.toggle("robust", robust, "iterative outlier rejection");
    c.option("robust-iterations", robust_iterations, "outlier rejection rounds");
    c.option("robust-wr", robust_w_r, "regularization weight of the first rejection round");
    c.option("robust-radius", robust_radius, "gate of the first rejection round (pixels)");
    c.toggle("refine", refine, "constrained refinement");
    c.option("refine-wr", refine_w_r, "regularization weight of the refinement");
    c.option("slack-weight", slack_weight, "slack penalty weight (<= 0: default from refine-wr)");
    c.option("max-iterations", max_iterations, "outer refinement iterations");
    c.option("max-inner-iterations", max_inner_iterations, "inner refinement steps per outer iteration");
    c.option("step-tolerance", step_tolerance, "relative step size that ends the refinement");
    c.option("violation-tolerance", violation_tolerance, "relative constraint violation accepted");
  }

  PipelineConfig config() const {
    PipelineConfig cfg;
    cfg.mode = parse_mode(mode);
    cfg.sigma = sigma;
    cfg.strategy = parse_control_strategy(strategy);
    cfg.control_count = count;
    cfg.seed = seed;
    cfg.w_r = w_r;
    cfg.method = parse_method(method);
    cfg.robust = robust;
    cfg.robust_cfg.iterations = robust_iterations;
    cfg.robust_cfg.w_r_start = robust_w_r;
    cfg.robust_cfg.radius_start = robust_radius;
    cfg.robust_cfg.method = cfg.method;
    cfg.refine = refine;
    cfg.refine_cfg.w_r = refine_w_r;
    cfg.refine_cfg.slack_weight = slack_weight;
    cfg.refine_cfg.max_iterations = max_iterations;
    cfg.refine_cfg.max_inner_iterations = max_inner_iterations;
    cfg.refine_cfg.step_tolerance = step_tolerance;
    cfg.refine_cfg.violation_tolerance = violation_tolerance;
    return cfg;
  }
};

double inlier_rms(const TriMesh& mesh, const CorrespondenceSet& corr, const Eigen::VectorXd& x) {
  const auto errors = reprojection_errors(mesh, corr.camera, corr, x);
  double sq = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!corr.items[k].inlier) continue;
    sq += errors[k] * errors[k];
    ++n;
  }
  return n ? std::sqrt(sq / n) : 0.0;
}

json metrics_json(const synth::Metrics& m) {
  return {{"success", m.success},
          {"vertex_success_fraction", m.vertex_success_fraction},
          {"mean_error_3d", m.mean_error_3d},
          {"median_error_3d", m.median_error_3d},
          {"scaled_mean_error_3d", m.scaled_mean_error_3d},
          {"best_scale", m.best_scale},
          {"reprojection_rms", m.reprojection_rms},
          {"inlier_precision", m.precision},
          {"inlier_recall", m.recall}};
}

json refine_json(const RefineResult& r) {
  return {{"status", to_string(r.status)},
          {"iterations", r.iterations},
          {"inner_iterations", r.inner_iterations},
          {"objective", r.objective},
          {"max_violation", r.max_violation}};
}

void write_spectrum(const fs::path& path, const Eigen::VectorXd& s) {
  std::vector<std::vector<double>> rows;
  const double top = s.size() ? s.maxCoeff() : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    rows.push_back({static_cast<double>(i), s[i], top > 0.0 ? s[i] / top : 0.0});
  }
  io::write_csv(path, {"index", "singular_value", "relative"}, rows);
}

// --- reconstruct -------------------------------------------------------------

struct ReconstructArgs {
  InputArgs in;
  PipelineArgs pipe;
  std::string out = "out";
  bool spectrum = false;
};

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& out, fs::path& error_dir) {
  error_dir = a.out;
  Inputs in = load_inputs(a.in);
  const PipelineConfig cfg = a.pipe.config();
  const Pipeline pipeline(in.mesh, cfg);
  CorrespondenceSet corr = in.corr;
  const ReconstructResult res = pipeline.run(corr);

  const fs::path dir = a.out;
  io::write_obj(dir / "mesh.obj", in.mesh.with_coords(res.x));
  io::write_obj(dir / "linear.obj", in.mesh.with_coords(res.linear.x));
  io::write_inlier_mask_csv(dir / "inliers.csv", res.inliers);
  if (a.spectrum) {
    LinearSolveConfig lc;
    lc.w_r = res.linear.w_r;
    lc.method = cfg.method;
    lc.keep_spectrum = true;
    const LinearSolution s = solve_initial(assemble_data_rows(in.mesh, corr), pipeline.basis(),
                                           pipeline.topology(), lc);
    write_spectrum(dir / "spectrum.csv", s.spectrum);
  }

  json m = {{"num_vertices", in.mesh.num_vertices()},
            {"num_controls", pipeline.basis().num_controls()},
            {"regularizer", to_string(pipeline.regularizer().mode)},
            {"num_correspondences", corr.size()},
            {"num_inliers", corr.num_inliers()},
            {"linear",
             {{"w_r", res.linear.w_r},
              {"objective", res.linear.objective},
              {"reprojection_rms", inlier_rms(in.mesh, corr, res.linear.x)}}},
            {"refine", res.refined ? refine_json(*res.refined) : json(nullptr)},
            {"reprojection_rms", inlier_rms(in.mesh, corr, res.x)}};
  if (res.robust) {
    m["robust"] = {{"final_w_r", res.robust->final_w_r}, {"final_radius", res.robust->final_radius}};
  }
  if (in.truth) {
    in.truth->corr = corr;
    json g = metrics_json(synth::evaluate(res.x, *in.truth, res.inliers));
    g["diameter"] = synth::mesh_diameter(in.mesh);
    m["ground_truth"] = g;
  }
  write_json(dir / "metrics.json", m);
  out << fmt::format("reconstructed {} vertices from {} of {} correspondences in {:.3f} s -> {}\n",
                     in.mesh.num_vertices(), corr.num_inliers(), corr.size(), res.seconds,
                     dir.string());
  if (res.refined && res.refined->status != RefineStatus::converged) {
    throw Error(ErrorCode::NoConvergence,
                fmt::format("refinement stopped after {} iterations with relative violation {:.3g}",
                            res.refined->iterations, res.refined->max_violation));
  }
  return kExitOk;
}

// --- solve-linear ------------------------------------------------------------

struct SolveLinearArgs {
  InputArgs in;
  PipelineArgs pipe;
  std::string out = "linear.obj";
  std::string spectrum;
};

int cmd_solve_linear(const SolveLinearArgs& a, std::ostream& out) {
  const Inputs in = load_inputs(a.in);
  PipelineConfig cfg = a.pipe.config();
  cfg.robust = false;
  cfg.refine = false;
  const Pipeline pipeline(in.mesh, cfg);
  LinearSolveConfig lc;
  lc.w_r = cfg.w_r;
  lc.method = cfg.method;
  lc.keep_spectrum = !a.spectrum.empty();
  const LinearSolution s = solve_initial(assemble_data_rows(in.mesh, in.corr), pipeline.basis(),
                                         pipeline.topology(), lc);
  io::write_obj(a.out, in.mesh.with_coords(s.x));
  if (!a.spectrum.empty()) write_spectrum(a.spectrum, s.spectrum);
  out << fmt::format("linear solve with w_r = {}: objective {:.6g}, reprojection RMS {:.4f} px -> {}\n",
                     s.w_r, s.objective, inlier_rms(in.mesh, in.corr, s.x), a.out);
  return kExitOk;
}

// --- regularizer ---------------------------------------------------------------

struct RegularizerArgs {
  std::string mesh;
  bool planar = false;
  bool nonplanar = false;
  double sigma = PipelineConfig{}.sigma;
  std::string out = "A.mtx";
  std::string spectrum;
};

int cmd_regularizer(const RegularizerArgs& a, std::ostream& out) {
  if (a.mesh.empty()) throw Error(ErrorCode::InvalidArgument, "missing --mesh");
  if (a.planar && a.nonplanar) {
    throw Error(ErrorCode::InvalidArgument, "--planar and --nonplanar are exclusive");
  }
  const TriMesh mesh = io::read_obj(a.mesh);
  const Topology topo = build_topology(mesh);
  std::optional<RegularizerMode> mode;
  if (a.planar) mode = RegularizerMode::planar;
  if (a.nonplanar) mode = RegularizerMode::nonplanar;
  const Regularizer reg = build_regularizer(mesh, topo, mode, a.sigma);
  io::write_matrix_market(a.out, reg.a_prime);
  if (!a.spectrum.empty()) {
    const Eigen::VectorXd s = normalized_spectrum(reg.a_prime);
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < s.size(); ++i) rows.push_back({static_cast<double>(i), s[i]});
    io::write_csv(a.spectrum, {"index", "normalized_singular_value"}, rows);
  }
  out << fmt::format("{} regularizer: {} x {} with {} non-zeros -> {}\n", to_string(reg.mode),
                     reg.a_prime.rows(), reg.a_prime.cols(), reg.a_prime.nonZeros(), a.out);
  return kExitOk;
}

// --- controls ------------------------------------------------------------------

struct ControlsArgs {
  std::string mesh;
  PipelineArgs pipe;
  std::string out = "basis.json";
};

int cmd_controls(const ControlsArgs& a, std::ostream& out) {
  if (a.mesh.empty()) throw Error(ErrorCode::InvalidArgument, "missing --mesh");
  PipelineConfig cfg = a.pipe.config();
  const Pipeline pipeline(io::read_obj(a.mesh), cfg);
  io::write_basis(a.out, pipeline.basis(), cfg.seed);
  out << fmt::format("{} control vertices ({}) -> {}\n", pipeline.basis().num_controls(),
                     to_string(cfg.strategy), a.out);
  return kExitOk;
}

// --- synth -----------------------------------------------------------------------

struct SynthArgs {
  std::string scene = "sheet";
  std::string family;
  double bend_radius;
  double bend_sign;
  double amplitude;
  double wavelength;
  double depth;
  // negative: the scene's own default
  int inliers = -1;
  double outlier_ratio = 0.0;
  double noise = -1.0;
  std::int64_t seed = -1;
  double penetration;
  int frames;
  std::string out = "scenario";

  SynthArgs() {
    const synth::SheetSceneParams d;
    family = synth::to_string(d.family);
    bend_radius = d.bend_radius;
    bend_sign = d.bend_sign;
    amplitude = d.wave_amplitude;
    wavelength = d.wave_length;
    depth = d.depth;
    const synth::BallSceneParams b;
    penetration = b.penetration;
    frames = b.approach_frames;
  }

  void apply(synth::SampleParams& s) const {
    if (inliers >= 0) s.n_inliers = inliers;
    if (noise >= 0.0) s.noise_sigma = noise;
    if (seed >= 0) s.seed = static_cast<std::uint64_t>(seed);
    s.outlier_ratio = outlier_ratio;
    if (s.n_inliers < 1 || !(s.outlier_ratio >= 0.0 && s.outlier_ratio < 1.0)) {
      throw Error(ErrorCode::ParamOutOfRange, "need inliers >= 1 and 0 <= outlier-ratio < 1");
    }
  }
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.scene == "sheet") {
    synth::SheetSceneParams p;
    p.family = synth::parse_deform_family(a.family);
    p.bend_radius = a.bend_radius;
    p.bend_sign = a.bend_sign;
    p.wave_amplitude = a.amplitude;
    p.wave_length = a.wavelength;
    p.depth = a.depth;
    a.apply(p.sample);
    const synth::Scenario sc = synth::bent_sheet_scene(p);
    synth::write_scenario(a.out, sc);
    out << fmt::format("{}: {} correspondences -> {}\n", sc.name, sc.corr.size(), a.out);
    return kExitOk;
  }
  if (a.scene == "ball") {
    synth::BallSceneParams p;
    p.penetration = a.penetration;
    p.approach_frames = a.frames;
    a.apply(p.sample);
    const synth::BallScene scene = synth::ball_scene(p);
    synth::write_ball_scene(a.out, scene);
    out << fmt::format("ball scene: {} frames -> {}\n", scene.frames.size(), a.out);
    return kExitOk;
  }
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown scene '{}' (sheet or ball)", a.scene));
}

// --- sweep -------------------------------------------------------------------------

struct SweepArgs {
  std::string grid;
  std::string out = "results.csv";
  int threads = 0;
  int trials = 0;
  std::int64_t seed = -1;
  PipelineArgs pipe;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  synth::SweepGrid grid;
  if (!a.grid.empty()) {
    try {
      const json j = json::parse(io::read_text(a.grid));
      for (const auto& [key, value] : j.items()) {
        if (key == "inliers") grid.inliers = value.get<std::vector<int>>();
        else if (key == "ratios") grid.ratios = value.get<std::vector<double>>();
        else if (key == "trials") grid.trials = value.get<int>();
        else if (key == "noise") grid.noise_sigma = value.get<double>();
        else if (key == "seed") grid.seed = value.get<std::uint64_t>();
        else throw Error(ErrorCode::InvalidArgument, fmt::format("{}: unknown key '{}'", a.grid, key));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, fmt::format("{}: {}", a.grid, e.what()));
    }
  }
  if (a.trials > 0) grid.trials = a.trials;
  if (a.seed >= 0) grid.seed = static_cast<std::uint64_t>(a.seed);
  for (double r : grid.ratios) {
    if (!(r >= 0.0 && r < 1.0)) throw Error(ErrorCode::ParamOutOfRange, "outlier ratios must lie in [0, 1)");
  }
  for (int n : grid.inliers) {
    if (n < 1) throw Error(ErrorCode::ParamOutOfRange, "inlier counts must be >= 1");
  }

  int warnings = 0;
  const WarningHandler previous = set_warning_handler([&warnings](const std::string&) { ++warnings; });
  std::vector<synth::SweepCell> cells;
  try {
    cells = robustness_sweep(synth::SheetSceneParams{}, grid, a.pipe.config(), a.threads);
  } catch (...) {
    set_warning_handler(previous);
    throw;
  }
  set_warning_handler(previous);

  std::vector<std::vector<double>> rows;
  for (const auto& c : cells) {
    rows.push_back({static_cast<double>(c.n_inliers), c.outlier_ratio, static_cast<double>(c.trials),
                    static_cast<double>(c.successes), c.success_rate, c.mean_runtime});
  }
  io::write_csv(a.out, {"n_inliers", "outlier_ratio", "trials", "successes", "success_rate", "mean_runtime"},
                rows);
  out << fmt::format("{} cells x {} trials -> {}", cells.size(), grid.trials, a.out);
  if (warnings) out << fmt::format(" ({} under-determined solves)", warnings);
  out << "\n";
  return kExitOk;
}

// --- diag ---------------------------------------------------------------------------

struct DiagArgs {
  std::string kind = "conditioning";
  InputArgs in;
  PipelineArgs pipe;
  std::vector<double> sigmas{0.5, 1.0, 2.0, 5.0};
  double wr_min = 1.0 / 120.0;
  double wr_max = 120.0;
  int wr_count = 33;
  std::string out = "diag.csv";
  std::string spectra;
};

int cmd_diag(const DiagArgs& a, std::ostream& out) {
  if (a.kind == "sigma") {
    const Inputs in = load_inputs(a.in, false);
    const Topology topo = build_topology(in.mesh);
    std::vector<Eigen::VectorXd> curves;
    std::vector<std::string> header{"index"};
    for (double s : a.sigmas) {
      curves.push_back(normalized_spectrum(build_nonplanar(in.mesh, topo, s).a_prime));
      header.push_back(fmt::format("sigma_{}", s));
    }
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < (curves.empty() ? 0 : curves.front().size()); ++i) {
      std::vector<double> row{static_cast<double>(i)};
      for (const auto& c : curves) row.push_back(c[i]);
      rows.push_back(std::move(row));
    }
    io::write_csv(a.out, header, rows);
    out << fmt::format("normalized spectra for {} sigma values -> {}\n", a.sigmas.size(), a.out);
    return kExitOk;
  }
  if (a.kind == "conditioning") {
    const Inputs in = load_inputs(a.in);
    PipelineConfig cfg = a.pipe.config();
    const Pipeline pipeline(in.mesh, cfg);
    const auto table = conditioning_report(assemble_data_rows(in.mesh, in.corr), pipeline.basis(),
                                           log_grid(a.wr_min, a.wr_max, a.wr_count));
    std::vector<std::vector<double>> rows;
    std::size_t best = 0;
    for (std::size_t k = 0; k < table.size(); ++k) {
      rows.push_back({table[k].w_r, table[k].condition});
      if (table[k].condition < table[best].condition) best = k;
    }
    io::write_csv(a.out, {"w_r", "condition"}, rows);
    if (!a.spectra.empty()) {
      std::vector<std::string> header{"index"};
      for (const auto& r : table) header.push_back(fmt::format("wr_{:.6g}", r.w_r));
      std::vector<std::vector<double>> srows;
      for (Eigen::Index i = 0; i < table.front().spectrum.size(); ++i) {
        std::vector<double> row{static_cast<double>(i)};
        for (const auto& r : table) row.push_back(r.spectrum[i]);
        srows.push_back(std::move(row));
      }
      io::write_csv(a.spectra, header, srows);
    }
    out << fmt::format("condition number minimal at w_r = {:.4g} ({:.4g}) -> {}\n", table[best].w_r,
                       table[best].condition, a.out);
    return kExitOk;
  }
  if (a.kind == "m-spectrum") {
    const Inputs in = load_inputs(a.in);
    const Eigen::MatrixXd m(assemble_M(in.mesh, in.corr));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(m.cols());
    s.head(svd.singularValues().size()) = svd.singularValues();
    std::sort(s.data(), s.data() + s.size());
    write_spectrum(a.out, s);
    const double top = s.maxCoeff();
    int small = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) small += s[i] < 1e-6 * top ? 1 : 0;
    out << fmt::format("{} of {} singular values of M below 1e-6 of the largest -> {}\n", small,
                       s.size(), a.out);
    return kExitOk;
  }
  throw Error(ErrorCode::InvalidArgument,
              fmt::format("unknown diagnostic '{}' (sigma, conditioning or m-spectrum)", a.kind));
}

// --- ball -----------------------------------------------------------------------------

struct BallArgs {
  std::string scene;
  std::string cylinder;
  std::string traj = "auto";
  double w_l = BallRunConfig{}.w_l;
  double w_t = BallRunConfig{}.w_t;
  PipelineArgs pipe;
  std::string out = "ball_out";

  BallArgs() {
    pipe.count = kBallControlCount;
    pipe.mode = "nonplanar";
  }
};

int cmd_ball(const BallArgs& a, std::ostream& out, fs::path& error_dir) {
  error_dir = a.out;
  if (a.scene.empty()) throw Error(ErrorCode::InvalidArgument, "missing --scene (ball bundle directory)");
  const synth::BallScene scene = synth::read_ball_scene(a.scene);
  BallRunConfig cfg;
  cfg.w_l = a.w_l;
  cfg.w_t = a.w_t;
  cfg.obstacle = scene.bat;
  if (!a.cylinder.empty()) {
    const auto v = parse_numbers(a.cylinder, 7, "--cylinder");
    cfg.obstacle.point = Vec3(v[0], v[1], v[2]);
    cfg.obstacle.direction = Vec3(v[3], v[4], v[5]).normalized();
    cfg.obstacle.radius = v[6];
  }
  if (!(cfg.obstacle.radius > 0.0) || !(cfg.obstacle.direction.allFinite())) {
    throw Error(ErrorCode::ParamOutOfRange, "cylinder needs a positive radius and a non-zero axis");
  }
  if (a.traj != "auto") {
    const auto v = parse_numbers(a.traj, 6, "--traj");
    cfg.trajectory = Line3{Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]).normalized()};
  }

  const Pipeline pipeline(scene.mesh, a.pipe.config());
  std::vector<CorrespondenceSet> frames;
  for (const auto& f : scene.frames) frames.push_back(f.scene.corr);
  const BallRunResult res = run_ball(pipeline, frames, cfg);

  const fs::path dir = a.out;
  const double tolerance = 1e-6 * cfg.obstacle.radius;
  const double diameter = synth::mesh_diameter(scene.mesh);
  std::vector<std::vector<double>> rows;
  json frames_json = json::array();
  bool all_within = true;
  bool converged = true;
  for (std::size_t k = 0; k < res.frames.size(); ++k) {
    const auto& f = res.frames[k];
    io::write_obj(dir / fmt::format("frame_{}.obj", k), scene.mesh.with_coords(f.recon.x));
    synth::Scenario truth = scene.frames[k].scene;
    truth.corr = frames[k];
    const synth::Metrics m = synth::evaluate(f.recon.x, truth);
    const bool within = f.max_penetration <= tolerance;
    all_within = all_within && within;
    if (f.recon.refined && f.recon.refined->status != RefineStatus::converged) converged = false;
    rows.push_back({static_cast<double>(k), f.impact ? 1.0 : 0.0, f.max_penetration,
                    f.max_penetration / cfg.obstacle.radius, within ? 1.0 : 0.0, m.mean_error_3d,
                    m.mean_error_3d / diameter});
    json fj = {{"frame", k},
               {"impact", f.impact},
               {"centroid", vec_json(f.centroid)},
               {"max_penetration", f.max_penetration},
               {"within_tolerance", within},
               {"mean_error_3d", m.mean_error_3d},
               {"relative_error_3d", m.mean_error_3d / diameter},
               {"reprojection_rms", m.reprojection_rms}};
    if (f.recon.refined) fj["refine"] = refine_json(*f.recon.refined);
    frames_json.push_back(std::move(fj));
  }
  io::write_csv(dir / "report.csv",
                {"frame", "impact", "max_penetration", "relative_penetration", "within_tolerance",
                 "mean_error_3d", "relative_error_3d"},
                rows);
  write_json(dir / "trajectory.json",
             {{"point", vec_json(res.trajectory.point)},
              {"direction", vec_json(res.trajectory.direction)},
              {"fitted", !cfg.trajectory.has_value()}});
  write_json(dir / "metrics.json", {{"tolerance", tolerance},
                                    {"diameter", diameter},
                                    {"all_within_tolerance", all_within},
                                    {"frames", frames_json}});
  out << fmt::format("{} frames, impact error {:.3f} ({:.2f}% of the diameter), max penetration {:.3g} -> {}\n",
                     res.frames.size(), frames_json.back()["mean_error_3d"].get<double>(),
                     100.0 * frames_json.back()["relative_error_3d"].get<double>(),
                     res.frames.back().max_penetration, dir.string());
  if (!converged) throw Error(ErrorCode::NoConvergence, "a refinement stopped at its iteration cap");
  return kExitOk;
}

// --- error reporting ----------------------------------------------------------------------

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::ParseError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParamOutOfRange:
    case ErrorCode::CountOutOfRange:
    case ErrorCode::FacetOutOfRange:
    case ErrorCode::NonManifold:
    case ErrorCode::DegenerateFacet:
    case ErrorCode::NotPlanar:
      return kExitConfig;
    case ErrorCode::NoConvergence:
      return kExitNoConvergence;
    default:
      return kExitFailure;
  }
}

int report(std::ostream& err, const fs::path& error_dir, const std::string& code,
           const std::string& message, int exit_code) {
  const json j = {{"error", code}, {"message", message}, {"exit_code", exit_code}};
  err << j.dump() << "\n";
  if (!error_dir.empty()) {
    try {
      write_json(error_dir / "error.json", j);
    } catch (const Error&) {
      // the directory itself may be the problem; stderr already has the report
    }
  }
  return exit_code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Template-based monocular reconstruction of deformable surfaces", "lapmesh"};
  app.require_subcommand(1);

  ReconstructArgs rec;
  Command c_rec(app, "reconstruct", "robust linear estimate plus constrained refinement");
  add_inputs(c_rec, rec.in);
  rec.pipe.add_all(c_rec);
  c_rec.option("out", rec.out, "output directory");
  c_rec.toggle("spectrum", rec.spectrum, "also write the spectrum of the final linear system");

  SolveLinearArgs lin;
  Command c_lin(app, "solve-linear", "regularized linear solve only");
  add_inputs(c_lin, lin.in);
  lin.pipe.add_model(c_lin);
  c_lin.option("wr", lin.pipe.w_r, "regularization weight");
  c_lin.option("out", lin.out, "output mesh (OBJ)");
  c_lin.option("spectrum", lin.spectrum, "singular values of the stacked system (CSV)");

  RegularizerArgs reg;
  Command c_reg(app, "regularizer", "write the per-coordinate regularization matrix");
  c_reg.option("mesh", reg.mesh, "reference mesh (OBJ)");
  c_reg.toggle("planar", reg.planar, "force the planar operator");
  c_reg.toggle("nonplanar", reg.nonplanar, "force the non-planar operator");
  c_reg.option("sigma", reg.sigma, "virtual-vertex scale");
  c_reg.option("out", reg.out, "MatrixMarket output");
  c_reg.option("spectrum", reg.spectrum, "normalized singular values (CSV)");

  ControlsArgs ctl;
  Command c_ctl(app, "controls", "select control vertices and write the interpolation basis");
  c_ctl.option("mesh", ctl.mesh, "reference mesh (OBJ)");
  ctl.pipe.add_model(c_ctl);
  c_ctl.option("out", ctl.out, "basis JSON (a .P.mtx sidecar is written next to it)");

  SynthArgs syn;
  Command c_syn(app, "synth", "generate a synthetic scenario bundle");
  c_syn.option("scene", syn.scene, "sheet or ball");
  c_syn.option("family", syn.family, "sheet deformation: cylinder-bend, cosine-wave or rigid");
  c_syn.option("bend-radius", syn.bend_radius, "cylinder bend radius");
  c_syn.option("bend-sign", syn.bend_sign, "+1 or -1");
  c_syn.option("amplitude", syn.amplitude, "cosine wave amplitude");
  c_syn.option("wavelength", syn.wavelength, "cosine wave length");
  c_syn.option("depth", syn.depth, "distance of the sheet from the camera");
  c_syn.option("inliers", syn.inliers, "number of inlier correspondences (-1: scene default)");
  c_syn.option("outlier-ratio", syn.outlier_ratio, "fraction of outliers in the whole set");
  c_syn.option("noise", syn.noise, "pixel noise standard deviation (-1: scene default)");
  c_syn.option("seed", syn.seed, "sampling seed (-1: scene default)");
  c_syn.option("penetration", syn.penetration, "ball: overlap of the undeformed ball with the bat");
  c_syn.option("frames", syn.frames, "ball: approach frames before the impact");
  c_syn.option("out", syn.out, "output directory");

  SweepArgs swp;
  Command c_swp(app, "sweep", "success rate over an (inliers, outlier ratio) grid");
  c_swp.option("grid", swp.grid, "grid JSON: inliers, ratios, trials, noise, seed");
  c_swp.option("out", swp.out, "results CSV");
  c_swp.option("threads", swp.threads, "worker threads (0: all cores, capped by LAPMESH_THREADS)");
  c_swp.option("trials", swp.trials, "trials per cell (overrides the grid file)");
  c_swp.option("seed", swp.seed, "grid seed (-1: from the grid file, else 1)");
  c_swp.option("count", swp.pipe.count, "number of control vertices");

  DiagArgs dia;
  Command c_dia(app, "diag", "diagnostics: sigma, conditioning or m-spectrum");
  c_dia.option("kind", dia.kind, "sigma, conditioning or m-spectrum");
  add_inputs(c_dia, dia.in);
  dia.pipe.add_model(c_dia);
  c_dia.option("sigmas", dia.sigmas, "virtual-vertex scales for the sigma study")->delimiter(',');
  c_dia.option("wr-min", dia.wr_min, "smallest w_r of the conditioning grid");
  c_dia.option("wr-max", dia.wr_max, "largest w_r of the conditioning grid");
  c_dia.option("wr-count", dia.wr_count, "log-spaced grid points");
  c_dia.option("out", dia.out, "output CSV");
  c_dia.option("spectra", dia.spectra, "conditioning: full spectra per w_r (CSV)");

  BallArgs ball;
  Command c_ball(app, "ball", "ball-impact reconstruction over a frame sequence");
  c_ball.option("scene", ball.scene, "ball bundle directory (see synth --scene ball)");
  c_ball.option("cylinder", ball.cylinder, "ax,ay,az,dx,dy,dz,r (default: from the bundle)");
  c_ball.option("traj", ball.traj, "auto or px,py,pz,dx,dy,dz");
  c_ball.option("wl", ball.w_l, "edge-length penalty weight");
  c_ball.option("wt", ball.w_t, "trajectory penalty weight");
  ball.pipe.add_all(c_ball);
  c_ball.option("out", ball.out, "output directory");

  fs::path error_dir;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return report(err, error_dir, "UsageError", e.what(), kExitConfig);
  }

  try {
    const struct {
      Command* cmd;
      std::function<int()> fn;
    } table[] = {
        {&c_rec, [&] { return cmd_reconstruct(rec, out, error_dir); }},
        {&c_lin, [&] { return cmd_solve_linear(lin, out); }},
        {&c_reg, [&] { return cmd_regularizer(reg, out); }},
        {&c_ctl, [&] { return cmd_controls(ctl, out); }},
        {&c_syn, [&] { return cmd_synth(syn, out); }},
        {&c_swp, [&] { return cmd_sweep(swp, out); }},
        {&c_dia, [&] { return cmd_diag(dia, out); }},
        {&c_ball, [&] { return cmd_ball(ball, out, error_dir); }},
    };
    for (const auto& entry : table) {
      if (!entry.cmd->app()->parsed()) continue;
      entry.cmd->apply_config();
      return entry.fn();
    }
    return report(err, error_dir, "UsageError", "no subcommand", kExitConfig);
  } catch (const Error& e) {
    return report(err, error_dir, to_string(e.code()), e.what(), exit_code_for(e.code()));
  } catch (const std::exception& e) {
    return report(err, error_dir, "InternalError", e.what(), kExitFailure);
  }
}

}  // namespace lapmesh::cli
