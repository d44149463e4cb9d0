// Command-line front end: registration runs, single pairwise alignments,
// standalone decompositions, synthetic scene generation, and Obj evaluation.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mvreg/mvreg.hpp"

namespace fs = std::filesystem;
using namespace mvreg;

namespace {

int error_exit_code(const Error& e) {
  const std::string& c = e.code();
  if (c == "ParseError" || c == "ConfigError" || c == "UnsupportedFormat") {
    return 2;
  }
  return 1;
}

PipelineConfig pipeline_from_config(const ConfigMap& cfg) {
  PipelineConfig p;
  p.tricp.lambda_trim = cfg.get_double("tricp.lambda_trim", p.tricp.lambda_trim);
  p.tricp.xi_threshold =
      cfg.get_double("tricp.xi_threshold", p.tricp.xi_threshold);
  p.tricp.max_iterations = static_cast<std::size_t>(
      cfg.get_u64("tricp.max_iterations", p.tricp.max_iterations));
  p.tricp.convergence_tol =
      cfg.get_double("tricp.convergence_tol", p.tricp.convergence_tol);

  p.wlrs.rank = static_cast<int>(cfg.get_u64("wlrs.rank", p.wlrs.rank));
  if (cfg.has("wlrs.lambda_nuclear")) {
    p.wlrs.lambda_nuclear = cfg.get_double("wlrs.lambda_nuclear", 0.0);
  }
  p.wlrs.rho = cfg.get_double("wlrs.rho", p.wlrs.rho);
  if (cfg.has("wlrs.mu_init")) {
    p.wlrs.mu_init = cfg.get_double("wlrs.mu_init", 0.0);
  }
  p.wlrs.mu_cap = cfg.get_double("wlrs.mu_cap", p.wlrs.mu_cap);
  p.wlrs.inner_tol = cfg.get_double("wlrs.inner_tol", p.wlrs.inner_tol);
  p.wlrs.outer_tol = cfg.get_double("wlrs.outer_tol", p.wlrs.outer_tol);
  p.wlrs.max_inner = static_cast<std::size_t>(
      cfg.get_u64("wlrs.max_inner", p.wlrs.max_inner));
  p.wlrs.max_outer = static_cast<std::size_t>(
      cfg.get_u64("wlrs.max_outer", p.wlrs.max_outer));

  p.max_outer =
      static_cast<std::size_t>(cfg.get_u64("pipeline.max_outer", p.max_outer));
  p.rotation_tol = cfg.get_double("pipeline.rotation_tol", p.rotation_tol);
  p.translation_tol =
      cfg.get_double("pipeline.translation_tol", p.translation_tol);
  p.objective_tol = cfg.get_double("pipeline.objective_tol", p.objective_tol);
  p.threads = static_cast<unsigned>(cfg.get_u64("threads", p.threads));
  return p;
}

SyntheticScene scene_from_config(const ConfigMap& cfg) {
  SyntheticScene s;
  s.surface = surface_from_name(cfg.get_string("synth.surface", "torus"));
  s.n_views = static_cast<std::size_t>(cfg.get_u64("synth.n_views", s.n_views));
  s.points_per_view = static_cast<std::size_t>(
      cfg.get_u64("synth.points_per_view", s.points_per_view));
  s.overlap_target = cfg.get_double("synth.overlap_target", s.overlap_target);
  s.noise_sigma = cfg.get_double("synth.noise_sigma", s.noise_sigma);
  s.rotation_perturbation =
      cfg.get_double("synth.rotation_perturbation", s.rotation_perturbation);
  s.sphere_radius = cfg.get_double("synth.sphere_radius", s.sphere_radius);
  s.torus_major = cfg.get_double("synth.torus_major", s.torus_major);
  s.torus_minor = cfg.get_double("synth.torus_minor", s.torus_minor);
  s.wave_extent = cfg.get_double("synth.wave_extent", s.wave_extent);
  s.wave_amplitude = cfg.get_double("synth.wave_amplitude", s.wave_amplitude);
  s.wave_frequency = cfg.get_double("synth.wave_frequency", s.wave_frequency);
  return s;
}

ConfigMap echo_pipeline(const PipelineConfig& p) {
  ConfigMap echo;
  echo.set("tricp.lambda_trim", format_double(p.tricp.lambda_trim));
  echo.set("tricp.xi_threshold", format_double(p.tricp.xi_threshold));
  echo.set("tricp.max_iterations", std::to_string(p.tricp.max_iterations));
  echo.set("tricp.convergence_tol", format_double(p.tricp.convergence_tol));
  echo.set("wlrs.rank", std::to_string(p.wlrs.rank));
  echo.set("wlrs.lambda_nuclear", p.wlrs.lambda_nuclear
                                      ? format_double(*p.wlrs.lambda_nuclear)
                                      : "auto");
  echo.set("wlrs.rho", format_double(p.wlrs.rho));
  echo.set("wlrs.mu_init",
           p.wlrs.mu_init ? format_double(*p.wlrs.mu_init) : "auto");
  echo.set("wlrs.mu_cap", format_double(p.wlrs.mu_cap));
  echo.set("wlrs.inner_tol", format_double(p.wlrs.inner_tol));
  echo.set("wlrs.outer_tol", format_double(p.wlrs.outer_tol));
  echo.set("wlrs.max_inner", std::to_string(p.wlrs.max_inner));
  echo.set("wlrs.max_outer", std::to_string(p.wlrs.max_outer));
  echo.set("pipeline.max_outer", std::to_string(p.max_outer));
  echo.set("pipeline.rotation_tol", format_double(p.rotation_tol));
  echo.set("pipeline.translation_tol", format_double(p.translation_tol));
  echo.set("pipeline.objective_tol", format_double(p.objective_tol));
  echo.set("threads", std::to_string(p.threads));
  return echo;
}

void print_motion(std::ostream& out, const RigidMotion& m) {
  const Eigen::Matrix4d h = m.homogeneous();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      out << (j ? " " : "") << format_double(h(i, j));
    }
    out << "\n";
  }
}

struct CommonFlags {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double xi_thr = -1.0;          // <0 means "not given"
  double lambda_nuclear = -1.0;  // <0 means "not given"
  std::int64_t max_outer = -1;   // <0 means "not given"
  bool verbose = false;
};

int run_register(const std::string& config_path, const CommonFlags& flags) {
  const ConfigMap file_cfg = load_config(config_path);
  PipelineConfig cfg = pipeline_from_config(file_cfg);
  if (flags.xi_thr >= 0.0) cfg.tricp.xi_threshold = flags.xi_thr;
  if (flags.lambda_nuclear >= 0.0) cfg.wlrs.lambda_nuclear = flags.lambda_nuclear;
  if (flags.max_outer >= 0) cfg.max_outer = static_cast<std::size_t>(flags.max_outer);
  if (flags.threads > 0) cfg.threads = flags.threads;
  if (flags.verbose) cfg.log = &std::cerr;

  const std::vector<std::string> scan_paths = file_cfg.get_list("scan");
  if (scan_paths.size() < 2) {
    throw Error("ConfigError", "config needs at least two 'scan' entries");
  }
  std::vector<PointCloud> scans;
  scans.reserve(scan_paths.size());
  for (const std::string& path : scan_paths) scans.push_back(load_cloud(path));

  std::vector<RigidMotion> initial(scans.size());
  const std::string init_path = file_cfg.get_string("init_motions");
  if (!init_path.empty()) {
    initial = load_motions(init_path);
    if (initial.size() != scans.size()) {
      throw Error("ConfigError", "init_motions count does not match scans");
    }
  }

  ConfigMap echo = echo_pipeline(cfg);
  for (const std::string& path : scan_paths) echo.set("scan", path);
  if (!init_path.empty()) echo.set("init_motions", init_path);
  echo.set("seed", std::to_string(flags.seed));

  const std::string out_motions =
      file_cfg.get_string("out_motions", "motions.txt");
  const std::string out_report = file_cfg.get_string("out_report", "report.txt");

  auto finish = [&](const RegistrationRun& run) {
    save_motions(out_motions, run.motions);
    std::ofstream report(out_report);
    if (!report) {
      throw Error("ConfigError", out_report + ": cannot open for writing");
    }
    write_report(report, echo, run);
    double total = 0.0;
    for (const HistoryEntry& e : run.history) total += e.seconds;
    std::cerr << "registration " << (run.converged ? "converged" : "stopped")
              << " after " << run.outer_iterations << " iterations, " << total
              << " s total\n";
  };

  try {
    const RegistrationRun run = register_scans(scans, initial, cfg);
    finish(run);
  } catch (const RegistrationNotConverged& nc) {
    finish(nc.best);
    std::cerr << "error: " << nc.what() << "\n";
    return 1;
  }
  return 0;
}

int run_pairwise(const std::string& src_path, const std::string& dst_path,
                 const std::string& init_path, const CommonFlags& flags) {
  TrICPConfig cfg;
  if (flags.xi_thr >= 0.0) cfg.xi_threshold = flags.xi_thr;
  const PointCloud source = load_cloud(src_path);
  const PointCloud target = load_cloud(dst_path);
  RigidMotion init;
  if (!init_path.empty()) {
    const std::vector<RigidMotion> motions = load_motions(init_path);
    if (motions.empty()) throw Error("ParseError", init_path + ": no motions");
    init = motions.front();
  }
  TrICPDiagnostics diag;
  const PairwiseEstimate est = trimmed_icp(source, target, init, cfg, &diag);
  std::cout << "motion:\n";
  print_motion(std::cout, est.motion);
  std::cout << "overlap " << format_double(est.overlap) << "\n"
            << "trimmed_mse " << format_double(est.trimmed_mse) << "\n"
            << "model_resolution " << format_double(est.model_resolution)
            << "\n"
            << "weight "
            << format_double(
                   compute_weight(est.trimmed_mse, est.model_resolution))
            << "\n"
            << "iterations " << diag.iterations << "\n"
            << "converged " << (diag.converged ? "true" : "false") << "\n";
  return 0;
}

int run_decompose(const std::string& matrix_path, const std::string& weights_path,
                  const std::string& out_motions, const std::string& diag_path,
                  const CommonFlags& flags) {
  BlockMotionMatrix m;
  m.x_hat = read_matrix_file(matrix_path);
  m.w = read_matrix_file(weights_path);
  if (m.x_hat.rows() != m.x_hat.cols() || m.x_hat.rows() % 4 != 0 ||
      m.w.rows() != m.x_hat.rows() || m.w.cols() != m.x_hat.cols()) {
    throw Error("ShapeMismatch", "matrix and weights must both be 4Nx4N");
  }
  m.n_scans = static_cast<std::size_t>(m.x_hat.rows() / 4);
  m.omega = m.w.array().ceil().matrix();

  WlrsConfig cfg;
  if (flags.lambda_nuclear >= 0.0) cfg.lambda_nuclear = flags.lambda_nuclear;
  if (flags.max_outer >= 0) cfg.max_outer = static_cast<std::size_t>(flags.max_outer);
  std::ofstream diag_stream;
  if (!diag_path.empty()) {
    diag_stream.open(diag_path);
    if (!diag_stream) {
      throw Error("ConfigError", diag_path + ": cannot open for writing");
    }
    diag_stream << "iter,mu,residual,nnz\n";
    cfg.diagnostics = &diag_stream;
  } else if (flags.verbose) {
    cfg.diagnostics = &std::cerr;
  }

  DecompositionResult res;
  int code = 0;
  try {
    res = decompose(m, cfg);
  } catch (DecompositionNotConverged& nc) {
    res = std::move(nc.partial);
    std::cerr << "error: " << nc.what() << "\n";
    code = 1;
  }
  const double rel = res.residual_history.empty()
                         ? 0.0
                         : res.residual_history.back() / m.x_hat.norm();
  std::cout << "residual " << format_double(rel) << "\n"
            << "outer_iterations " << res.outer_iterations << "\n"
            << "converged " << (res.converged ? "true" : "false") << "\n";
  if (!out_motions.empty()) {
    save_motions(out_motions,
                 recover_global_motions(res.u, res.v, m.n_scans));
  }
  return code;
}

int run_synth(const std::string& spec_path, const std::string& outdir,
              const CommonFlags& flags) {
  const ConfigMap cfg = load_config(spec_path);
  const SyntheticScene scene = scene_from_config(cfg);
  const std::uint64_t seed = flags.seed != 0 ? flags.seed : cfg.get_u64("seed", 0);
  const SceneData data = generate_scene(scene, seed);

  fs::create_directories(outdir);
  ConfigMap reg;
  for (std::size_t i = 0; i < data.scans.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scan_%03zu.ply", i);
    const fs::path path = fs::path(outdir) / name;
    save_cloud(path.string(), data.scans[i], CloudFormat::ply_binary_le);
    reg.set("scan", path.string());
  }
  const fs::path truth_path = fs::path(outdir) / "ground_truth.motions";
  const fs::path init_path = fs::path(outdir) / "initial.motions";
  save_motions(truth_path.string(), data.ground_truth);
  save_motions(init_path.string(), data.initial);

  reg.set("init_motions", init_path.string());
  reg.set("out_motions", (fs::path(outdir) / "registered.motions").string());
  reg.set("out_report", (fs::path(outdir) / "report.txt").string());
  std::ofstream reg_out(fs::path(outdir) / "register.config");
  reg.write(reg_out);

  std::cout << "wrote " << data.scans.size() << " scans to " << outdir << "\n";
  return 0;
}

int run_eval(const std::vector<std::string>& paths, const CommonFlags&) {
  if (paths.size() < 3) {
    throw Error("ConfigError", "eval needs at least 2 scans and a motion file");
  }
  std::vector<PointCloud> scans;
  for (std::size_t k = 0; k + 1 < paths.size(); ++k) {
    scans.push_back(load_cloud(paths[k]));
  }
  const std::vector<RigidMotion> motions = load_motions(paths.back());
  if (motions.size() != scans.size()) {
    throw Error("ConfigError", "motion count does not match scan count");
  }
  TrICPConfig cfg;
  std::cout << "obj " << format_double(objective(scans, motions, cfg)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-view point-cloud registration toolkit"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", flags.seed, "random seed");
    sub->add_option("--threads", flags.threads, "worker threads (0 = auto)");
    sub->add_option("--xi-thr", flags.xi_thr, "overlap acceptance threshold");
    sub->add_option("--lambda-nuclear", flags.lambda_nuclear,
                    "nuclear-norm weight");
    sub->add_option("--max-outer", flags.max_outer, "outer iteration cap");
    sub->add_flag("--verbose", flags.verbose, "log progress to stderr");
  };

  std::string config_path, src_path, dst_path, init_path;
  std::string matrix_path, weights_path, out_motions, diag_path;
  std::string spec_path, outdir;
  std::vector<std::string> eval_paths;

  CLI::App* reg = app.add_subcommand("register", "full registration run");
  reg->add_option("config", config_path, "run configuration file")->required();
  add_common(reg);

  CLI::App* pw = app.add_subcommand("pairwise", "single trimmed-ICP alignment");
  pw->add_option("source", src_path, "data shape")->required();
  pw->add_option("target", dst_path, "model shape")->required();
  pw->add_option("--init", init_path, "motion file with the initial guess");
  add_common(pw);

  CLI::App* dec = app.add_subcommand("decompose", "standalone decomposition");
  dec->add_option("matrix", matrix_path, "matrix dump")->required();
  dec->add_option("weights", weights_path, "weight dump")->required();
  dec->add_option("--out-motions", out_motions, "write recovered motions here");
  dec->add_option("--diagnostics", diag_path, "per-iteration CSV output");
  add_common(dec);

  CLI::App* sy = app.add_subcommand("synth", "generate a synthetic scene");
  sy->add_option("spec", spec_path, "scene spec file")->required();
  sy->add_option("outdir", outdir, "output directory")->required();
  add_common(sy);

  CLI::App* ev = app.add_subcommand("eval", "objective of scans under motions");
  ev->add_option("paths", eval_paths, "scan files followed by a motion file")
      ->required();
  add_common(ev);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (reg->parsed()) return run_register(config_path, flags);
    if (pw->parsed()) return run_pairwise(src_path, dst_path, init_path, flags);
    if (dec->parsed()) {
      return run_decompose(matrix_path, weights_path, out_motions, diag_path,
                           flags);
    }
    if (sy->parsed()) return run_synth(spec_path, outdir, flags);
    if (ev->parsed()) return run_eval(eval_paths, flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return error_exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
