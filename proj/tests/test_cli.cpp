#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvreg/io.hpp"
#include "mvreg/motion_graph.hpp"
#include "mvreg/rng.hpp"

using namespace mvreg;
namespace fs = std::filesystem;

namespace {

const std::string kCli = MVREG_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mvreg_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

int run(const std::string& args, const std::string& out_file = "/dev/null") {
  const std::string cmd = kCli + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("cli: usage errors exit with code 2") {
  TempDir dir;
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("register " + dir.file("missing.config")) == 2);
  CHECK(run("eval just_one_file") == 2);
}

TEST_CASE("cli: synth then register round trip") {
  TempDir dir;
  write_file(dir.file("scene.config"),
             "synth.surface = torus\n"
             "synth.n_views = 4\n"
             "synth.points_per_view = 600\n"
             "synth.overlap_target = 0.6\n"
             "synth.rotation_perturbation = 0.04\n"
             "seed = 5\n");
  REQUIRE(run("synth " + dir.file("scene.config") + " " + dir.file("scene")) ==
          0);
  CHECK(fs::exists(dir.file("scene/scan_000.ply")));
  CHECK(fs::exists(dir.file("scene/ground_truth.motions")));
  CHECK(fs::exists(dir.file("scene/register.config")));

  REQUIRE(run("register " + dir.file("scene/register.config") +
              " --threads 2") == 0);
  REQUIRE(fs::exists(dir.file("scene/report.txt")));
  REQUIRE(fs::exists(dir.file("scene/registered.motions")));

  // The report's history must show no objective regression.
  const std::string report = slurp(dir.file("scene/report.txt"));
  CHECK(report.find("[history]") != std::string::npos);
  std::istringstream in(report);
  std::string line;
  double first_obj = -1.0, last_obj = -1.0;
  bool in_history = false;
  while (std::getline(in, line)) {
    if (line == "[history]") {
      in_history = true;
      std::getline(in, line);  // header
      continue;
    }
    if (!in_history) continue;
    if (line.empty() || line[0] == '[') break;
    const double obj = std::stod(line.substr(line.find(',') + 1));
    if (first_obj < 0.0) first_obj = obj;
    last_obj = obj;
  }
  REQUIRE(first_obj >= 0.0);
  CHECK(last_obj <= first_obj);
}

TEST_CASE("cli: eval on coincident clouds prints a zero objective") {
  TempDir dir;
  Rng rng(101);
  PointCloud cloud;
  for (int k = 0; k < 300; ++k) cloud.points.push_back(rng.vector_in_box(1.0));
  save_cloud(dir.file("a.ply"), cloud, CloudFormat::ply_binary_le);
  save_cloud(dir.file("b.ply"), cloud, CloudFormat::ply_binary_le);
  save_motions(dir.file("id.motions"),
               {RigidMotion::identity(), RigidMotion::identity()});

  const std::string out = dir.file("eval.out");
  REQUIRE(run("eval " + dir.file("a.ply") + " " + dir.file("b.ply") + " " +
              dir.file("id.motions"),
              out) == 0);
  const std::string text = slurp(out);
  REQUIRE(text.rfind("obj ", 0) == 0);
  CHECK(std::stod(text.substr(4)) < 1e-12);
}

TEST_CASE("cli: decompose on an exact matrix dump") {
  TempDir dir;
  Rng rng(102);
  std::vector<RigidMotion> motions{RigidMotion::identity()};
  for (int i = 1; i < 6; ++i) motions.push_back(rng.rigid_motion());
  const Eigen::MatrixXd x = exact_matrix(motions);

  {
    std::ofstream mx(dir.file("x.txt"));
    write_matrix(mx, x);
    std::ofstream mw(dir.file("w.txt"));
    write_matrix(mw, Eigen::MatrixXd::Ones(x.rows(), x.cols()));
  }

  const std::string out = dir.file("dec.out");
  REQUIRE(run("decompose " + dir.file("x.txt") + " " + dir.file("w.txt") +
              " --out-motions " + dir.file("rec.motions") + " --diagnostics " +
              dir.file("diag.csv"),
              out) == 0);
  const std::string text = slurp(out);
  REQUIRE(text.rfind("residual ", 0) == 0);
  const double residual = std::stod(text.substr(9));
  CHECK(residual < 1e-6);

  const std::vector<RigidMotion> recovered = load_motions(dir.file("rec.motions"));
  REQUIRE(recovered.size() == motions.size());
  for (std::size_t i = 0; i < motions.size(); ++i) {
    CHECK(rotation_geodesic(recovered[i], motions[i]) < 1e-6);
  }
  CHECK(slurp(dir.file("diag.csv")).rfind("iter,mu,residual,nnz", 0) == 0);
}

TEST_CASE("cli: pairwise alignment output") {
  TempDir dir;
  Rng rng(103);
  PointCloud source;
  for (int k = 0; k < 500; ++k) {
    const double x = rng.uniform(0.0, 1.0);
    const double y = rng.uniform(0.0, 1.0);
    source.points.emplace_back(x, y, 0.2 * std::sin(3 * x) * std::cos(2 * y));
  }
  const RigidMotion g = RigidMotion::translate({0.02, -0.01, 0.03});
  save_cloud(dir.file("src.ply"), source, CloudFormat::ply_binary_le);
  save_cloud(dir.file("dst.ply"), transformed(source, g),
             CloudFormat::ply_binary_le);

  const std::string out = dir.file("pw.out");
  REQUIRE(run("pairwise " + dir.file("src.ply") + " " + dir.file("dst.ply"),
              out) == 0);
  const std::string text = slurp(out);
  CHECK(text.find("motion:") != std::string::npos);
  CHECK(text.find("overlap 1") != std::string::npos);
  CHECK(text.find("converged true") != std::string::npos);
}

TEST_CASE("cli: registration failure exits with code 1") {
  TempDir dir;
  Rng rng(104);
  PointCloud a, b;
  for (int k = 0; k < 200; ++k) {
    a.points.push_back(rng.vector_in_box(1.0));
    b.points.push_back(rng.vector_in_box(1.0) + Eigen::Vector3d(1e5, 0, 0));
  }
  save_cloud(dir.file("a.ply"), a, CloudFormat::ply_binary_le);
  save_cloud(dir.file("b.ply"), b, CloudFormat::ply_binary_le);
  write_file(dir.file("run.config"), "scan = " + dir.file("a.ply") +
                                         "\nscan = " + dir.file("b.ply") +
                                         "\nout_motions = " +
                                         dir.file("out.motions") +
                                         "\nout_report = " +
                                         dir.file("report.txt") + "\n");
  const std::string out = dir.file("reg.out");
  CHECK(run("register " + dir.file("run.config"), out) == 1);
  CHECK(slurp(out).find("GraphDisconnected") != std::string::npos);
}
