#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "diffsmooth/csv.hpp"
#include "diffsmooth/error.hpp"
#include "diffsmooth/experiment.hpp"
#include "diffsmooth/oracles.hpp"
#include "diffsmooth/svg.hpp"

using namespace diffsmooth;
namespace fs = std::filesystem;

namespace {

const char* kOu = R"({
  "model": {"kind": "ou", "gamma": 1.0, "sigma": 0.3},
  "initial_law": {"kind": "normal", "mu": 1.0, "sigma": 0.2},
  "horizon": 0.5,
  "measurements": {"count": 4, "noise_std": 0.1},
  "seed": 7
})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("diffsmooth_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DIFFSMOOTH_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ErrorKind config_kind(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

std::vector<double> column(const CsvTable& t, const std::string& name) {
  std::vector<double> out;
  for (const auto& r : t.rows) out.push_back(r[t.column(name)]);
  return out;
}

}  // namespace

TEST_CASE("shortest round-trip formatting") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("CSV round trip with LF endings") {
  const fs::path dir = scratch("csv");
  {
    CsvWriter w((dir / "a.csv").string(), {"t", "x"});
    w.row({0.0, 1.5});
    w.row({0.1, -2.25e-7});
    CHECK_THROWS_AS(w.row({1.0}), Error);
  }
  const std::string text = slurp(dir / "a.csv");
  CHECK(text == "t,x\n0,1.5\n0.1,-2.25e-07\n");
  const CsvTable t = read_csv((dir / "a.csv").string());
  CHECK(t.header == std::vector<std::string>{"t", "x"});
  CHECK(column(t, "x")[1] == -2.25e-7);
  CHECK_THROWS_AS(t.column("y"), Error);
  CHECK_THROWS_AS(read_csv((dir / "missing.csv").string()), Error);
}

TEST_CASE("SVG output is standalone") {
  const std::string svg = line_plot("t", "x", "y", {{"a", {0, 1, 2}, {1, 0, 1}, false}});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  const std::string heat = heat_plot("h", {0, 1}, {0, 1, 2}, {{0, 1, 0}, {1, 2, 1}});
  CHECK(heat.find("<rect") != std::string::npos);
}

TEST_CASE("config parsing and defaults") {
  const ExperimentConfig cfg = parse_config(kOu);
  CHECK(cfg.model.kind() == ModelKind::OU);
  CHECK(cfg.horizon == 0.5);
  CHECK(cfg.measurements.times.size() == 4);
  CHECK(cfg.measurements.times.back() == 0.5);
  CHECK(cfg.grid.nx == 2000);
  CHECK(cfg.grid.steps == 2000);
  CHECK(cfg.em.kappa0 == 4.0);
  CHECK(cfg.em.max_iterations == 10);
  CHECK(cfg.em.tolerance == 1e-4);
  CHECK(cfg.seed == 7);
  CHECK(cfg.rule == InverseMomentRule::SecondOrder);
}

TEST_CASE("config validation") {
  std::string bad = kOu;
  CHECK(config_kind(std::string(kOu).replace(std::string(kOu).find("\"seed\""), 6, "\"sead\"")) == ErrorKind::Config);
  CHECK(config_kind("{ not json") == ErrorKind::Config);
  CHECK(config_kind(R"({"model": {"kind": "ou", "gamma": 1, "sigma": 0.3, "extra": 1},
    "initial_law": {"kind": "normal", "mu": 1, "sigma": 0.2}, "horizon": 1,
    "measurements": {"count": 1, "noise_std": 0.1}})") == ErrorKind::Config);
  CHECK(config_kind(R"({"model": {"kind": "ou", "gamma": 1, "sigma": -0.3},
    "initial_law": {"kind": "normal", "mu": 1, "sigma": 0.2}, "horizon": 1,
    "measurements": {"count": 1, "noise_std": 0.1}})") == ErrorKind::Config);
  CHECK(config_kind(R"({"model": {"kind": "ou", "gamma": 1, "sigma": 0.3},
    "initial_law": {"kind": "normal", "mu": 1, "sigma": 0.2}, "horizon": 1,
    "measurements": {"times": [0.5, 0.2], "noise_std": 0.1}})") == ErrorKind::Config);
  CHECK(config_kind(R"({"model": {"kind": "ou", "gamma": 1, "sigma": 0.3},
    "initial_law": {"kind": "normal", "mu": 1, "sigma": 0.2}, "horizon": 1,
    "measurements": {"count": 2, "values": [1.0], "noise_std": 0.1}})") == ErrorKind::Config);
  CHECK(config_kind(R"({"model": {"kind": "ou", "gamma": 1, "sigma": 0.3},
    "initial_law": {"kind": "normal", "mu": 1, "sigma": 0.2}, "horizon": 1,
    "measurements": {"count": 2, "noise_std": 0.1}, "grid": {"nx": 100}})") == ErrorKind::Config);
  CHECK(config_kind(R"({"model": {"kind": "quartic"},
    "initial_law": {"kind": "normal", "mu": 1, "sigma": 0.2}, "horizon": 1,
    "measurements": {"count": 2, "noise_std": 0.1}})") == ErrorKind::Config);
}

TEST_CASE("bundled configs parse") {
  for (const char* name : {"gbm.json", "cir.json", "ou.json"}) {
    CHECK_NOTHROW(load_config(std::string(DIFFSMOOTH_CONFIGS) + "/" + name));
  }
  const ExperimentConfig gbm = load_config(std::string(DIFFSMOOTH_CONFIGS) + "/gbm.json");
  CHECK(gbm.model.params()[0] == 1.0);
  CHECK(gbm.model.params()[1] == 0.1);
  CHECK(gbm.measurements.noise_std == 0.15);
  CHECK(gbm.horizon == 0.2);
  CHECK(gbm.measurements.times.size() == 4);
  const ExperimentConfig cir = load_config(std::string(DIFFSMOOTH_CONFIGS) + "/cir.json");
  CHECK(cir.model.params()[1] == 0.3);
  CHECK(cir.model.params()[2] == 0.2);
}

TEST_CASE("simulate honors pinned values and is deterministic") {
  const fs::path dir = scratch("simulate");
  ExperimentConfig cfg = parse_config(kOu);
  cfg.output_dir = (dir / "a").string();
  CHECK(cmd_simulate(cfg, {}) == 0);
  const std::string first = slurp(dir / "a" / "path.csv");
  CHECK(cmd_simulate(cfg, {}) == 0);
  CHECK(slurp(dir / "a" / "path.csv") == first);
  const CsvTable path = read_csv((dir / "a" / "path.csv").string());
  CHECK(path.rows.size() == 2001);

  cfg.measurements.values = std::vector<double>{0.1, 0.2, 0.3, 0.4};
  cfg.output_dir = (dir / "b").string();
  CHECK(cmd_simulate(cfg, {}) == 0);
  const CsvTable m = read_csv((dir / "b" / "measurements.csv").string());
  CHECK(column(m, "y") == std::vector<double>{0.1, 0.2, 0.3, 0.4});
  CHECK(slurp(dir / "b" / "path.csv") == first);
}

TEST_CASE("both smoothers agree on the OU config") {
  const fs::path dir = scratch("smooth");
  ExperimentConfig cfg = parse_config(kOu);
  cfg.output_dir = dir.string();
  REQUIRE(cmd_simulate(cfg, {}) == 0);
  CHECK(cmd_smooth(cfg, SmoothMethod::Pde, {}) == 0);
  CHECK(cmd_smooth(cfg, SmoothMethod::Variational, {}) == 0);
  const CsvTable pde = read_csv((dir / "moments_pde.csv").string());
  const CsvTable var = read_csv((dir / "moments_var.csv").string());
  REQUIRE(pde.rows.size() == var.rows.size());
  for (std::size_t i = 0; i < pde.rows.size(); ++i) {
    CHECK(pde.rows[i][0] == var.rows[i][0]);
    CHECK(std::abs(pde.rows[i][1] - var.rows[i][1]) < 1e-3);
    CHECK(std::abs(pde.rows[i][2] - var.rows[i][2]) < 1e-3);
  }
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(fs::exists(dir / "shoot.json"));
  CHECK(fs::exists(dir / "runtime_pde.json"));
  CHECK(fs::exists(dir / "runtime_variational.json"));
  const CsvTable traj = read_csv((dir / "trajectory.csv").string());
  CHECK(traj.header == std::vector<std::string>{"t", "m", "S", "C", "D", "A", "B", "rho_m", "rho_S",
                                                "rho_C", "rho_D"});
  const CsvTable frame = read_csv((dir / "density_0000.csv").string());
  CHECK(frame.header == std::vector<std::string>{"x", "p", "w", "ps"});

  // a density compared with itself has zero relative entropy
  GridDensity ps{Grid1D{column(frame, "x").front(), column(frame, "x").back(), frame.rows.size(), 1.0},
                 column(frame, "ps"), 0.0, true};
  const auto values = ps.values;
  const double kl = grid_kl(ps, [&](double x) {
    const auto i = static_cast<std::size_t>(std::llround((x - ps.grid.x_min) / ps.grid.dx()));
    return values[i];
  });
  CHECK(std::abs(kl) <= 1e-8);
}

TEST_CASE("compare and plot write their artefacts") {
  const fs::path dir = scratch("compare");
  ExperimentConfig cfg = parse_config(kOu);
  cfg.output_dir = dir.string();
  REQUIRE(cmd_simulate(cfg, {}) == 0);
  CHECK(cmd_compare(cfg, {true, 1}) == 0);
  const CsvTable kl = read_csv((dir / "kl.csv").string());
  for (double v : column(kl, "kl_pde_gauss")) CHECK(v < 1e-6);
  for (double v : column(kl, "kl_gauss_pde")) CHECK(v < 1e-6);
  const std::string runtime = slurp(dir / "runtime.json");
  for (const char* key : {"forward_pde", "backward_pde", "boundary_value_problem", "pde_total",
                          "variational_total"}) {
    CHECK(runtime.find(key) != std::string::npos);
  }
  for (const char* svg : {"path.svg", "mean.svg", "variance.svg", "kl.svg", "smoothing_density.svg"}) {
    CHECK(fs::exists(dir / svg));
  }
}

TEST_CASE("infer with a huge tolerance keeps the initial guess") {
  const fs::path dir = scratch("infer");
  ExperimentConfig cfg = parse_config(kOu);
  cfg.output_dir = dir.string();
  cfg.em.tolerance = 1e9;
  cfg.em.kappa0 = 2.5;
  REQUIRE(cmd_simulate(cfg, {}) == 0);
  CHECK(cmd_infer(cfg, {}) == 0);
  const CsvTable em = read_csv((dir / "em.csv").string());
  CHECK(em.header.front() == "iter");
  REQUIRE(em.rows.size() == 1);
  CHECK(column(em, "kappa")[0] == 2.5);
}

TEST_CASE("CLI exit codes") {
  const fs::path dir = scratch("cli");
  const std::string cfg = (dir / "ou.json").string();
  std::ofstream(cfg) << kOu;
  const std::string out = " --out " + (dir / "out").string();
  CHECK(run_cli("smooth --method pde --config " + cfg + out) == 2);
  CHECK(run_cli("simulate --config " + cfg + out) == 0);
  CHECK(run_cli("smooth --method variational --config " + cfg + out) == 0);
  CHECK(run_cli("smooth --method spline --config " + cfg + out) == 2);
  CHECK(run_cli("simulate --config " + (dir / "nope.json").string()) == 2);
  CHECK(run_cli("bogus") == 2);
  const std::string bad = (dir / "bad.json").string();
  std::ofstream(bad) << R"({"model": {"kind": "ou", "gamma": 1, "sigma": 0.3}, "typo": 1})";
  CHECK(run_cli("simulate --config " + bad + out) == 2);
  // a one-iteration shooting budget cannot meet the tolerance
  const std::string tight = (dir / "tight.json").string();
  std::string text = kOu;
  text.replace(text.find("\"seed\""), 0, "\"solver\": {\"max_iterations\": 1, \"tolerance\": 1e-15},\n  ");
  std::ofstream(tight) << text;
  CHECK(run_cli("smooth --method variational --config " + tight + out) == 3);
  CHECK(fs::exists(dir / "out" / "trajectory.csv"));
}

TEST_CASE("seed override changes the data") {
  const fs::path dir = scratch("seed");
  const std::string cfg = (dir / "ou.json").string();
  std::ofstream(cfg) << kOu;
  REQUIRE(run_cli("simulate --config " + cfg + " --out " + (dir / "a").string()) == 0);
  REQUIRE(run_cli("simulate --config " + cfg + " --seed 8 --out " + (dir / "b").string()) == 0);
  REQUIRE(run_cli("simulate --config " + cfg + " --seed 7 --out " + (dir / "c").string()) == 0);
  CHECK(slurp(dir / "a" / "path.csv") != slurp(dir / "b" / "path.csv"));
  CHECK(slurp(dir / "a" / "path.csv") == slurp(dir / "c" / "path.csv"));
}
