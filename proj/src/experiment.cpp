#include "diffsmooth/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "diffsmooth/csv.hpp"
#include "diffsmooth/error.hpp"
#include "diffsmooth/oracles.hpp"
#include "diffsmooth/svg.hpp"

namespace diffsmooth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

void check_keys(const json& obj, const std::string& block, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_error("'" + block + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      config_error("unknown key '" + key + "' in " + block);
    }
  }
}

double number(const json& obj, const std::string& key, const std::string& block) {
  if (!obj.contains(key)) config_error("missing '" + key + "' in " + block);
  const json& v = obj.at(key);
  if (!v.is_number()) config_error("'" + key + "' in " + block + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) config_error("'" + key + "' in " + block + " must be finite");
  return d;
}

double number_or(const json& obj, const std::string& key, const std::string& block, double fallback) {
  return obj.contains(key) ? number(obj, key, block) : fallback;
}

std::size_t count_or(const json& obj, const std::string& key, const std::string& block,
                     std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    config_error("'" + key + "' in " + block + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::vector<double> numbers(const json& obj, const std::string& key, const std::string& block) {
  const json& v = obj.at(key);
  if (!v.is_array()) config_error("'" + key + "' in " + block + " must be an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) config_error("'" + key + "' in " + block + " must hold numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::string text(const json& obj, const std::string& key, const std::string& block) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    config_error("'" + key + "' in " + block + " must be a string");
  }
  return obj.at(key).get<std::string>();
}

template <typename F>
auto wrap(const std::string& block, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    config_error(block + ": " + e.what());
  }
}

SdeModel parse_model(const json& m) {
  const std::string kind = text(m, "kind", "model");
  return wrap("model", [&] {
    if (kind == "gbm") {
      check_keys(m, "model", {"kind", "kappa", "lambda"});
      return SdeModel::gbm(number(m, "kappa", "model"), number(m, "lambda", "model"));
    }
    if (kind == "cir") {
      check_keys(m, "model", {"kind", "kappa", "b", "lambda"});
      return SdeModel::cir(number(m, "kappa", "model"), number(m, "b", "model"),
                           number(m, "lambda", "model"));
    }
    if (kind == "ou") {
      check_keys(m, "model", {"kind", "gamma", "sigma"});
      return SdeModel::ou(number(m, "gamma", "model"), number(m, "sigma", "model"));
    }
    if (kind == "poly") {
      check_keys(m, "model", {"kind", "drift", "diffusion_sq"});
      return SdeModel::poly(numbers(m, "drift", "model"), numbers(m, "diffusion_sq", "model"));
    }
    config_error("unknown model kind '" + kind + "'");
  });
}

InitialLaw parse_law(const json& l) {
  check_keys(l, "initial_law", {"kind", "mu", "sigma"});
  const std::string kind = text(l, "kind", "initial_law");
  const double mu = number(l, "mu", "initial_law");
  const double sigma = number(l, "sigma", "initial_law");
  return wrap("initial_law", [&] {
    if (kind == "lognormal") return InitialLaw::lognormal(mu, sigma);
    if (kind == "normal") return InitialLaw::normal(mu, sigma);
    config_error("unknown initial_law kind '" + kind + "'");
  });
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path out_path(const ExperimentConfig& cfg, const std::string& name) {
  return fs::path(cfg.output_dir) / name;
}

void ensure_output_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + cfg.output_dir + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) { write_text(path.string(), j.dump(2) + "\n"); }

bool is_data_time(double t, const MeasurementSet& meas) {
  return std::any_of(meas.times.begin(), meas.times.end(),
                     [&](double tk) { return std::abs(tk - t) <= 1e-9 * std::max(1.0, t); });
}

PdeOptions pde_options(const ExperimentConfig& cfg) {
  PdeOptions o;
  o.output_every = std::max<std::size_t>(1, cfg.grid.output_every);
  return o;
}

ShootOptions shoot_options(const ExperimentConfig& cfg, const CommandOptions& opts) {
  ShootOptions s = cfg.shoot;
  s.threads = opts.threads;
  return s;
}

struct PdeRun {
  std::vector<GridDensity> forward;
  std::vector<GridDensity> backward;
  double forward_seconds = 0.0;
  double backward_seconds = 0.0;
};

struct VariationalRun {
  OcpTrajectory traj;
  std::vector<double> frame_times;
  double backward_seconds = 0.0;
  double bvp_seconds = 0.0;
};

PdeRun run_pde(const ExperimentConfig& cfg, const MeasurementSet& meas, const Grid1D& grid,
               bool forward) {
  PdeRun run;
  const PdeOptions o = pde_options(cfg);
  if (forward) {
    const auto start = std::chrono::steady_clock::now();
    run.forward = solve_forward(cfg.model, cfg.law, meas, grid, cfg.horizon, o);
    run.forward_seconds = seconds_since(start);
  }
  const auto start = std::chrono::steady_clock::now();
  run.backward = solve_backward(cfg.model, meas, grid, cfg.horizon, o);
  run.backward_seconds = seconds_since(start);
  return run;
}

VariationalRun run_variational(const ExperimentConfig& cfg, const MeasurementSet& meas,
                               const Grid1D& grid, const CommandOptions& opts, const PdeRun& pde) {
  VariationalRun run;
  run.backward_seconds = pde.backward_seconds;
  for (const auto& f : pde.backward) run.frame_times.push_back(f.time);
  const auto start = std::chrono::steady_clock::now();
  const OcpState z0 =
      initial_condition_from_backward(initial_density(cfg.law, grid), pde.backward.front());
  const OcpProblem problem{cfg.model, meas, cfg.horizon, cfg.rule, CostMode::DiscreteMeasurements, {}};
  run.traj = shoot(problem, z0, shoot_options(cfg, opts));
  run.bvp_seconds = seconds_since(start);
  return run;
}

void write_pde_outputs(const ExperimentConfig& cfg, const MeasurementSet& meas, const PdeRun& run) {
  CsvWriter moments(out_path(cfg, "moments_pde.csv").string(), {"t", "m", "S"});
  const std::size_t every = std::max<std::size_t>(1, cfg.grid.density_every);
  for (std::size_t j = 0; j < run.forward.size(); ++j) {
    const GridDensity ps = smoothing_density(run.forward[j], run.backward[j]);
    const auto [m, S] = grid_moments(ps);
    moments.row({ps.time, m, S});
    if (j % every == 0 || j + 1 == run.forward.size() || is_data_time(ps.time, meas)) {
      char name[32];
      std::snprintf(name, sizeof(name), "density_%04zu.csv", j);
      CsvWriter out(out_path(cfg, name).string(), {"x", "p", "w", "ps"});
      for (std::size_t i = 0; i < ps.values.size(); ++i) {
        out.row({ps.grid.x(i), run.forward[j].values[i], run.backward[j].values[i], ps.values[i]});
      }
    }
  }
}

void write_variational_outputs(const ExperimentConfig& cfg, const VariationalRun& run) {
  CsvWriter traj(out_path(cfg, "trajectory.csv").string(),
                 {"t", "m", "S", "C", "D", "A", "B", "rho_m", "rho_S", "rho_C", "rho_D"});
  for (const auto& n : run.traj.nodes) {
    traj.row({n.t, n.z.m, n.z.S, n.z.C, n.z.D, n.v.A, n.v.B, n.rho.m, n.rho.S, n.rho.C, n.rho.D});
  }
  CsvWriter moments(out_path(cfg, "moments_var.csv").string(), {"t", "m", "S"});
  for (double t : run.frame_times) {
    const OcpState z = run.traj.state_at(t);
    moments.row({t, z.m, z.S});
  }
  json diag;
  diag["iterations"] = run.traj.iterations;
  diag["residual"] = run.traj.residual;
  diag["converged"] = run.traj.converged;
  diag["J"] = run.traj.J;
  diag["residual_history"] = run.traj.residual_history;
  diag["cost_history"] = run.traj.cost_history;
  write_json(out_path(cfg, "shoot.json"), diag);
}

int convergence_code(const OcpTrajectory& traj) {
  if (traj.converged) return 0;
  std::cerr << "shooting did not converge: residual " << traj.residual << " after "
            << traj.iterations << " iterations\n";
  return 3;
}

std::vector<double> column(const CsvTable& t, const std::string& name) {
  const std::size_t c = t.column(name);
  std::vector<double> out;
  for (const auto& row : t.rows) out.push_back(row[c]);
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
  check_keys(root, "config", {"model", "initial_law", "horizon", "measurements", "grid", "solver",
                              "em", "simulation", "seed", "output"});
  ExperimentConfig cfg;
  if (!root.contains("model")) config_error("missing 'model' block");
  cfg.model = parse_model(root.at("model"));
  if (!root.contains("initial_law")) config_error("missing 'initial_law' block");
  cfg.law = parse_law(root.at("initial_law"));
  cfg.horizon = number(root, "horizon", "config");
  if (!(cfg.horizon > 0.0)) config_error("horizon must be positive");

  if (!root.contains("measurements")) config_error("missing 'measurements' block");
  {
    const json& m = root.at("measurements");
    check_keys(m, "measurements", {"count", "times", "noise_std", "values", "file"});
    auto& mc = cfg.measurements;
    mc.noise_std = number(m, "noise_std", "measurements");
    if (!(mc.noise_std > 0.0)) config_error("noise_std must be positive");
    if (m.contains("times")) mc.times = numbers(m, "times", "measurements");
    mc.count = count_or(m, "count", "measurements", mc.times.size());
    if (mc.times.empty()) {
      if (mc.count == 0) config_error("measurements need 'count' or 'times'");
      mc.times = equispaced_times(cfg.horizon, mc.count);
    } else if (mc.count != mc.times.size()) {
      config_error("measurement 'count' does not match 'times'");
    }
    if (m.contains("values")) {
      mc.values = numbers(m, "values", "measurements");
      if (mc.values->size() != mc.times.size()) {
        config_error("measurement 'values' does not match the number of times");
      }
    }
    if (m.contains("file")) mc.file = text(m, "file", "measurements");
    MeasurementSet probe{mc.times, std::vector<double>(mc.times.size(), 0.0), mc.noise_std};
    wrap("measurements", [&] {
      probe.validate(cfg.horizon);
      return 0;
    });
  }

  if (root.contains("grid")) {
    const json& g = root.at("grid");
    check_keys(g, "grid", {"nx", "steps", "x_min", "x_max", "output_every", "density_every"});
    cfg.grid.nx = count_or(g, "nx", "grid", cfg.grid.nx);
    cfg.grid.steps = count_or(g, "steps", "grid", cfg.grid.steps);
    if (g.contains("x_min")) cfg.grid.x_min = number(g, "x_min", "grid");
    if (g.contains("x_max")) cfg.grid.x_max = number(g, "x_max", "grid");
    cfg.grid.output_every = count_or(g, "output_every", "grid", cfg.grid.output_every);
    cfg.grid.density_every = count_or(g, "density_every", "grid", cfg.grid.density_every);
    if (cfg.grid.nx < 200) config_error("grid.nx must be at least 200");
    if (cfg.grid.steps < 1) config_error("grid.steps must be positive");
    if (cfg.grid.x_min.has_value() != cfg.grid.x_max.has_value()) {
      config_error("grid.x_min and grid.x_max must be given together");
    }
    if (cfg.grid.x_min && !(*cfg.grid.x_max > *cfg.grid.x_min)) {
      config_error("grid.x_max must exceed grid.x_min");
    }
  }

  if (root.contains("solver")) {
    const json& s = root.at("solver");
    check_keys(s, "solver", {"tolerance", "max_iterations", "fd_step", "steps", "inverse_moments"});
    cfg.shoot.tolerance = number_or(s, "tolerance", "solver", cfg.shoot.tolerance);
    cfg.shoot.max_iterations = count_or(s, "max_iterations", "solver", cfg.shoot.max_iterations);
    cfg.shoot.fd_step = number_or(s, "fd_step", "solver", cfg.shoot.fd_step);
    cfg.shoot.steps = count_or(s, "steps", "solver", cfg.shoot.steps);
    if (s.contains("inverse_moments")) {
      const std::string rule = text(s, "inverse_moments", "solver");
      if (rule == "first_order") {
        cfg.rule = InverseMomentRule::FirstOrder;
      } else if (rule == "second_order") {
        cfg.rule = InverseMomentRule::SecondOrder;
      } else {
        config_error("solver.inverse_moments must be 'first_order' or 'second_order'");
      }
    }
    if (!(cfg.shoot.tolerance > 0.0) || !(cfg.shoot.fd_step > 0.0) || cfg.shoot.steps < 1) {
      config_error("solver tolerance, fd_step and steps must be positive");
    }
  }

  if (root.contains("em")) {
    const json& e = root.at("em");
    check_keys(e, "em", {"kappa0", "max_iterations", "tolerance"});
    cfg.em.kappa0 = number_or(e, "kappa0", "em", cfg.em.kappa0);
    cfg.em.max_iterations = count_or(e, "max_iterations", "em", cfg.em.max_iterations);
    cfg.em.tolerance = number_or(e, "tolerance", "em", cfg.em.tolerance);
    if (cfg.em.max_iterations < 1) config_error("em.max_iterations must be at least 1");
    if (!(cfg.em.tolerance > 0.0)) config_error("em.tolerance must be positive");
  }

  if (root.contains("simulation")) {
    const json& s = root.at("simulation");
    check_keys(s, "simulation", {"dt"});
    cfg.simulation_dt = number_or(s, "dt", "simulation", 0.0);
    if (cfg.simulation_dt < 0.0 || cfg.simulation_dt > cfg.horizon) {
      config_error("simulation.dt must lie in (0, horizon]");
    }
  }

  if (root.contains("seed")) {
    const json& s = root.at("seed");
    if (!s.is_number_unsigned()) config_error("seed must be a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (root.contains("output")) cfg.output_dir = text(root, "output", "config");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

MeasurementSet load_measurements(const ExperimentConfig& cfg) {
  const auto& mc = cfg.measurements;
  MeasurementSet meas;
  meas.noise_std = mc.noise_std;
  if (mc.values) {
    meas.times = mc.times;
    meas.values = *mc.values;
  } else {
    const fs::path file = mc.file.empty() ? out_path(cfg, "measurements.csv") : fs::path(mc.file);
    if (!fs::exists(file)) {
      config_error("measurements file " + file.string() +
                   " not found; run 'simulate' first or pin measurements.values in the config");
    }
    const CsvTable table = read_csv(file.string());
    meas.times = column(table, "t");
    meas.values = column(table, "y");
  }
  wrap("measurements", [&] {
    meas.validate(cfg.horizon);
    return 0;
  });
  return meas;
}

Grid1D experiment_grid(const ExperimentConfig& cfg, const MeasurementSet& meas) {
  if (cfg.grid.x_min) {
    Grid1D g{*cfg.grid.x_min, *cfg.grid.x_max, cfg.grid.nx,
             cfg.horizon / static_cast<double>(cfg.grid.steps)};
    g.validate();
    return g;
  }
  return auto_grid(cfg.model, cfg.law, meas, cfg.horizon, cfg.grid.nx, cfg.grid.steps);
}

int cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opts) {
  ensure_output_dir(cfg);
  const double dt = cfg.simulation_dt > 0.0 ? cfg.simulation_dt : cfg.horizon / 2000.0;
  const Path path = euler_maruyama(cfg.model, cfg.law, dt, cfg.horizon, cfg.seed);
  MeasurementSet meas = generate_measurements(path, cfg.measurements.times, cfg.measurements.noise_std,
                                              cfg.seed + 0x9E3779B97F4A7C15ULL);
  if (cfg.measurements.values) meas.values = *cfg.measurements.values;

  {
    CsvWriter p(out_path(cfg, "path.csv").string(), {"t", "x"});
    for (std::size_t i = 0; i < path.t.size(); ++i) p.row({path.t[i], path.x[i]});
    CsvWriter m(out_path(cfg, "measurements.csv").string(), {"t", "y"});
    for (std::size_t k = 0; k < meas.size(); ++k) m.row({meas.times[k], meas.values[k]});
  }
  if (opts.svg) cmd_plot(cfg);
  return 0;
}

int cmd_smooth(const ExperimentConfig& cfg, SmoothMethod method, const CommandOptions& opts) {
  const MeasurementSet meas = load_measurements(cfg);
  ensure_output_dir(cfg);
  const Grid1D grid = experiment_grid(cfg, meas);
  int code = 0;
  json runtime;
  if (method == SmoothMethod::Pde) {
    const PdeRun pde = run_pde(cfg, meas, grid, true);
    write_pde_outputs(cfg, meas, pde);
    runtime["forward_pde"] = pde.forward_seconds;
    runtime["backward_pde"] = pde.backward_seconds;
    runtime["total"] = pde.forward_seconds + pde.backward_seconds;
    write_json(out_path(cfg, "runtime_pde.json"), runtime);
  } else {
    const PdeRun pde = run_pde(cfg, meas, grid, false);
    const VariationalRun var = run_variational(cfg, meas, grid, opts, pde);
    write_variational_outputs(cfg, var);
    runtime["backward_pde"] = var.backward_seconds;
    runtime["boundary_value_problem"] = var.bvp_seconds;
    runtime["total"] = var.backward_seconds + var.bvp_seconds;
    write_json(out_path(cfg, "runtime_variational.json"), runtime);
    code = convergence_code(var.traj);
  }
  if (opts.svg) cmd_plot(cfg);
  return code;
}

int cmd_compare(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const MeasurementSet meas = load_measurements(cfg);
  ensure_output_dir(cfg);
  const Grid1D grid = experiment_grid(cfg, meas);
  const PdeRun pde = run_pde(cfg, meas, grid, true);
  const VariationalRun var = run_variational(cfg, meas, grid, opts, pde);
  write_pde_outputs(cfg, meas, pde);
  write_variational_outputs(cfg, var);

  {
    CsvWriter kl(out_path(cfg, "kl.csv").string(),
                 {"t", "kl_pde_gauss", "kl_gauss_pde", "m_pde", "S_pde", "m_var", "S_var"});
    for (std::size_t j = 0; j < pde.forward.size(); ++j) {
      const GridDensity ps = smoothing_density(pde.forward[j], pde.backward[j]);
      const auto [mp, Sp] = grid_moments(ps);
      const OcpState z = var.traj.state_at(ps.time);
      const GaussianParams g(z.m, z.S);
      double forward_kl = std::numeric_limits<double>::infinity();
      double reverse_kl = std::numeric_limits<double>::infinity();
      try {
        forward_kl = grid_kl(ps, [&](double x) { return g.density(x); });
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::SupportMismatch) throw;
      }
      GridDensity q{grid, std::vector<double>(grid.nx), ps.time, true};
      for (std::size_t i = 0; i < grid.nx; ++i) q.values[i] = g.density(grid.x(i));
      const double mass = grid_mass(q);
      for (double& v : q.values) v /= mass;
      try {
        reverse_kl = grid_kl(q, [&](double x) {
          const auto i = static_cast<std::size_t>(std::llround((x - grid.x_min) / grid.dx()));
          return ps.values[std::min(i, grid.nx - 1)];
        });
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::SupportMismatch) throw;
      }
      kl.row({ps.time, forward_kl, reverse_kl, mp, Sp, z.m, z.S});
    }
  }

  json runtime;
  runtime["forward_pde"] = pde.forward_seconds;
  runtime["backward_pde"] = pde.backward_seconds;
  runtime["boundary_value_problem"] = var.bvp_seconds;
  runtime["pde_total"] = pde.forward_seconds + pde.backward_seconds;
  runtime["variational_total"] = pde.backward_seconds + var.bvp_seconds;
  write_json(out_path(cfg, "runtime.json"), runtime);
  if (opts.svg) cmd_plot(cfg);
  return convergence_code(var.traj);
}

EmRun run_inference(const ExperimentConfig& cfg, const CommandOptions& opts) {
  if (!cfg.model.has_drift_parameter()) {
    config_error("inference needs a model with a drift parameter (gbm, cir or ou)");
  }
  const MeasurementSet meas = load_measurements(cfg);
  Grid1D grid = experiment_grid(cfg, meas);
  if (!cfg.grid.x_min) {
    // the domain has to hold the prior at the initial guess as well
    const Grid1D alt = auto_grid(cfg.model.with_drift_parameter(cfg.em.kappa0), cfg.law, meas,
                                 cfg.horizon, cfg.grid.nx, cfg.grid.steps);
    grid.x_min = std::min(grid.x_min, alt.x_min);
    grid.x_max = std::max(grid.x_max, alt.x_max);
  }
  const EmContext ctx{cfg.model, cfg.law, meas, cfg.horizon, grid, pde_options(cfg),
                      shoot_options(cfg, opts), cfg.rule};
  return run_em(ctx, cfg.em.kappa0, cfg.em.max_iterations, cfg.em.tolerance);
}

int cmd_infer(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const EmRun run = run_inference(cfg, opts);
  ensure_output_dir(cfg);
  {
    CsvWriter em(out_path(cfg, "em.csv").string(),
                 {"iter", "kappa", "F", "F_kl", "next_kappa", "F_next", "converged"});
    for (const auto& it : run.iterates) {
      em.row({static_cast<double>(it.iter), it.kappa, it.F, it.F_kl, it.next_kappa, it.F_next,
              it.estep_converged ? 1.0 : 0.0});
    }
  }
  std::cout << "kappa_hat " << format_double(run.kappa_hat) << '\n';
  if (!run.converged && !run.partial) {
    std::cout << "EM stopped after " << run.iterates.size() << " iterations without meeting tol\n";
  }
  if (opts.svg) cmd_plot(cfg);
  if (run.partial) {
    std::cerr << "EM stopped early: " << run.failure << '\n';
    return 3;
  }
  return 0;
}

int cmd_plot(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  auto have = [&](const char* name) { return fs::exists(out_path(cfg, name)); };
  auto svg = [&](const char* name) { return out_path(cfg, name).string(); };

  if (have("path.csv")) {
    const CsvTable p = read_csv(out_path(cfg, "path.csv").string());
    std::vector<Series> series{{"path", column(p, "t"), column(p, "x"), false}};
    if (have("measurements.csv")) {
      const CsvTable m = read_csv(out_path(cfg, "measurements.csv").string());
      series.push_back({"data", column(m, "t"), column(m, "y"), true});
    }
    write_text(svg("path.svg"), line_plot("Simulated path", "t", "x", series));
  }
  std::vector<Series> mean, var;
  if (have("moments_pde.csv")) {
    const CsvTable t = read_csv(out_path(cfg, "moments_pde.csv").string());
    mean.push_back({"PDE", column(t, "t"), column(t, "m"), false});
    var.push_back({"PDE", column(t, "t"), column(t, "S"), false});
  }
  if (have("moments_var.csv")) {
    const CsvTable t = read_csv(out_path(cfg, "moments_var.csv").string());
    mean.push_back({"variational", column(t, "t"), column(t, "m"), true});
    var.push_back({"variational", column(t, "t"), column(t, "S"), true});
  }
  if (!mean.empty()) {
    write_text(svg("mean.svg"), line_plot("Smoothing mean", "t", "m", mean));
    write_text(svg("variance.svg"), line_plot("Smoothing variance", "t", "S", var));
  }
  if (have("kl.csv")) {
    const CsvTable t = read_csv(out_path(cfg, "kl.csv").string());
    write_text(svg("kl.svg"),
               line_plot("Relative entropy", "t", "KL",
                         {{"KL(PDE||Gauss)", column(t, "t"), column(t, "kl_pde_gauss"), false},
                          {"KL(Gauss||PDE)", column(t, "t"), column(t, "kl_gauss_pde"), true}}));
  }
  if (have("em.csv")) {
    const CsvTable t = read_csv(out_path(cfg, "em.csv").string());
    write_text(svg("em.svg"),
               line_plot("Parameter inference", "iteration", "kappa",
                         {{"kappa", column(t, "iter"), column(t, "kappa"), false}}));
  }
  std::vector<fs::path> frames;
  if (fs::exists(cfg.output_dir)) {
    for (const auto& entry : fs::directory_iterator(cfg.output_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("density_", 0) == 0 && entry.path().extension() == ".csv") {
        frames.push_back(entry.path());
      }
    }
  }
  std::sort(frames.begin(), frames.end());
  if (!frames.empty() && have("moments_pde.csv")) {
    const std::vector<double> frame_times =
        column(read_csv(out_path(cfg, "moments_pde.csv").string()), "t");
    std::vector<double> ts;
    std::vector<double> xs;
    std::vector<std::vector<double>> values;
    for (const auto& f : frames) {
      const std::size_t j = std::stoul(f.stem().string().substr(8));
      if (j >= frame_times.size()) continue;
      const CsvTable t = read_csv(f.string());
      ts.push_back(frame_times[j]);
      if (xs.empty()) xs = column(t, "x");
      values.push_back(column(t, "ps"));
    }
    write_text(svg("smoothing_density.svg"), heat_plot("Smoothing density", ts, xs, values));
  }
  return 0;
}

}  // namespace diffsmooth
