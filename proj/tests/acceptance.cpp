#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffsmooth/approx_drift.hpp"
#include "diffsmooth/csv.hpp"
#include "diffsmooth/em.hpp"
#include "diffsmooth/error.hpp"
#include "diffsmooth/experiment.hpp"
#include "diffsmooth/gaussian.hpp"
#include "diffsmooth/ocp.hpp"
#include "diffsmooth/oracles.hpp"
#include "diffsmooth/pde.hpp"

using namespace diffsmooth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::string kCli = DIFFSMOOTH_CLI;
const std::string kConfigs = DIFFSMOOTH_CONFIGS;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "diffsmooth_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig bundled(const std::string& name, const fs::path& out) {
  ExperimentConfig cfg = load_config(kConfigs + "/" + name + ".json");
  cfg.output_dir = out.string();
  return cfg;
}

struct Setup {
  SdeModel model;
  InitialLaw law;
  double T;
  MeasurementSet meas;
  Grid1D grid;
};

Setup make_setup(const SdeModel& model, const InitialLaw& law, double T, std::size_t n_data,
                 double R, std::uint64_t path_seed, std::uint64_t meas_seed) {
  const Path path = euler_maruyama(model, law, T / 2000, T, path_seed);
  MeasurementSet meas = generate_measurements(path, equispaced_times(T, n_data), R, meas_seed);
  const Grid1D grid = auto_grid(model, law, meas, T, 2000, 2000);
  return {model, law, T, meas, grid};
}

OcpTrajectory variational(const Setup& s) {
  const auto bw = solve_backward(s.model, s.meas, s.grid, s.T);
  const OcpState z0 = initial_condition_from_backward(initial_density(s.law, s.grid), bw.front());
  return shoot(OcpProblem{s.model, s.meas, s.T}, z0);
}

// 1. OU smoothers against the RTS smoother
Outcome linear_gaussian() {
  const auto t0 = std::chrono::steady_clock::now();
  const Setup s = make_setup(SdeModel::ou(1.0, 0.3), InitialLaw::normal(1.0, 0.2), 0.5, 4, 0.1, 7, 8);
  const auto fw = solve_forward(s.model, s.law, s.meas, s.grid, s.T);
  const auto bw = solve_backward(s.model, s.meas, s.grid, s.T);
  const OcpState z0 = initial_condition_from_backward(initial_density(s.law, s.grid), bw.front());
  const OcpTrajectory traj = shoot(OcpProblem{s.model, s.meas, s.T}, z0);
  const double elapsed = seconds_since(t0);
  std::vector<double> out_t;
  for (const auto& f : fw) out_t.push_back(f.time);
  const KalmanResult kr = kalman_rts({-1.0, 0.3, 0.1}, s.law.mean(), s.law.variance(), s.meas, out_t);
  double err_pde = 0.0, err_var = 0.0;
  for (std::size_t j = 0; j < fw.size(); ++j) {
    const auto [m, S] = grid_moments(smoothing_density(fw[j], bw[j]));
    const KalmanPoint& k = kr.at(fw[j].time);
    const OcpState z = traj.state_at(fw[j].time);
    err_pde = std::max({err_pde, std::abs(m - k.smooth_mean), std::abs(S - k.smooth_var)});
    err_var = std::max({err_var, std::abs(z.m - k.smooth_mean), std::abs(z.S - k.smooth_var)});
  }
  const bool pass = traj.converged && err_var <= 1e-3 && err_pde <= 1e-3 && elapsed < 30.0;
  return {pass, "variational err " + fmt("%.2e", err_var) + ", PDE err " + fmt("%.2e", err_pde) +
                    " over " + std::to_string(fw.size()) + " times, runtime " + fmt("%.2f", elapsed) +
                    " s"};
}

// 2. Fokker-Planck residual of the GBM ansatz along the variational trajectory
Outcome gaussianity() {
  const Setup s = make_setup(SdeModel::gbm(1.0, 0.1), InitialLaw::lognormal(0.0, 0.25), 0.2, 4,
                             0.15, 1, 1001);
  const OcpTrajectory traj = variational(s);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& n : traj.nodes) {
    const double sd = std::sqrt(n.z.S);
    lo = std::min(lo, n.z.m - 8 * sd);
    hi = std::max(hi, n.z.m + 8 * sd);
  }
  lo = std::max(lo, 0.0);
  // controls jump at the data, so the residual is taken per data-free segment
  auto residual = [&](std::size_t nx, std::size_t stride) {
    double worst = 0.0;
    std::size_t begin = 0;
    for (std::size_t k = 1; k < traj.nodes.size(); ++k) {
      const bool boundary =
          k + 1 == traj.nodes.size() ||
          std::find(s.meas.times.begin(), s.meas.times.end(), traj.nodes[k].t) != s.meas.times.end();
      if (!boundary) continue;
      std::vector<double> times;
      std::vector<DriftCoefficients> coeffs;
      std::vector<GaussianMixtureState> moments;
      for (std::size_t j = begin; j <= k; j += stride) {
        const OcpNode& n = traj.nodes[j];
        const ControlPoint v = j == k ? n.v_left : n.v;
        times.push_back(n.t);
        coeffs.emplace_back(ComponentCoefficients{v.A, v.B, n.z.C, n.z.D});
        moments.emplace_back(GaussianParams(n.z.m, n.z.S));
      }
      worst = std::max(worst, fokker_planck_residual(coeffs, moments, s.model, {lo, hi, nx}, times));
      begin = k;
    }
    return worst;
  };
  const double coarse = residual(2000, 2);
  const double fine = residual(3999, 1);
  const double ratio = coarse / fine;
  return {coarse <= 1e-3 && ratio >= 3.0, "residual " + fmt("%.2e", coarse) + " on 2000 nodes, " +
                                              fmt("%.2e", fine) + " refined, ratio " + fmt("%.2f", ratio)};
}

// 3. Monte-Carlo Girsanov KL against closed forms
Outcome girsanov() {
  const double T = 0.5, m0 = 1.0, S0 = 0.04, gamma = 1.0, sigma = 0.3;
  const double A = 0.5, B = -2.0;
  const SdeModel p = SdeModel::ou(gamma, sigma);
  // analytic KL for two linear drifts: Q marginals are Gaussian with RK4 moments
  double analytic = 0.0;
  {
    const std::size_t n = 20000;
    const double h = T / n;
    double m = m0, S = S0;
    auto integrand = [&](double mm, double SS) {
      const double c = B + gamma;
      return 0.5 * ((A + c * mm) * (A + c * mm) + c * c * SS) / (sigma * sigma);
    };
    auto rhs = [&](double mm, double SS) {
      return std::pair<double, double>{A + B * mm, 2 * B * SS + sigma * sigma};
    };
    double prev = integrand(m, S);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k1 = rhs(m, S);
      const auto k2 = rhs(m + 0.5 * h * k1.first, S + 0.5 * h * k1.second);
      const auto k3 = rhs(m + 0.5 * h * k2.first, S + 0.5 * h * k2.second);
      const auto k4 = rhs(m + h * k3.first, S + h * k3.second);
      m += h / 6 * (k1.first + 2 * k2.first + 2 * k3.first + k4.first);
      S += h / 6 * (k1.second + 2 * k2.second + 2 * k3.second + k4.second);
      const double cur = integrand(m, S);
      analytic += 0.5 * h * (prev + cur);
      prev = cur;
    }
  }
  const McEstimate ou_mc = mc_girsanov_kl(
      p, [&](double x, double) { return A + B * x; },
      [&](std::mt19937_64& rng) { return std::normal_distribution<double>(m0, std::sqrt(S0))(rng); },
      T, 10000, T / 2000, 11);
  const double ou_z = std::abs(ou_mc.estimate - analytic) / ou_mc.std_error;

  const Setup s = make_setup(SdeModel::gbm(1.0, 0.1), InitialLaw::lognormal(0.0, 0.25), 0.2, 4,
                             0.15, 1, 1001);
  const OcpTrajectory traj = variational(s);
  const double quad = path_kl(traj, s.model, InverseMomentRule::SecondOrder);
  const auto& nodes = traj.nodes;
  auto drift_q = [&](double x, double t) {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), t,
                               [](double tt, const OcpNode& n) { return tt < n.t; });
    std::size_t k = static_cast<std::size_t>(std::distance(nodes.begin(), it));
    k = std::clamp<std::size_t>(k, 1, nodes.size() - 1);
    const OcpNode& a = nodes[k - 1];
    const OcpNode& b = nodes[k];
    const double w = (t - a.t) / (b.t - a.t);
    const ComponentCoefficients c{(1 - w) * a.v.A + w * b.v_left.A, (1 - w) * a.v.B + w * b.v_left.B,
                                  (1 - w) * a.z.C + w * b.z.C, (1 - w) * a.z.D + w * b.z.D};
    return ansatz_drift_poly(c, s.model)(x);
  };
  const OcpState z0 = nodes.front().z;
  const McEstimate gbm_mc = mc_girsanov_kl(
      s.model, drift_q,
      [&](std::mt19937_64& rng) { return std::normal_distribution<double>(z0.m, std::sqrt(z0.S))(rng); },
      s.T, 10000, s.T / 2000, 12);
  const double gbm_z = std::abs(gbm_mc.estimate - quad) / gbm_mc.std_error;
  return {ou_z <= 3.0 && gbm_z <= 3.0,
          "OU MC " + fmt("%.5f", ou_mc.estimate) + " vs " + fmt("%.5f", analytic) + " (" +
              fmt("%.2f", ou_z) + " s.e.), GBM MC " + fmt("%.5f", gbm_mc.estimate) + " vs " +
              fmt("%.5f", quad) + " (" + fmt("%.2f", gbm_z) + " s.e.)"};
}

// 4. Adjoint and control minimizer
Outcome adjoint() {
  const MeasurementSet none{{}, {}, 1.0};
  std::vector<OcpProblem> probs;
  for (auto rule : {InverseMomentRule::FirstOrder, InverseMomentRule::SecondOrder}) {
    probs.push_back({SdeModel::gbm(1.0, 0.1), none, 1.0, rule});
    probs.push_back({SdeModel::cir(1.0, 0.3, 0.2), none, 1.0, rule});
    probs.push_back({SdeModel::ou(1.0, 0.3), none, 1.0, rule});
  }
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random_state = [&] {
    const double m = 1.1 + 0.5 * u(rng), S = 0.0425 + 0.0375 * u(rng);
    return OcpState{m, S, 0.5 * m / S * (1 + 0.2 * u(rng)), -0.5 / S * (1 + 0.2 * u(rng))};
  };
  auto random_costate = [&] { return Costate{u(rng), 5 * u(rng), 1e-3 * u(rng), 1e-4 * u(rng)}; };

  double worst_fd = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const OcpProblem& p = probs[static_cast<std::size_t>(trial) % probs.size()];
    const OcpState z = random_state();
    const Costate rho = random_costate();
    const ControlPoint v{u(rng), 2 * u(rng)};
    const double t = 0.5 * (1 + u(rng));
    const Costate a = adjoint_rhs(p, z, rho, v, t);
    const double analytic[4] = {a.m, a.S, a.C, a.D};
    for (int k = 0; k < 4; ++k) {
      OcpState hi = z, lo = z;
      double* ph = k == 0 ? &hi.m : k == 1 ? &hi.S : k == 2 ? &hi.C : &hi.D;
      double* pl = k == 0 ? &lo.m : k == 1 ? &lo.S : k == 2 ? &lo.C : &lo.D;
      const double h = 1e-6 * std::max(1.0, std::abs(*ph));
      *ph += h;
      *pl -= h;
      const double fd = -(pontryagin_function(p, hi, rho, v, t) - pontryagin_function(p, lo, rho, v, t)) / (2 * h);
      worst_fd = std::max(worst_fd, std::abs(analytic[k] - fd) / std::max(1.0, std::abs(fd)));
    }
  }

  double worst_grid = 0.0;
  int checked = 0, beaten = 0;
  for (const auto& p : probs) {
    // the first-order rule leaves the GBM and CIR control Hessians indefinite or singular
    if (p.rule == InverseMomentRule::FirstOrder && p.model.kind() != ModelKind::OU) continue;
    for (int trial = 0; trial < 4; ++trial) {
      const OcpState z = random_state();
      const Costate rho = random_costate();
      const ControlPoint v = hamiltonian_minimize(p, z, rho, 0.3);
      if (std::abs(v.A) > 9.5 || std::abs(v.B) > 9.5) continue;
      auto P = [&](double A, double B) { return pontryagin_function(p, z, rho, {A, B}, 0.3); };
      double bestA = 0.0, bestB = 0.0, best = INFINITY;
      for (int i = 0; i <= 400; ++i) {
        for (int j = 0; j <= 400; ++j) {
          const double A = -10 + 0.05 * i, B = -10 + 0.05 * j;
          const double val = P(A, B);
          if (val < best) best = val, bestA = A, bestB = B;
        }
      }
      for (int pass = 0; pass < 20; ++pass) {
        const double cA = bestA, cB = bestB;
        for (int i = -100; i <= 100; ++i) {
          for (int j = -100; j <= 100; ++j) {
            const double A = cA + 1e-3 * i, B = cB + 1e-3 * j;
            const double val = P(A, B);
            if (val < best) best = val, bestA = A, bestB = B;
          }
        }
        if (bestA == cA && bestB == cB) break;
      }
      worst_grid = std::max({worst_grid, std::abs(bestA - v.A), std::abs(bestB - v.B)});
      beaten += P(v.A, v.B) > best + 1e-12 * std::max(1.0, std::abs(best));
      ++checked;
    }
  }
  const bool pass = worst_fd <= 1e-5 && worst_grid <= 2e-3 && checked > 0;
  return {pass, "adjoint FD rel err " + fmt("%.2e", worst_fd) + " over 100 points, minimizer vs grid " +
                    fmt("%.2e", worst_grid) + " over " + std::to_string(checked) + " points (grid value below the analytic one at " +
                    std::to_string(beaten) + ")"};
}

// 5, 6. bundled experiment through the compare command
Outcome experiment(const std::string& name) {
  const fs::path out = scratch(name);
  const ExperimentConfig cfg = bundled(name, out);
  cmd_simulate(cfg, {});
  const int rc = cmd_compare(cfg, {});
  const CsvTable t = read_csv((out / "kl.csv").string());
  const std::size_t ckl = t.column("kl_pde_gauss"), cmp = t.column("m_pde"), csp = t.column("S_pde"),
                    cmv = t.column("m_var"), csv = t.column("S_var");
  double rel = 0.0, kl = 0.0;
  for (const auto& r : t.rows) {
    rel = std::max({rel, std::abs(r[cmv] - r[cmp]) / std::abs(r[cmp]), std::abs(r[csv] - r[csp]) / r[csp]});
    kl = std::max(kl, r[ckl]);
  }
  const bool pass = rc == 0 && rel <= 0.05 && kl < 0.1;
  return {pass, "max relative moment gap " + fmt("%.2e", rel) + ", max KL(PDE||Gauss) " + fmt("%.2e", kl) +
                    " over " + std::to_string(t.rows.size()) + " times"};
}

// 7. EM on 20 seeds
Outcome inference() {
  std::string detail;
  bool pass = true;
  for (const std::string name : {"gbm", "cir"}) {
    const double upper = name == "gbm" ? 2.0 : 2.5;
    int inside = 0, bounded = 0, monotone = 0;
    double lo = INFINITY, hi = -INFINITY;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const fs::path out = scratch(name + "_em");
      ExperimentConfig cfg = bundled(name, out);
      cfg.seed = seed;
      cfg.em.kappa0 = 4.0;
      cfg.em.max_iterations = 10;
      cmd_simulate(cfg, {});
      const EmRun run = run_inference(cfg, {});
      const double k = run.kappa_hat;
      bool mono = !run.partial;
      for (const auto& it : run.iterates) mono = mono && it.F_next <= it.F;
      inside += k >= 0.5 && k <= upper;
      bounded += std::abs(k - 1.0) < 3.0;
      monotone += mono;
      lo = std::min(lo, k);
      hi = std::max(hi, k);
    }
    pass = pass && inside == 20 && bounded == 20 && monotone == 20;
    if (!detail.empty()) detail += "; ";
    detail += name + " kappa_hat in [0.5, " + fmt("%.1f", upper) + "] on " + std::to_string(inside) +
              "/20, |kappa_hat-1|<3 on " + std::to_string(bounded) + "/20, F bound on " +
              std::to_string(monotone) + "/20, range [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]";
  }
  return {pass, detail};
}

// 8. runtime ordering, median of three compare runs per model
Outcome runtime_ordering() {
  std::string detail;
  bool pass = true;
  for (const std::string name : {"gbm", "cir"}) {
    const fs::path out = scratch(name + "_timing");
    const ExperimentConfig cfg = bundled(name, out);
    cmd_simulate(cfg, {});
    std::map<std::string, std::vector<double>> samples;
    for (int rep = 0; rep < 3; ++rep) {
      cmd_compare(cfg, {});
      std::ifstream in(out / "runtime.json");
      const auto j = nlohmann::json::parse(in);
      for (const char* key : {"forward_pde", "boundary_value_problem", "pde_total", "variational_total"}) {
        samples[key].push_back(j.at(key).get<double>());
      }
    }
    auto median = [&](const char* key) {
      auto v = samples[key];
      std::sort(v.begin(), v.end());
      return v[1];
    };
    const double fwd = median("forward_pde"), bvp = median("boundary_value_problem");
    const double pde = median("pde_total"), var = median("variational_total");
    pass = pass && var < pde && fwd >= 5.0 * bvp;
    if (!detail.empty()) detail += "; ";
    detail += name + " variational " + fmt("%.3f", var) + " s vs PDE " + fmt("%.3f", pde) + " s, BVP " +
              fmt("%.4f", bvp) + " s vs forward " + fmt("%.3f", fwd) + " s";
  }
  return {pass, detail};
}

// 9. byte-identical CSV output across repeats and thread counts
std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[e.path().filename().string()] = ss.str();
  }
  return files;
}

Outcome determinism() {
  const std::vector<std::string> commands = {"simulate", "smooth --method pde", "smooth --method variational",
                                             "compare", "infer", "plot"};
  std::string detail;
  bool pass = true;
  for (const std::string name : {"gbm", "cir"}) {
    std::vector<std::map<std::string, std::string>> runs;
    for (const auto& [label, threads] : std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 1}, {"c", 4}}) {
      const fs::path out = scratch(name + "_det_" + label);
      for (const auto& c : commands) {
        const std::string cmd = "DIFFUSMOOTH_THREADS=" + std::to_string(threads) + " \"" + kCli + "\" " + c +
                                " --config \"" + kConfigs + "/" + name + ".json\" --out \"" + out.string() +
                                "\" > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) {
          pass = false;
          detail += name + " '" + c + "' exited with status " + std::to_string(rc) + "; ";
        }
      }
      runs.push_back(csv_files(out));
    }
    const bool same = runs[0] == runs[1] && runs[0] == runs[2] && !runs[0].empty();
    pass = pass && same;
    detail += name + " " + std::to_string(runs[0].size()) + " CSV files " +
              (same ? "identical" : "differ") + " across repeat and 1/4 threads; ";
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"linear-Gaussian exactness", linear_gaussian},
      {"Gaussianity preservation", gaussianity},
      {"Girsanov consistency", girsanov},
      {"adjoint correctness", adjoint},
      {"GBM experiment", [] { return experiment("gbm"); }},
      {"CIR experiment", [] { return experiment("cir"); }},
      {"EM inference", inference},
      {"runtime ordering", runtime_ordering},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] criterion %zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
