#include "diffsmooth/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "diffsmooth/error.hpp"
#include "diffsmooth/gaussian.hpp"

namespace diffsmooth {

namespace {

double bernoulli(double z) {
  if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
  return z / std::expm1(z);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Scharfetter-Gummel face coefficients J_{i+1/2} = alpha_i p_i - beta_i p_{i+1}
/// for the flux (f - a'/2) p - (a/2) dp/dx, plus control-volume widths.
struct FluxOperator {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> width;

  FluxOperator(const SdeModel& model, const Grid1D& grid) {
    const std::size_t n = grid.nx;
    const double dx = grid.dx();
    alpha.resize(n - 1);
    beta.resize(n - 1);
    width.assign(n, dx);
    width.front() = width.back() = 0.5 * dx;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double xm = grid.x_min + dx * (static_cast<double>(i) + 0.5);
      const double v = model.drift(xm) - 0.5 * model.diffusion_sq_derivative(xm);
      const double k = 0.5 * std::max(model.diffusion_sq(xm), 0.0);
      if (k <= 1e-300 || std::abs(v) * dx > 700.0 * k) {
        alpha[i] = std::max(v, 0.0);
        beta[i] = std::max(-v, 0.0);
      } else {
        beta[i] = k / dx * bernoulli(v * dx / k);
        alpha[i] = beta[i] + v;
      }
    }
  }
};

struct Tridiagonal {
  std::vector<double> lower;
  std::vector<double> diag;
  std::vector<double> upper;

  void apply(const std::vector<double>& in, std::vector<double>& out) const {
    const std::size_t n = diag.size();
    out[0] = diag[0] * in[0] + upper[0] * in[1];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      out[i] = lower[i] * in[i - 1] + diag[i] * in[i] + upper[i] * in[i + 1];
    }
    out[n - 1] = lower[n - 1] * in[n - 2] + diag[n - 1] * in[n - 1];
  }
};

/// Semi-discrete generator dp/dt = G p. `adjoint` gives the operator acting on
/// w whose Crank-Nicolson step is the exact discrete adjoint of the forward one
/// in the trapezoid inner product.
Tridiagonal generator(const FluxOperator& op, bool adjoint) {
  const std::size_t n = op.width.size();
  Tridiagonal g;
  g.lower.assign(n, 0.0);
  g.diag.assign(n, 0.0);
  g.upper.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = op.width[i];
    double d = 0.0;
    if (i > 0) {
      d -= op.beta[i - 1];
      g.lower[i] = (adjoint ? op.beta[i - 1] : op.alpha[i - 1]) / c;
    }
    if (i + 1 < n) {
      d -= op.alpha[i];
      g.upper[i] = (adjoint ? op.alpha[i] : op.beta[i]) / c;
    }
    g.diag[i] = d / c;
  }
  return g;
}

/// Prefactored (I - h/2 G) and explicit (I + h/2 G) for one step size.
class CrankNicolson {
 public:
  CrankNicolson(const Tridiagonal& g, double h) : h_(h) {
    const std::size_t n = g.diag.size();
    explicit_.lower.resize(n);
    explicit_.diag.resize(n);
    explicit_.upper.resize(n);
    lower_.resize(n);
    cprime_.resize(n);
    inv_denom_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      explicit_.lower[i] = 0.5 * h * g.lower[i];
      explicit_.diag[i] = 1.0 + 0.5 * h * g.diag[i];
      explicit_.upper[i] = 0.5 * h * g.upper[i];
    }
    double prev_c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = -0.5 * h * g.lower[i];
      const double b = 1.0 - 0.5 * h * g.diag[i];
      const double c = -0.5 * h * g.upper[i];
      const double denom = b - (i > 0 ? a * prev_c : 0.0);
      lower_[i] = a;
      inv_denom_[i] = 1.0 / denom;
      cprime_[i] = c * inv_denom_[i];
      prev_c = cprime_[i];
    }
  }

  double step_size() const noexcept { return h_; }

  void step(std::vector<double>& v, std::vector<double>& scratch) const {
    explicit_.apply(v, scratch);
    const std::size_t n = v.size();
    scratch[0] *= inv_denom_[0];
    for (std::size_t i = 1; i < n; ++i) {
      scratch[i] = (scratch[i] - lower_[i] * scratch[i - 1]) * inv_denom_[i];
    }
    for (std::size_t i = n - 1; i-- > 0;) scratch[i] -= cprime_[i] * scratch[i + 1];
    v.swap(scratch);
  }

 private:
  double h_;
  Tridiagonal explicit_;
  std::vector<double> lower_;
  std::vector<double> cprime_;
  std::vector<double> inv_denom_;
};

class StepCache {
 public:
  explicit StepCache(Tridiagonal g) : g_(std::move(g)) {}

  const CrankNicolson& get(double h) {
    for (const auto& s : steps_) {
      if (std::abs(s.step_size() - h) <= 1e-12 * h) return s;
    }
    steps_.emplace_back(g_, h);
    return steps_.back();
  }

 private:
  Tridiagonal g_;
  std::vector<CrankNicolson> steps_;
};

double trapezoid(const std::vector<double>& v, double dx) {
  double s = 0.0;
  for (double x : v) s += x;
  return dx * (s - 0.5 * (v.front() + v.back()));
}

void clamp_negative(std::vector<double>& v, double dx, double tol, double t) {
  double negative = 0.0;
  for (double& x : v) {
    if (x < 0.0) {
      negative -= x;
      x = 0.0;
    }
  }
  if (negative * dx > tol) {
    throw Error(ErrorKind::SchemeInstability,
                "negative mass " + std::to_string(negative * dx) + " at t = " + std::to_string(t));
  }
}

void check_leakage(const std::vector<double>& p, double dx, double tol, double t) {
  const std::size_t n = p.size();
  const std::size_t band = std::max<std::size_t>(2, n / 100);
  double left = 0.0;
  double right = 0.0;
  for (std::size_t i = 0; i < band; ++i) {
    left += p[i];
    right += p[n - 1 - i];
  }
  if (std::max(left, right) * dx > tol) {
    throw Error(ErrorKind::DomainTooSmall,
                "density mass reaches the domain boundary at t = " + std::to_string(t));
  }
}

void apply_likelihood(std::vector<double>& v, const Grid1D& grid, double y, double R) {
  const double inv = 1.0 / (2.0 * R * R);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = grid.x(i) - y;
    v[i] *= std::exp(-d * d * inv);
  }
}

/// Indices of time nodes to store and, per node, the datum index (or npos).
struct Schedule {
  std::vector<double> t;
  std::vector<bool> store;
  std::vector<std::size_t> datum;
};

Schedule make_schedule(const Grid1D& grid, const MeasurementSet& meas, double horizon,
                       const PdeOptions& options) {
  Schedule s;
  s.t = pde_time_nodes(grid, meas, horizon);
  const std::size_t n = s.t.size();
  s.store.assign(n, false);
  s.datum.assign(n, std::numeric_limits<std::size_t>::max());
  const std::size_t every = std::max<std::size_t>(1, options.output_every);
  for (std::size_t i = 0; i < n; ++i) s.store[i] = (i % every == 0) || i + 1 == n;
  for (std::size_t k = 0; k < meas.size(); ++k) {
    const double tk = meas.times[k];
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (std::abs(s.t[i] - tk) < std::abs(s.t[best] - tk)) best = i;
    }
    s.datum[best] = k;
    s.store[best] = true;
  }
  return s;
}

}  // namespace

std::vector<double> Grid1D::nodes() const {
  std::vector<double> xs(nx);
  for (std::size_t i = 0; i < nx; ++i) xs[i] = x(i);
  return xs;
}

void Grid1D::validate() const {
  if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
    throw Error(ErrorKind::InvalidArgument, "grid needs x_min < x_max");
  }
  if (nx < 200) throw Error(ErrorKind::InvalidArgument, "grid needs at least 200 nodes");
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid time step must be positive");
}

Grid1D auto_grid(const SdeModel& model, const InitialLaw& law, const MeasurementSet& meas,
                 double horizon, std::size_t nx, std::size_t steps) {
  if (steps == 0) throw Error(ErrorKind::InvalidArgument, "need at least one time step");
  double lo = law.quantile_at_score(-6.0);
  double hi = law.quantile_at_score(6.0);

  // prior Gaussian-closure envelope, Euler on (m, S) with u = f
  double m = law.mean();
  double S = law.variance();
  const Laurent& f = model.drift_poly();
  const Laurent& a = model.diffusion_sq_poly();
  const std::size_t sub = 2000;
  const double h = horizon / static_cast<double>(sub);
  for (std::size_t i = 0; i <= sub; ++i) {
    const double sd = std::sqrt(std::max(S, 0.0));
    lo = std::min(lo, m - 8.0 * sd);
    hi = std::max(hi, m + 8.0 * sd);
    if (i == sub) break;
    const GaussianMoments mom(m, std::max(S, kVarianceFloor), InverseMomentRule::SecondOrder);
    const double ef = mom.expect(f);
    const double dS = mom.expect(2.0 * f.shifted(1) + a) - 2.0 * m * ef;
    m += h * ef;
    S += h * dS;
    if (!std::isfinite(m) || !std::isfinite(S)) {
      throw Error(ErrorKind::DomainTooSmall, "prior moment envelope diverged");
    }
  }
  for (std::size_t k = 0; k < meas.size(); ++k) {
    lo = std::min(lo, meas.values[k] - 4.0 * meas.noise_std);
    hi = std::max(hi, meas.values[k] + 4.0 * meas.noise_std);
  }
  if (model.nonnegative_state()) lo = std::max(lo, 0.0);
  Grid1D g{lo, hi, nx, horizon / static_cast<double>(steps)};
  g.validate();
  return g;
}

std::vector<double> pde_time_nodes(const Grid1D& grid, const MeasurementSet& meas,
                                   double horizon) {
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(horizon / grid.dt)));
  return make_time_grid(horizon, steps, meas.times);
}

GridDensity initial_density(const InitialLaw& law, const Grid1D& grid) {
  grid.validate();
  double outside = 0.0;
  if (law.kind() == InitialLawKind::Normal) {
    outside = normal_cdf((grid.x_min - law.mu()) / law.sigma()) +
              normal_cdf(-(grid.x_max - law.mu()) / law.sigma());
  } else {
    const double below =
        grid.x_min <= 0.0 ? 0.0 : normal_cdf((std::log(grid.x_min) - law.mu()) / law.sigma());
    outside = below + normal_cdf(-(std::log(grid.x_max) - law.mu()) / law.sigma());
  }
  if (outside > 1e-8) {
    throw Error(ErrorKind::DomainTooSmall,
                "initial law has mass " + std::to_string(outside) + " outside the grid");
  }
  GridDensity d{grid, std::vector<double>(grid.nx), 0.0, true};
  for (std::size_t i = 0; i < grid.nx; ++i) d.values[i] = law.density(grid.x(i));
  const double mass = trapezoid(d.values, grid.dx());
  for (double& v : d.values) v /= mass;
  return d;
}

std::vector<GridDensity> solve_forward(const SdeModel& model, const InitialLaw& law,
                                       const MeasurementSet& meas, const Grid1D& grid,
                                       double horizon, const PdeOptions& options) {
  grid.validate();
  meas.validate(horizon);
  const Schedule sched = make_schedule(grid, meas, horizon, options);
  const double dx = grid.dx();
  StepCache cache(generator(FluxOperator(model, grid), false));

  GridDensity init = initial_density(law, grid);
  std::vector<double> p = std::move(init.values);
  std::vector<double> scratch(p.size());
  std::vector<GridDensity> out;
  out.push_back(GridDensity{grid, p, 0.0, true});

  for (std::size_t i = 1; i < sched.t.size(); ++i) {
    const double t = sched.t[i];
    cache.get(t - sched.t[i - 1]).step(p, scratch);
    clamp_negative(p, dx, options.negative_tolerance, t);
    if (sched.datum[i] != std::numeric_limits<std::size_t>::max()) {
      check_leakage(p, dx, options.leak_tolerance, t);
      apply_likelihood(p, grid, meas.values[sched.datum[i]], meas.noise_std);
      const double mass = trapezoid(p, dx);
      if (!(mass > 1e-300)) {
        throw Error(ErrorKind::DegenerateProduct, "filter mass vanished at t = " + std::to_string(t));
      }
      for (double& v : p) v /= mass;
    }
    if (sched.store[i]) {
      check_leakage(p, dx, options.leak_tolerance, t);
      out.push_back(GridDensity{grid, p, t, true});
    }
  }
  return out;
}

std::vector<GridDensity> solve_backward(const SdeModel& model, const MeasurementSet& meas,
                                        const Grid1D& grid, double horizon,
                                        const PdeOptions& options) {
  grid.validate();
  meas.validate(horizon);
  const Schedule sched = make_schedule(grid, meas, horizon, options);
  StepCache cache(generator(FluxOperator(model, grid), true));

  const std::size_t n = sched.t.size();
  std::vector<double> w(grid.nx, 1.0);
  std::vector<double> scratch(grid.nx);
  std::vector<GridDensity> out;

  auto rescale = [&](double t) {
    double mx = 0.0;
    for (double v : w) mx = std::max(mx, v);
    if (!(mx > 0.0) || !std::isfinite(mx)) {
      throw Error(ErrorKind::DegenerateProduct,
                  "backward function vanished at t = " + std::to_string(t));
    }
    for (double& v : w) v /= mx;
  };

  for (std::size_t i = n; i-- > 0;) {
    const double t = sched.t[i];
    if (i + 1 < n) {
      cache.get(sched.t[i + 1] - t).step(w, scratch);
      for (double& v : w) v = std::max(v, 0.0);
      rescale(t);
    }
    if (sched.store[i]) out.push_back(GridDensity{grid, w, t, false});
    if (sched.datum[i] != std::numeric_limits<std::size_t>::max()) {
      apply_likelihood(w, grid, meas.values[sched.datum[i]], meas.noise_std);
      rescale(t);
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

double grid_mass(const GridDensity& d) { return trapezoid(d.values, d.grid.dx()); }

GridDensity smoothing_density(const GridDensity& p, const GridDensity& w) {
  if (p.values.size() != w.values.size() || p.grid.x_min != w.grid.x_min ||
      p.grid.x_max != w.grid.x_max) {
    throw Error(ErrorKind::InvalidArgument, "densities live on different grids");
  }
  if (std::abs(p.time - w.time) > 1e-9 * std::max(1.0, std::abs(p.time))) {
    throw Error(ErrorKind::InvalidArgument, "densities have different time stamps");
  }
  GridDensity s{p.grid, std::vector<double>(p.values.size()), p.time, true};
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = p.values[i] * w.values[i];
  const double mass = grid_mass(s);
  if (!(mass >= 1e-300)) {
    throw Error(ErrorKind::DegenerateProduct, "integral of p w underflows");
  }
  for (double& v : s.values) v /= mass;
  return s;
}

std::vector<double> posterior_drift(const GridDensity& w, const SdeModel& model) {
  const std::size_t n = w.values.size();
  const double dx = w.grid.dx();
  std::vector<double> logw(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(w.values[i] > 0.0)) {
      throw Error(ErrorKind::LogDomain, "backward function not positive at node " + std::to_string(i));
    }
    logw[i] = std::log(w.values[i]);
  }
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    double grad;
    if (i == 0) {
      grad = (logw[1] - logw[0]) / dx;
    } else if (i + 1 == n) {
      grad = (logw[n - 1] - logw[n - 2]) / dx;
    } else {
      grad = (logw[i + 1] - logw[i - 1]) / (2.0 * dx);
    }
    const double x = w.grid.x(i);
    g[i] = model.drift(x) + model.diffusion_sq(x) * grad;
  }
  return g;
}

std::pair<double, double> grid_moments(const GridDensity& d) {
  const std::size_t n = d.values.size();
  auto weight = [&](std::size_t i) { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; };
  double mass = 0.0;
  double first = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = weight(i) * d.values[i];
    mass += v;
    first += v * d.grid.x(i);
  }
  const double m = first / mass;
  double second = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = d.grid.x(i) - m;
    second += weight(i) * d.values[i] * c * c;
  }
  return {m, second / mass};
}

double smoothing_fp_residual(const std::vector<GridDensity>& smoothing,
                             const std::vector<GridDensity>& backward, const SdeModel& model,
                             const MeasurementSet& meas) {
  if (smoothing.size() != backward.size() || smoothing.size() < 3) {
    throw Error(ErrorKind::InvalidArgument, "need matching frame sequences of length >= 3");
  }
  const Grid1D& grid = smoothing.front().grid;
  const std::size_t nx = grid.nx;
  const double dx = grid.dx();
  double worst = 0.0;
  std::vector<double> flux(nx);
  std::vector<double> ap(nx);
  for (std::size_t j = 1; j + 1 < smoothing.size(); ++j) {
    const double t0 = smoothing[j - 1].time;
    const double t1 = smoothing[j + 1].time;
    bool straddles = false;
    for (double tk : meas.times) {
      if (tk >= t0 - 1e-12 && tk <= t1 + 1e-12) straddles = true;
    }
    if (straddles) continue;
    const auto g = posterior_drift(backward[j], model);
    const auto& p = smoothing[j].values;
    for (std::size_t i = 0; i < nx; ++i) {
      flux[i] = g[i] * p[i];
      ap[i] = model.diffusion_sq(grid.x(i)) * p[i];
    }
    double res2 = 0.0;
    double scale2[3] = {0.0, 0.0, 0.0};
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      const double dtp = (smoothing[j + 1].values[i] - smoothing[j - 1].values[i]) / (t1 - t0);
      const double adv = (flux[i + 1] - flux[i - 1]) / (2.0 * dx);
      const double dif = 0.5 * (ap[i + 1] - 2.0 * ap[i] + ap[i - 1]) / (dx * dx);
      const double r = dtp + adv - dif;
      res2 += r * r;
      scale2[0] += dtp * dtp;
      scale2[1] += adv * adv;
      scale2[2] += dif * dif;
    }
    const double scale = std::sqrt(scale2[0]) + std::sqrt(scale2[1]) + std::sqrt(scale2[2]);
    if (scale > 0.0) worst = std::max(worst, std::sqrt(res2) / scale);
  }
  return worst;
}

}  // namespace diffsmooth
