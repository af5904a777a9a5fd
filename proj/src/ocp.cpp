#include "diffsmooth/ocp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include "diffsmooth/error.hpp"

namespace diffsmooth {

namespace {

double observation_at(const OcpProblem& problem, double t) {
  if (problem.mode != CostMode::ContinuousObservation) return 0.0;
  if (!problem.observation) {
    throw Error(ErrorKind::InvalidArgument, "continuous-observation mode needs an observation path");
  }
  return problem.observation(t);
}

std::string describe(const OcpState& z, double t) {
  std::ostringstream os;
  os << "t=" << t << " m=" << z.m << " S=" << z.S << " C=" << z.C << " D=" << z.D;
  return os.str();
}

/// Model polynomials that do not change along a trajectory.
struct Context {
  Laurent a;
  Laurent f;
  Laurent ia;    // 1 / a
  Laurent base;  // a'/2 - f
  Laurent xa;
  Laurent x2a;
  bool continuous;

  explicit Context(const OcpProblem& problem)
      : a(problem.model.diffusion_sq_poly()),
        f(problem.model.drift_poly()),
        ia(problem.model.inverse_diffusion_sq_poly()),
        base(0.5 * problem.model.diffusion_sq_derivative_poly() - problem.model.drift_poly()),
        xa(a.shifted(1)),
        x2a(a.shifted(2)),
        continuous(problem.mode == CostMode::ContinuousObservation) {
    require_closable_diffusion(problem.model);
  }
};

struct PointResult {
  ControlPoint v;
  StateRates dz;
  Costate drho;
  double L = 0.0;
};

/// Everything the integrator needs at one (z, rho, t), sharing one closure.
class PointEvaluator {
 public:
  PointEvaluator(const OcpProblem& problem, const Context& ctx, const OcpState& z)
      : problem_(problem), ctx_(ctx), z_(z), mom_(z.m, z.S, problem.rule) {
    if (!(z.S >= kVarianceFloor) || !std::isfinite(z.m)) {
      throw Error(ErrorKind::TrajectoryDegenerate, "variance left the admissible range");
    }
    q_ = ctx.base + ctx.a * Laurent{z.C, z.D};
  }

  ControlPoint minimize(const Costate& rho, double t) const {
    const Laurent qia = q_ * ctx_.ia;
    const double h11 = mom_.expect(ctx_.ia);
    const double h12 = mom_.expect(ctx_.ia.shifted(1));
    const double h22 = mom_.expect(ctx_.ia.shifted(2));
    double b1 = mom_.expect(qia) + rho.m - rho.C * z_.D;
    double b2 = mom_.expect(qia.shifted(1)) + rho.m * z_.m + 2.0 * rho.S * z_.S - rho.C * z_.C -
                2.0 * rho.D * z_.D;
    if (ctx_.continuous) {
      const double y = observation_at(problem_, t);
      b1 += y;
      b2 += y * z_.m;
    }
    const double det = h11 * h22 - h12 * h12;
    if (!(h11 > 0.0) || !(det > 1e-14 * std::abs(h11 * h22)) || !std::isfinite(det)) {
      throw Error(ErrorKind::DegenerateControl,
                  "control Hessian not positive definite at " + describe(z_, t));
    }
    return {(-b1 * h22 + b2 * h12) / det, (-b2 * h11 + b1 * h12) / det};
  }

  double cost(const ControlPoint& v, double t) const {
    const Laurent r = Laurent{v.A, v.B} + q_;
    double L = 0.5 * mom_.expect(r * r * ctx_.ia);
    if (ctx_.continuous) {
      L += observation_at(problem_, t) * mom_.expect(r + ctx_.f) + 0.5 * mom_.moment(2);
    }
    return L;
  }

  /// Rates of z and rho plus the running cost at a fixed control.
  PointResult rates(const Costate& rho, const ControlPoint& v, double t) const {
    const GaussianMoments& mom = mom_;
    const Laurent r = Laurent{v.A, v.B} + q_;
    const Laurent u = r + ctx_.f;
    const Laurent p2 = 2.0 * u.shifted(1) + ctx_.a;
    const Laurent cost = 0.5 * (r * r * ctx_.ia);
    const Laurent ria = r * ctx_.a * ctx_.ia;

    const double Eu = mom.expect(u);
    const double Ea = mom.expect(ctx_.a);
    const double Exa = mom.expect(ctx_.xa);
    const double Ex2a = mom.expect(ctx_.x2a);

    PointResult out;
    out.v = v;
    out.dz = {Eu, mom.expect(p2) - 2.0 * z_.m * Eu, -z_.D * v.A - v.B * z_.C, -2.0 * z_.D * v.B};
    out.L = mom.expect(cost);

    // partial derivatives of H1 = E[u], H2 = E[2xu + a] - 2m E[u], H3, H4
    const double h1_m = mom.d_mean(u);
    const double h1_S = mom.d_var(u);
    const double h2_m = mom.d_mean(p2) - 2.0 * Eu - 2.0 * z_.m * h1_m;
    const double h2_S = mom.d_var(p2) - 2.0 * z_.m * h1_S;
    const double h2_C = 2.0 * Exa - 2.0 * z_.m * Ea;
    const double h2_D = 2.0 * Ex2a - 2.0 * z_.m * Exa;

    double l_m = mom.d_mean(cost);
    double l_S = mom.d_var(cost);
    double l_C = mom.expect(ria);
    double l_D = mom.expect(ria.shifted(1));
    if (ctx_.continuous) {
      const double y = observation_at(problem_, t);
      out.L += y * Eu + 0.5 * mom.moment(2);
      l_m += y * h1_m + z_.m;
      l_S += y * h1_S + 0.5;
      l_C += y * Ea;
      l_D += y * Exa;
    }
    out.drho.m = -(rho.m * h1_m + rho.S * h2_m + l_m);
    out.drho.S = -(rho.m * h1_S + rho.S * h2_S + l_S);
    out.drho.C = -(rho.m * Ea + rho.S * h2_C - rho.C * v.B + l_C);
    out.drho.D = -(rho.m * Exa + rho.S * h2_D - rho.C * v.A - 2.0 * rho.D * v.B + l_D);
    return out;
  }

  PointResult optimal(const Costate& rho, double t) const { return rates(rho, minimize(rho, t), t); }

 private:
  const OcpProblem& problem_;
  const Context& ctx_;
  OcpState z_;
  GaussianMoments mom_;
  Laurent q_;
};


/// Closed-form evaluation for affine drift f = f0 + f1 x and monomial
/// diffusion a = ca x^p with p in {0, 1, 2}. The residual r = u - f is then a
/// cubic, and every expectation needs moments of order -2..6 only.
class FastKernel {
 public:
  static bool supports(const OcpProblem& problem) {
    const Laurent& f = problem.model.drift_poly();
    const Laurent& a = problem.model.diffusion_sq_poly();
    if (f.lowest() < 0 || f.degree() > 1) return false;
    int nonzero = 0;
    for (int e = a.lowest(); e <= a.highest(); ++e) nonzero += a.coef(e) != 0.0;
    return nonzero == 1 && a.lowest() >= 0 && a.degree() <= 2;
  }

  explicit FastKernel(const OcpProblem& problem)
      : problem_(problem),
        p_(problem.model.diffusion_sq_poly().degree()),
        ca_(problem.model.diffusion_sq_poly().coef(p_)),
        f0_(problem.model.drift_poly().coef(0)),
        f1_(problem.model.drift_poly().coef(1)),
        first_order_(problem.rule == InverseMomentRule::FirstOrder),
        continuous_(problem.mode == CostMode::ContinuousObservation) {}

  PointResult evaluate(const OcpState& z, const Costate& rho, double t) const {
    if (!(z.S >= kVarianceFloor) || !std::isfinite(z.m)) {
      throw Error(ErrorKind::TrajectoryDegenerate, "variance left the admissible range");
    }
    // moments of order -2..6 at index e + 2, with mean and variance derivatives
    double M[9] = {}, Mm[9] = {}, MS[9] = {};
    const double m = z.m;
    const double S = z.S;
    M[2] = 1.0;
    M[3] = m;
    for (int e = 2; e <= 6; ++e) M[e + 2] = m * M[e + 1] + (e - 1) * S * M[e];
    for (int e = 1; e <= 6; ++e) {
      Mm[e + 2] = e * M[e + 1];
      MS[e + 2] = 0.5 * e * (e - 1) * M[e];
    }
    if (p_ > 0) {
      if (std::abs(m) < 1e-8) {
        throw Error(ErrorKind::NearSingularMean, "mean too close to 0 for inverse moments");
      }
      const double m2 = m * m;
      if (first_order_) {
        const double q = m2 + S;
        M[1] = 1.0 / m;
        Mm[1] = -1.0 / m2;
        MS[1] = 0.0;
        M[0] = 1.0 / q;
        Mm[0] = -2.0 * m / (q * q);
        MS[0] = -1.0 / (q * q);
      } else {
        const double m3 = m2 * m;
        const double m4 = m2 * m2;
        M[1] = 1.0 / m + S / m3;
        Mm[1] = -1.0 / m2 - 3.0 * S / m4;
        MS[1] = 1.0 / m3;
        M[0] = 1.0 / m2 + 3.0 * S / m4;
        Mm[0] = -2.0 / m3 - 12.0 * S / (m4 * m);
        MS[0] = 3.0 / m4;
      }
    }
    auto at = [](const double* arr, int e) { return arr[e + 2]; };

    // q = a'/2 - f + a (C + D x) as a cubic
    double q[4] = {-f0_, -f1_, 0.0, 0.0};
    if (p_ > 0) q[p_ - 1] += 0.5 * p_ * ca_;
    q[p_] += ca_ * z.C;
    q[p_ + 1] += ca_ * z.D;

    const double inv_ca = 1.0 / ca_;
    const double h11 = at(M, -p_) * inv_ca;
    const double h12 = at(M, 1 - p_) * inv_ca;
    const double h22 = at(M, 2 - p_) * inv_ca;
    double g1 = 0.0;
    double g2 = 0.0;
    for (int i = 0; i < 4; ++i) {
      g1 += q[i] * at(M, i - p_);
      g2 += q[i] * at(M, i + 1 - p_);
    }
    g1 *= inv_ca;
    g2 *= inv_ca;
    const double y = continuous_ ? observation_at(problem_, t) : 0.0;
    const double b1 = g1 + rho.m - rho.C * z.D + y;
    const double b2 = g2 + rho.m * m + 2.0 * rho.S * S - rho.C * z.C - 2.0 * rho.D * z.D + y * m;
    const double det = h11 * h22 - h12 * h12;
    if (!(h11 > 0.0) || !(det > 1e-14 * std::abs(h11 * h22)) || !std::isfinite(det)) {
      throw Error(ErrorKind::DegenerateControl,
                  "control Hessian not positive definite at " + describe(z, t));
    }
    const ControlPoint v{(-b1 * h22 + b2 * h12) / det, (-b2 * h11 + b1 * h12) / det};
    return rates(z, rho, v, y, M, Mm, MS, q);
  }

 private:
  PointResult rates(const OcpState& z, const Costate& rho, const ControlPoint& v, double y,
                    const double* M, const double* Mm, const double* MS, const double* q) const {
    auto at = [](const double* arr, int e) { return arr[e + 2]; };
    const double m = z.m;
    double r[4] = {q[0] + v.A, q[1] + v.B, q[2], q[3]};
    double u[4] = {r[0] + f0_, r[1] + f1_, r[2], r[3]};

    double Eu = 0.0, h1_m = 0.0, h1_S = 0.0;
    double Ep2 = 0.0, p2_m = 0.0, p2_S = 0.0;
    double l_C = 0.0, l_D = 0.0;
    for (int i = 0; i < 4; ++i) {
      Eu += u[i] * at(M, i);
      h1_m += u[i] * at(Mm, i);
      h1_S += u[i] * at(MS, i);
      Ep2 += 2.0 * u[i] * at(M, i + 1);
      p2_m += 2.0 * u[i] * at(Mm, i + 1);
      p2_S += 2.0 * u[i] * at(MS, i + 1);
      l_C += r[i] * at(M, i);
      l_D += r[i] * at(M, i + 1);
    }
    const double Ea = ca_ * at(M, p_);
    const double Exa = ca_ * at(M, p_ + 1);
    const double Ex2a = ca_ * at(M, p_ + 2);
    Ep2 += Ea;
    p2_m += ca_ * at(Mm, p_);
    p2_S += ca_ * at(MS, p_);

    // running cost E[r^2 / a] / 2 and its moment derivatives
    double L = 0.0, l_m = 0.0, l_S = 0.0;
    for (int i = 0; i < 4; ++i) {
      if (r[i] == 0.0) continue;
      for (int j = 0; j < 4; ++j) {
        const double w = r[i] * r[j];
        const int e = i + j - p_;
        L += w * at(M, e);
        l_m += w * at(Mm, e);
        l_S += w * at(MS, e);
      }
    }
    const double half_inv = 0.5 / ca_;
    L *= half_inv;
    l_m *= half_inv;
    l_S *= half_inv;

    const double h2_m = p2_m - 2.0 * Eu - 2.0 * m * h1_m;
    const double h2_S = p2_S - 2.0 * m * h1_S;
    const double h2_C = 2.0 * Exa - 2.0 * m * Ea;
    const double h2_D = 2.0 * Ex2a - 2.0 * m * Exa;
    if (continuous_) {
      L += y * Eu + 0.5 * at(M, 2);
      l_m += y * h1_m + m;
      l_S += y * h1_S + 0.5;
      l_C += y * Ea;
      l_D += y * Exa;
    }

    PointResult out;
    out.v = v;
    out.L = L;
    out.dz = {Eu, Ep2 - 2.0 * m * Eu, -z.D * v.A - v.B * z.C, -2.0 * z.D * v.B};
    out.drho.m = -(rho.m * h1_m + rho.S * h2_m + l_m);
    out.drho.S = -(rho.m * h1_S + rho.S * h2_S + l_S);
    out.drho.C = -(rho.m * Ea + rho.S * h2_C - rho.C * v.B + l_C);
    out.drho.D = -(rho.m * Exa + rho.S * h2_D - rho.C * v.A - 2.0 * rho.D * v.B + l_D);
    return out;
  }

  const OcpProblem& problem_;
  int p_;
  double ca_;
  double f0_;
  double f1_;
  bool first_order_;
  bool continuous_;
};

using Vec8 = std::array<double, 8>;

Vec8 pack(const OcpState& z, const Costate& r) {
  return {z.m, z.S, z.C, z.D, r.m, r.S, r.C, r.D};
}
OcpState state_of(const Vec8& y) { return {y[0], y[1], y[2], y[3]}; }
Costate costate_of(const Vec8& y) { return {y[4], y[5], y[6], y[7]}; }

/// Integrator-facing evaluation; uses the closed-form kernel when available.
class Evaluator {
 public:
  explicit Evaluator(const OcpProblem& problem) : problem_(problem), ctx_(problem) {
    if (FastKernel::supports(problem)) fast_.emplace(problem);
  }

  PointResult operator()(const Vec8& y, double t) const {
    if (fast_) return fast_->evaluate(state_of(y), costate_of(y), t);
    return PointEvaluator(problem_, ctx_, state_of(y)).optimal(costate_of(y), t);
  }

 private:
  const OcpProblem& problem_;
  Context ctx_;
  std::optional<FastKernel> fast_;
};

Vec8 derivative(const PointResult& p) {
  return {p.dz.m, p.dz.S, p.dz.C, p.dz.D, p.drho.m, p.drho.S, p.drho.C, p.drho.D};
}

std::vector<std::size_t> datum_nodes(const std::vector<double>& t, const MeasurementSet& meas) {
  std::vector<std::size_t> idx(t.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t k = 0; k < meas.size(); ++k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (std::abs(t[i] - meas.times[k]) < std::abs(t[best] - meas.times[k])) best = i;
    }
    idx[best] = k;
  }
  return idx;
}

Eigen::Vector4d residual_vector(const OcpTrajectory& traj, const OcpProblem& problem) {
  const OcpNode& last = traj.nodes.back();
  const Costate target = terminal_costate(problem, last.z);
  return {last.rho.m - target.m, last.rho.S - target.S, last.rho.C - target.C,
          last.rho.D - target.D};
}

}  // namespace

double Costate::norm() const noexcept { return std::sqrt(m * m + S * S + C * C + D * D); }

OcpState OcpTrajectory::state_at(double t) const {
  if (nodes.empty()) throw Error(ErrorKind::OutOfRange, "empty trajectory");
  if (t <= nodes.front().t) return nodes.front().z;
  if (t >= nodes.back().t) return nodes.back().z;
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), t,
                                   [](double v, const OcpNode& n) { return v < n.t; });
  const OcpNode& b = *it;
  const OcpNode& a = *(it - 1);
  const double w = (t - a.t) / (b.t - a.t);
  return {(1 - w) * a.z.m + w * b.z.m, (1 - w) * a.z.S + w * b.z.S, (1 - w) * a.z.C + w * b.z.C,
          (1 - w) * a.z.D + w * b.z.D};
}

OcpState initial_condition_from_backward(const GridDensity& p0, const GridDensity& w0) {
  const GridDensity ps = smoothing_density(p0, w0);
  const auto [m, S] = grid_moments(ps);
  return gaussian_consistent_state(m, S);
}

double running_cost(const OcpProblem& problem, const OcpState& z, const ControlPoint& v, double t) {
  const Context ctx(problem);
  return PointEvaluator(problem, ctx, z).cost(v, t);
}

double measurement_penalty(const OcpState& z, double y, double R) {
  return (z.m * z.m + z.S - 2.0 * y * z.m + y * y) / (2.0 * R * R);
}

Costate measurement_jump_gradient(const OcpState& z, double y, double R) {
  const double r2 = R * R;
  return {(z.m - y) / r2, 0.5 / r2, 0.0, 0.0};
}

double pontryagin_function(const OcpProblem& problem, const OcpState& z, const Costate& rho,
                           const ControlPoint& v, double t) {
  const StateRates h = dynamics(problem, z, v);
  return rho.m * h.m + rho.S * h.S + rho.C * h.C + rho.D * h.D + running_cost(problem, z, v, t);
}

ControlPoint hamiltonian_minimize(const OcpProblem& problem, const OcpState& z, const Costate& rho,
                                  double t) {
  const Context ctx(problem);
  return PointEvaluator(problem, ctx, z).minimize(rho, t);
}

StateRates dynamics(const OcpProblem& problem, const OcpState& z, const ControlPoint& v) {
  const MomentRates mr = moment_rhs(problem.model, z, v.A, v.B);
  const CouplingRates cr = coupling_rhs({v.A, v.B, z.C, z.D});
  return {mr.dm, mr.dS, cr.dC, cr.dD};
}

Costate adjoint_rhs(const OcpProblem& problem, const OcpState& z, const Costate& rho,
                    const ControlPoint& v, double t) {
  const Context ctx(problem);
  return PointEvaluator(problem, ctx, z).rates(rho, v, t).drho;
}

Costate terminal_costate(const OcpProblem& problem, const OcpState& zT) {
  (void)zT;
  if (problem.mode == CostMode::ContinuousObservation) {
    return {-observation_at(problem, problem.horizon), 0.0, 0.0, 0.0};
  }
  return {};
}

OcpTrajectory integrate_forward(const OcpProblem& problem, const OcpState& z0, const Costate& rho0,
                                std::size_t steps) {
  const Evaluator evaluate(problem);
  const std::vector<double> t = make_time_grid(problem.horizon, steps, problem.meas.times);
  const auto datum = datum_nodes(t, problem.meas);
  const double R = problem.meas.noise_std;
  const std::size_t n = t.size();

  OcpTrajectory traj;
  traj.nodes.resize(n);
  Vec8 y = pack(z0, rho0);

  // At each node: record the pre-jump cost, apply the jump, then evaluate the
  // post-jump point whose rates serve as the first RK4 stage.
  PointResult here;
  for (std::size_t i = 0;; ++i) {
    OcpNode& node = traj.nodes[i];
    node.t = t[i];
    node.z = state_of(y);
    const bool jump = datum[i] != std::numeric_limits<std::size_t>::max();
    if (jump) {
      if (i > 0) {
        const PointResult before = evaluate(y, t[i]);
        node.cost_left = before.L;
        node.v_left = before.v;
      }
      const Costate g = measurement_jump_gradient(node.z, problem.meas.values[datum[i]], R);
      y[4] -= g.m;
      y[5] -= g.S;
      y[6] -= g.C;
      y[7] -= g.D;
    }
    here = evaluate(y, t[i]);
    node.rho = costate_of(y);
    node.v = here.v;
    node.cost_right = here.L;
    if (!jump || i == 0) {
      node.cost_left = here.L;
      node.v_left = here.v;
    }
    if (i + 1 == n) break;

    const double h = t[i + 1] - t[i];
    const double tm = t[i] + 0.5 * h;
    const Vec8 k1 = derivative(here);
    Vec8 tmp;
    for (int j = 0; j < 8; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
    const Vec8 k2 = derivative(evaluate(tmp, tm));
    for (int j = 0; j < 8; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
    const Vec8 k3 = derivative(evaluate(tmp, tm));
    for (int j = 0; j < 8; ++j) tmp[j] = y[j] + h * k3[j];
    const Vec8 k4 = derivative(evaluate(tmp, t[i + 1]));
    for (int j = 0; j < 8; ++j) y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    for (double v : y) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::TrajectoryDegenerate,
                    "non-finite state at t = " + std::to_string(t[i + 1]));
      }
    }
    if (!(y[1] >= kVarianceFloor)) {
      throw Error(ErrorKind::TrajectoryDegenerate,
                  "variance hit the floor at t = " + std::to_string(t[i + 1]));
    }
  }
  traj.J = total_cost(traj, problem);
  return traj;
}

namespace {

struct Trial {
  bool ok = false;
  OcpTrajectory traj;
  Eigen::Vector4d r = Eigen::Vector4d::Constant(std::numeric_limits<double>::infinity());
  double norm = std::numeric_limits<double>::infinity();
};

class Newton {
 public:
  Newton(const OcpProblem& problem, const OcpState& z0, const ShootOptions& options)
      : problem_(problem), z0_(z0), options_(options) {}

  Trial evaluate(const Eigen::Vector4d& rho0, std::size_t steps) const {
    Trial trial;
    try {
      trial.traj =
          integrate_forward(problem_, z0_, {rho0[0], rho0[1], rho0[2], rho0[3]}, steps);
      trial.r = residual_vector(trial.traj, problem_);
      trial.norm = trial.r.norm();
      trial.ok = std::isfinite(trial.norm);
    } catch (const Error&) {
      trial.ok = false;
    }
    return trial;
  }

  bool jacobian(const Eigen::Vector4d& rho0, const Trial& cur, std::size_t steps,
                Eigen::Matrix4d& jac) const {
    std::array<Trial, 4> cols;
    std::array<double, 4> step{};
    auto column = [&](int j) {
      Eigen::Vector4d p = rho0;
      step[j] = options_.fd_step * std::max(1.0, std::abs(rho0[j]));
      p[j] += step[j];
      cols[j] = evaluate(p, steps);
    };
    if (options_.threads > 1) {
      std::vector<std::thread> pool;
      for (int j = 0; j < 4; ++j) pool.emplace_back(column, j);
      for (auto& th : pool) th.join();
    } else {
      for (int j = 0; j < 4; ++j) column(j);
    }
    for (int j = 0; j < 4; ++j) {
      if (!cols[j].ok) return false;
      jac.col(j) = (cols[j].r - cur.r) / step[j];
    }
    return true;
  }

  /// Damped Newton from rho0 on a grid with `steps` steps. A supplied
  /// Jacobian (`reuse`) is kept while it contracts the residual tenfold per
  /// step; otherwise a fresh finite-difference Jacobian is formed each step.
  void run(std::size_t steps, double tolerance, Eigen::Vector4d& rho0, Trial& cur,
           Eigen::Matrix4d& jac, bool reuse) {
    while (cur.norm > tolerance && iterations < options_.max_iterations) {
      ++iterations;
      bool accepted = false;
      for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
        if (!reuse) {
          if (!jacobian(rho0, cur, steps, jac)) return;
        }
        const Eigen::Vector4d delta = jac.fullPivLu().solve(-cur.r);
        if (delta.allFinite()) {
          const double before = cur.norm;
          double lambda = 1.0;
          for (int half = 0; half < 30; ++half, lambda *= 0.5) {
            Trial trial = evaluate(rho0 + lambda * delta, steps);
            if (trial.ok && trial.norm < cur.norm) {
              rho0 += lambda * delta;
              cur = std::move(trial);
              accepted = true;
              break;
            }
          }
          if (accepted && reuse && cur.norm > 0.1 * before) reuse = false;
        }
        if (!accepted) {
          if (!reuse) return;
          reuse = false;
        }
      }
      if (!accepted) return;
      residuals.push_back(cur.norm);
      costs.push_back(cur.traj.J);
    }
  }

  std::size_t iterations = 0;
  std::vector<double> residuals;
  std::vector<double> costs;

 private:
  const OcpProblem& problem_;
  OcpState z0_;
  ShootOptions options_;
};

}  // namespace

OcpTrajectory shoot(const OcpProblem& problem, const OcpState& z0, const ShootOptions& options) {
  problem.meas.validate(problem.horizon);
  if (!(z0.S >= kVarianceFloor)) {
    throw Error(ErrorKind::TrajectoryDegenerate, "initial variance below the floor");
  }
  Newton newton(problem, z0, options);
  Eigen::Vector4d rho0 = Eigen::Vector4d::Zero();
  Eigen::Matrix4d jac;
  bool have_jac = false;

  // Newton on a coarse time grid first; the fine grid then starts from its
  // root and reuses its Jacobian.
  const std::size_t coarse = options.steps / 10;
  if (coarse >= 100) {
    Trial cur = newton.evaluate(rho0, coarse);
    if (cur.ok) {
      newton.residuals.push_back(cur.norm);
      newton.costs.push_back(cur.traj.J);
      newton.run(coarse, 0.1 * options.tolerance, rho0, cur, jac, false);
      have_jac = newton.iterations > 0;
    }
  }

  Trial cur = newton.evaluate(rho0, options.steps);
  if (!cur.ok && have_jac) {
    rho0.setZero();
    have_jac = false;
    cur = newton.evaluate(rho0, options.steps);
  }
  if (!cur.ok) {
    // rethrow the underlying failure with its own message
    integrate_forward(problem, z0, {rho0[0], rho0[1], rho0[2], rho0[3]}, options.steps);
    throw Error(ErrorKind::TrajectoryDegenerate, "initial shooting trajectory failed");
  }
  newton.residuals.push_back(cur.norm);
  newton.costs.push_back(cur.traj.J);
  newton.run(options.steps, options.tolerance, rho0, cur, jac, have_jac);

  OcpTrajectory out = std::move(cur.traj);
  out.converged = cur.norm <= options.tolerance;
  out.iterations = newton.iterations;
  out.residual = cur.norm;
  out.residual_history = std::move(newton.residuals);
  out.cost_history = std::move(newton.costs);
  return out;
}

double total_cost(const OcpTrajectory& traj, const OcpProblem& problem) {
  const auto& n = traj.nodes;
  double J = 0.0;
  for (std::size_t i = 0; i + 1 < n.size(); ++i) {
    J += 0.5 * (n[i + 1].t - n[i].t) * (n[i].cost_right + n[i + 1].cost_left);
  }
  std::vector<double> t(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) t[i] = n[i].t;
  const auto datum = datum_nodes(t, problem.meas);
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (datum[i] != std::numeric_limits<std::size_t>::max()) {
      J += measurement_penalty(n[i].z, problem.meas.values[datum[i]], problem.meas.noise_std);
    }
  }
  if (problem.mode == CostMode::ContinuousObservation) {
    J -= observation_at(problem, problem.horizon) * n.back().z.m;
  }
  return J;
}

}  // namespace diffsmooth
