#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "diffsmooth/approx_drift.hpp"
#include "diffsmooth/closure.hpp"
#include "diffsmooth/model.hpp"
#include "diffsmooth/pde.hpp"

namespace diffsmooth {

struct ControlPoint {
  double A = 0.0;
  double B = 0.0;
};

/// Adjoint variables paired with z = (m, S, C, D).
struct Costate {
  double m = 0.0;
  double S = 0.0;
  double C = 0.0;
  double D = 0.0;

  double norm() const noexcept;
};

struct StateRates {
  double m = 0.0;
  double S = 0.0;
  double C = 0.0;
  double D = 0.0;
};

enum class CostMode {
  /// Running cost E[(u - f)^2 / 2a] plus penalties E[(X - y_k)^2] / 2R^2 at the data.
  DiscreteMeasurements,
  /// Adds y(t) E[u] + E[X^2] / 2 to the running cost, terminal cost -y(T) m(T).
  ContinuousObservation,
};

struct OcpProblem {
  SdeModel model;
  MeasurementSet meas;
  double horizon = 1.0;
  InverseMomentRule rule = InverseMomentRule::SecondOrder;
  CostMode mode = CostMode::DiscreteMeasurements;
  /// Observation path y(t), used only in ContinuousObservation mode.
  std::function<double(double)> observation;
};

struct ShootOptions {
  std::size_t steps = 2000;
  double tolerance = 1e-6;
  std::size_t max_iterations = 50;
  double fd_step = 1e-6;
  unsigned threads = 1;
};

struct OcpNode {
  double t = 0.0;
  OcpState z;
  ControlPoint v;
  /// Control just before t; differs from v only at data times.
  ControlPoint v_left;
  Costate rho;
  /// Running cost just before and just after t (they differ at data times).
  double cost_left = 0.0;
  double cost_right = 0.0;
};

struct OcpTrajectory {
  std::vector<OcpNode> nodes;
  double J = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
  std::vector<double> cost_history;

  /// Linear interpolation of the state at time t.
  OcpState state_at(double t) const;
};

/// (m0, S0) from the normalized product p0 w0, (C0, D0) Gaussian-consistent.
OcpState initial_condition_from_backward(const GridDensity& p0, const GridDensity& w0);

double running_cost(const OcpProblem& problem, const OcpState& z, const ControlPoint& v, double t);

double measurement_penalty(const OcpState& z, double y, double R);

/// Gradient of the expected penalty with respect to z.
Costate measurement_jump_gradient(const OcpState& z, double y, double R);

/// <rho, H(z, v)> + L(z, v, t).
double pontryagin_function(const OcpProblem& problem, const OcpState& z, const Costate& rho,
                           const ControlPoint& v, double t);

/// Exact minimizer of pontryagin_function over (A, B).
ControlPoint hamiltonian_minimize(const OcpProblem& problem, const OcpState& z, const Costate& rho,
                                  double t);

StateRates dynamics(const OcpProblem& problem, const OcpState& z, const ControlPoint& v);

/// -grad_z pontryagin_function at fixed v.
Costate adjoint_rhs(const OcpProblem& problem, const OcpState& z, const Costate& rho,
                    const ControlPoint& v, double t);

/// Terminal value the costate must reach.
Costate terminal_costate(const OcpProblem& problem, const OcpState& zT);

/// Integrates (z, rho) forward from (z0, rho0) with the feedback control,
/// applying costate jumps at the data times.
OcpTrajectory integrate_forward(const OcpProblem& problem, const OcpState& z0, const Costate& rho0,
                                std::size_t steps);

/// Damped Newton shooting on rho(0).
OcpTrajectory shoot(const OcpProblem& problem, const OcpState& z0, const ShootOptions& options = {});

/// Trapezoid integral of the running cost plus data penalties plus terminal cost.
double total_cost(const OcpTrajectory& traj, const OcpProblem& problem);

}  // namespace diffsmooth
