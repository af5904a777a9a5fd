#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "diffsmooth/model.hpp"
#include "diffsmooth/ocp.hpp"
#include "diffsmooth/pde.hpp"

namespace diffsmooth {

/// Everything an E-step needs apart from the drift parameter.
struct EmContext {
  SdeModel family;  ///< any member of the family; its drift parameter is replaced
  InitialLaw law;
  MeasurementSet meas;
  double horizon = 1.0;
  Grid1D grid;
  PdeOptions pde;
  ShootOptions shoot;
  InverseMomentRule rule = InverseMomentRule::SecondOrder;
};

struct EmIterate {
  std::size_t iter = 0;
  double kappa = 0.0;
  /// F(Q_i, kappa_i): data penalties plus the path KL of Q_i from the prior at kappa_i.
  double F = 0.0;
  /// The KL part alone.
  double F_kl = 0.0;
  double next_kappa = 0.0;
  /// F(Q_i, kappa_{i+1}).
  double F_next = 0.0;
  bool estep_converged = false;
};

struct EmRun {
  std::vector<EmIterate> iterates;
  double kappa_hat = 0.0;
  bool converged = false;
  bool partial = false;
  std::string failure;
};

/// Variational smoothing at drift parameter kappa, with z0 from the backward
/// PDE solved at the same kappa.
OcpTrajectory e_step(double kappa, const EmContext& ctx);

/// Path KL part of the apparent information of `traj` against the prior with
/// the given model: trapezoid integral of E[(u - f)^2 / 2a].
double path_kl(const OcpTrajectory& traj, const SdeModel& model, InverseMomentRule rule);

/// path_kl plus the expected data penalties.
double apparent_information(const OcpTrajectory& traj, const SdeModel& model,
                            const MeasurementSet& meas, InverseMomentRule rule);

/// Closed-form minimizer over the drift parameter of path_kl(traj, family(kappa)).
double m_step(const OcpTrajectory& traj, const SdeModel& family, InverseMomentRule rule);

EmRun run_em(const EmContext& ctx, double kappa0, std::size_t max_iterations, double tolerance);

}  // namespace diffsmooth
