#include "diffsmooth/em.hpp"

#include <cmath>
#include <string>

#include "diffsmooth/error.hpp"

namespace diffsmooth {

namespace {

Laurent drift_of(const OcpState& z, const ControlPoint& v, const SdeModel& model) {
  return ansatz_drift_poly({v.A, v.B, z.C, z.D}, model);
}

/// Trapezoid integral over the trajectory of E[g(u)] where g is evaluated
/// with the control on each side of a node.
template <typename F>
double integrate_nodes(const OcpTrajectory& traj, F&& expectation) {
  const auto& n = traj.nodes;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n.size(); ++i) {
    const double right = expectation(n[i].z, n[i].v);
    const double left = expectation(n[i + 1].z, n[i + 1].v_left);
    acc += 0.5 * (n[i + 1].t - n[i].t) * (right + left);
  }
  return acc;
}

}  // namespace

OcpTrajectory e_step(double kappa, const EmContext& ctx) {
  const SdeModel model = ctx.family.with_drift_parameter(kappa);
  const auto backward = solve_backward(model, ctx.meas, ctx.grid, ctx.horizon, ctx.pde);
  const OcpState z0 =
      initial_condition_from_backward(initial_density(ctx.law, ctx.grid), backward.front());
  OcpProblem problem{model, ctx.meas, ctx.horizon, ctx.rule, CostMode::DiscreteMeasurements, {}};
  return shoot(problem, z0, ctx.shoot);
}

double path_kl(const OcpTrajectory& traj, const SdeModel& model, InverseMomentRule rule) {
  const Laurent ia = model.inverse_diffusion_sq_poly();
  const Laurent& f = model.drift_poly();
  return integrate_nodes(traj, [&](const OcpState& z, const ControlPoint& v) {
    const GaussianMoments mom(z.m, z.S, rule);
    const Laurent r = drift_of(z, v, model) - f;
    return 0.5 * mom.expect(r * r * ia);
  });
}

double apparent_information(const OcpTrajectory& traj, const SdeModel& model,
                            const MeasurementSet& meas, InverseMomentRule rule) {
  double F = path_kl(traj, model, rule);
  for (std::size_t k = 0; k < meas.size(); ++k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < traj.nodes.size(); ++i) {
      if (std::abs(traj.nodes[i].t - meas.times[k]) < std::abs(traj.nodes[best].t - meas.times[k])) {
        best = i;
      }
    }
    F += measurement_penalty(traj.nodes[best].z, meas.values[k], meas.noise_std);
  }
  return F;
}

double m_step(const OcpTrajectory& traj, const SdeModel& family, InverseMomentRule rule) {
  const Laurent ia = family.inverse_diffusion_sq_poly();
  const Laurent f0 = family.drift_base_poly();
  const Laurent df = family.drift_sensitivity_poly();
  const Laurent df_ia = df * ia;
  const double curvature = integrate_nodes(traj, [&](const OcpState& z, const ControlPoint&) {
    return GaussianMoments(z.m, z.S, rule).expect(df * df_ia);
  });
  if (!(curvature >= 1e-12)) {
    throw Error(ErrorKind::Unidentifiable,
                "drift parameter curvature " + std::to_string(curvature) + " below 1e-12");
  }
  const double slope = integrate_nodes(traj, [&](const OcpState& z, const ControlPoint& v) {
    const GaussianMoments mom(z.m, z.S, rule);
    return mom.expect((drift_of(z, v, family) - f0) * df_ia);
  });
  return slope / curvature;
}

EmRun run_em(const EmContext& ctx, double kappa0, std::size_t max_iterations, double tolerance) {
  if (max_iterations < 1) throw Error(ErrorKind::InvalidArgument, "EM needs at least one iteration");
  EmRun run;
  double kappa = kappa0;
  for (std::size_t i = 0; i < max_iterations; ++i) {
    EmIterate it;
    it.iter = i;
    it.kappa = kappa;
    try {
      const OcpTrajectory traj = e_step(kappa, ctx);
      it.estep_converged = traj.converged;
      const SdeModel model = ctx.family.with_drift_parameter(kappa);
      it.F_kl = path_kl(traj, model, ctx.rule);
      it.F = apparent_information(traj, model, ctx.meas, ctx.rule);
      it.next_kappa = m_step(traj, ctx.family, ctx.rule);
      it.F_next = apparent_information(traj, ctx.family.with_drift_parameter(it.next_kappa),
                                       ctx.meas, ctx.rule);
      if (!traj.converged) {
        run.iterates.push_back(it);
        run.partial = true;
        run.failure = "E-step shooting did not converge (residual " +
                      std::to_string(traj.residual) + ")";
        break;
      }
    } catch (const Error& e) {
      run.partial = true;
      run.failure = e.what();
      break;
    }
    run.iterates.push_back(it);
    if (std::abs(it.next_kappa - kappa) < tolerance) {
      run.converged = true;
      break;
    }
    kappa = it.next_kappa;
  }
  run.kappa_hat = kappa;
  return run;
}

}  // namespace diffsmooth
