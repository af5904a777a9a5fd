#include "diffsmooth/approx_drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "diffsmooth/error.hpp"

namespace diffsmooth {

OcpState gaussian_consistent_state(double m, double S) {
  const GaussianParams g(m, S);
  return OcpState{m, S, 0.5 * g.eta(), g.theta()};
}

Laurent ansatz_drift_poly(const ComponentCoefficients& c, const SdeModel& model) {
  const Laurent& a = model.diffusion_sq_poly();
  return 0.5 * model.diffusion_sq_derivative_poly() + Laurent{c.A, c.B} + a * Laurent{c.C, c.D};
}

double ansatz_drift(double x, const DriftCoefficients& coeffs, const GaussianMixtureState& mix,
                    const SdeModel& model) {
  if (coeffs.size() != mix.size()) {
    throw Error(ErrorKind::InvalidArgument, "coefficient and mixture component counts differ");
  }
  const double a = model.diffusion_sq(x);
  const double half_da = 0.5 * model.diffusion_sq_derivative(x);
  auto component_term = [&](const ComponentCoefficients& c) {
    return c.A + c.B * x + a * (c.C + c.D * x);
  };
  if (mix.size() == 1) return half_da + component_term(coeffs.components[0]);

  // responsibilities nu_l p_l(x) / p(x) via log-sum-exp
  const auto w = mix.weights();
  const auto comps = mix.components();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> logs(mix.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t l = 0; l < mix.size(); ++l) {
    if (w[l] > 0.0) {
      logs[l] = std::log(w[l]) + comps[l].log_density(x);
      best = std::max(best, logs[l]);
    }
  }
  if (!std::isfinite(best)) {
    throw Error(ErrorKind::TailUnderflow, "mixture density degenerate at x = " + std::to_string(x));
  }
  double norm = 0.0;
  double acc = 0.0;
  for (std::size_t l = 0; l < mix.size(); ++l) {
    const double r = std::exp(logs[l] - best);
    norm += r;
    acc += r * component_term(coeffs.components[l]);
  }
  return half_da + acc / norm;
}

CouplingRates coupling_rhs(const ComponentCoefficients& c) {
  return CouplingRates{-c.D * c.A - c.B * c.C, -2.0 * c.D * c.B};
}

void require_closable_diffusion(const SdeModel& model) {
  const Laurent& a = model.diffusion_sq_poly();
  if (a.lowest() < 0 || a.degree() > 2) {
    throw Error(ErrorKind::ClosureUnsupported,
                "moment closure needs a polynomial diffusion of degree <= 2");
  }
}

MomentRates moment_rhs(const SdeModel& model, const OcpState& z, double A, double B) {
  require_closable_diffusion(model);
  if (!(z.S > 0.0)) throw Error(ErrorKind::InvalidArgument, "variance must be positive");
  const GaussianMoments mom(z.m, z.S, InverseMomentRule::SecondOrder);
  const Laurent u = ansatz_drift_poly({A, B, z.C, z.D}, model);
  const double Eu = mom.expect(u);
  const double second = mom.expect(2.0 * u.shifted(1) + model.diffusion_sq_poly());
  return MomentRates{Eu, second - 2.0 * z.m * Eu};
}

double fokker_planck_residual(std::span<const DriftCoefficients> coeffs,
                              std::span<const GaussianMixtureState> moments, const SdeModel& model,
                              const ResidualGrid& grid, std::span<const double> times) {
  const std::size_t nt = times.size();
  if (coeffs.size() != nt || moments.size() != nt) {
    throw Error(ErrorKind::InvalidArgument, "trajectories must share the time grid");
  }
  if (nt < 3) throw Error(ErrorKind::InvalidArgument, "need at least three sample times");
  if (grid.nx < 3 || !(grid.x_max > grid.x_min)) {
    throw Error(ErrorKind::InvalidArgument, "invalid residual grid");
  }
  const std::size_t nx = grid.nx;
  const double dx = (grid.x_max - grid.x_min) / static_cast<double>(nx - 1);
  for (const auto& mix : moments) {
    for (const auto& c : mix.components()) {
      if (std::sqrt(c.variance()) / dx < 10.0) {
        throw Error(ErrorKind::Resolution, "fewer than 10 grid nodes per standard deviation");
      }
    }
  }

  std::vector<double> xs(nx);
  for (std::size_t i = 0; i < nx; ++i) xs[i] = grid.x_min + dx * static_cast<double>(i);
  auto density_on_grid = [&](std::size_t j) {
    std::vector<double> p(nx);
    for (std::size_t i = 0; i < nx; ++i) p[i] = density(moments[j], xs[i]);
    return p;
  };

  double worst = 0.0;
  std::vector<double> flux(nx);
  std::vector<double> ap(nx);
  for (std::size_t j = 1; j + 1 < nt; ++j) {
    const auto prev = density_on_grid(j - 1);
    const auto cur = density_on_grid(j);
    const auto next = density_on_grid(j + 1);
    const double span_t = times[j + 1] - times[j - 1];
    for (std::size_t i = 0; i < nx; ++i) {
      flux[i] = ansatz_drift(xs[i], coeffs[j], moments[j], model) * cur[i];
      ap[i] = model.diffusion_sq(xs[i]) * cur[i];
    }
    double res2 = 0.0;
    double dt2 = 0.0;
    double adv2 = 0.0;
    double dif2 = 0.0;
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      const double dtp = (next[i] - prev[i]) / span_t;
      const double adv = (flux[i + 1] - flux[i - 1]) / (2.0 * dx);
      const double dif = 0.5 * (ap[i + 1] - 2.0 * ap[i] + ap[i - 1]) / (dx * dx);
      const double r = dtp + adv - dif;
      res2 += r * r;
      dt2 += dtp * dtp;
      adv2 += adv * adv;
      dif2 += dif * dif;
    }
    const double scale = std::sqrt(dt2) + std::sqrt(adv2) + std::sqrt(dif2);
    if (scale > 0.0) worst = std::max(worst, std::sqrt(res2) / scale);
  }
  return worst;
}

}  // namespace diffsmooth
