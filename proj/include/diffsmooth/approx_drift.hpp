#pragma once

#include <span>
#include <vector>

#include "diffsmooth/closure.hpp"
#include "diffsmooth/gaussian.hpp"
#include "diffsmooth/model.hpp"

namespace diffsmooth {

/// Coefficients of one mixture component of the Gaussian-preserving drift
///   u = a'/2 + [sum_l nu_l p_l (A_l + B_l x + a (C_l + D_l x))] / p.
struct ComponentCoefficients {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double D = 0.0;
};

struct DriftCoefficients {
  std::vector<ComponentCoefficients> components;

  DriftCoefficients() = default;
  explicit DriftCoefficients(ComponentCoefficients single) : components{single} {}
  explicit DriftCoefficients(std::vector<ComponentCoefficients> c) : components(std::move(c)) {}
  std::size_t size() const noexcept { return components.size(); }
};

/// Per-component state z = (m, S, C, D).
struct OcpState {
  double m = 0.0;
  double S = 1.0;
  double C = 0.0;
  double D = -0.5;
};

struct MomentRates {
  double dm = 0.0;
  double dS = 0.0;
};

struct CouplingRates {
  double dC = 0.0;
  double dD = 0.0;
};

/// State whose (C, D) match the natural parameters of N(m, S): C = eta/2, D = theta.
OcpState gaussian_consistent_state(double m, double S);

/// Single-component drift as a polynomial in x: a'/2 + A + Bx + a (C + Dx).
Laurent ansatz_drift_poly(const ComponentCoefficients& c, const SdeModel& model);

double ansatz_drift(double x, const DriftCoefficients& coeffs, const GaussianMixtureState& mix,
                    const SdeModel& model);

/// dC/dt = -D A - B C,  dD/dt = -2 D B.
CouplingRates coupling_rhs(const ComponentCoefficients& c);

/// Gaussian-closure mean and variance rates for one component:
///   dm/dt = E[u],  dS/dt = E[2 (X - m) u + a].
/// Requires a polynomial of degree <= 2.
MomentRates moment_rhs(const SdeModel& model, const OcpState& z, double A, double B);

void require_closable_diffusion(const SdeModel& model);

struct ResidualGrid {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t nx = 2000;
};

/// Max over interior sample times of the normalized L2 norm of
///   d_t p + d_x (u p) - 1/2 d_xx (a p)
/// where p is the mixture density from `moments` and u the ansatz drift.
/// The norm is divided by the sum of the L2 norms of the three terms.
double fokker_planck_residual(std::span<const DriftCoefficients> coeffs,
                              std::span<const GaussianMixtureState> moments, const SdeModel& model,
                              const ResidualGrid& grid, std::span<const double> times);

}  // namespace diffsmooth
