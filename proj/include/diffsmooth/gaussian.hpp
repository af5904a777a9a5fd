#pragma once

#include <span>
#include <utility>
#include <vector>

namespace diffsmooth {

inline constexpr double kVarianceFloor = 1e-10;

/// Scalar Gaussian in moment form (m, S) with natural-parameter views
/// eta = m/S and theta = -1/(2S).
class GaussianParams {
 public:
  GaussianParams(double mean, double variance);

  static GaussianParams from_natural(double eta, double theta);

  double mean() const noexcept { return m_; }
  double variance() const noexcept { return S_; }
  double eta() const noexcept { return m_ / S_; }
  double theta() const noexcept { return -0.5 / S_; }

  double log_density(double x) const noexcept;
  double density(double x) const noexcept;

 private:
  double m_;
  double S_;
};

/// Finite mixture sum_l nu_l N(m_l, S_l) with nu on the simplex.
class GaussianMixtureState {
 public:
  explicit GaussianMixtureState(GaussianParams single);
  GaussianMixtureState(std::vector<double> weights, std::vector<GaussianParams> components);

  std::size_t size() const noexcept { return components_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const GaussianParams> components() const noexcept { return components_; }

 private:
  std::vector<double> weights_;
  std::vector<GaussianParams> components_;
};

double density(const GaussianMixtureState& state, double x);
double log_density(const GaussianMixtureState& state, double x);

/// Raw moment E[X^n] for n in 0..4.
double gaussian_moment(int n, const GaussianParams& g);

/// Raw moment E[X^n] for any n >= 0 via E[X^n] = m E[X^{n-1}] + (n-1) S E[X^{n-2}].
double gaussian_raw_moment(int n, double m, double S);

/// Inverse-moment rule used in the GBM Lagrangian: E[1/X] ~ 1/m and
/// E[1/X^2] ~ 1/(m^2 + S).
double inverse_moment_approx(int order, const GaussianParams& g);

/// Second-order delta-method rule: E[1/X] ~ 1/m + S/m^3 and
/// E[1/X^2] ~ 1/m^2 + 3S/m^4. Unlike the first-order rule it respects
/// E[1/X^2] >= E[1/X]^2 for S < m^2, which keeps the control Hessian definite.
double inverse_moment_second_order(int order, const GaussianParams& g);

/// Overall mean and variance of a mixture.
std::pair<double, double> mixture_moments(const GaussianMixtureState& state);

}  // namespace diffsmooth
