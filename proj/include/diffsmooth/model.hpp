#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "diffsmooth/closure.hpp"

namespace diffsmooth {

enum class ModelKind { GBM, CIR, OU, PolyGeneric };

std::string to_string(ModelKind kind);

/// Scalar SDE dX = f(X) dt + sigma(X) dW with polynomial drift f and
/// polynomial squared diffusion a = sigma^2.
///
/// Parameter layout: GBM (kappa, lambda) with f = kappa x, a = lambda^2 x^2;
/// CIR (kappa, b, lambda) with f = kappa (b - x), a = lambda^2 x;
/// OU (gamma, sigma_c) with f = -gamma x, a = sigma_c^2;
/// PolyGeneric with explicit ascending coefficients for f and a.
class SdeModel {
 public:
  static SdeModel gbm(double kappa, double lambda);
  static SdeModel cir(double kappa, double b, double lambda);
  static SdeModel ou(double gamma, double sigma);
  static SdeModel poly(std::vector<double> drift, std::vector<double> diffusion_sq);

  ModelKind kind() const noexcept { return kind_; }
  std::span<const double> params() const noexcept { return params_; }

  double drift(double x) const noexcept { return f_(x); }
  double diffusion(double x) const noexcept;
  double diffusion_sq(double x) const noexcept { return a_(x); }
  double diffusion_sq_derivative(double x) const noexcept { return da_(x); }

  const Laurent& drift_poly() const noexcept { return f_; }
  const Laurent& diffusion_sq_poly() const noexcept { return a_; }
  const Laurent& diffusion_sq_derivative_poly() const noexcept { return da_; }
  /// 1/a(x) as a Laurent polynomial; requires a to be a single monomial.
  Laurent inverse_diffusion_sq_poly() const;

  /// True for the shipped families whose drift is affine in one parameter.
  bool has_drift_parameter() const noexcept { return kind_ != ModelKind::PolyGeneric; }
  double drift_parameter() const;
  SdeModel with_drift_parameter(double value) const;
  /// f = base + parameter * sensitivity.
  Laurent drift_base_poly() const;
  Laurent drift_sensitivity_poly() const;

  /// State space is [0, inf) (GBM, CIR).
  bool nonnegative_state() const noexcept {
    return kind_ == ModelKind::GBM || kind_ == ModelKind::CIR;
  }

 private:
  SdeModel(ModelKind kind, std::vector<double> params, Laurent f, Laurent a);

  ModelKind kind_;
  std::vector<double> params_;
  Laurent f_;
  Laurent a_;
  Laurent da_;
};

enum class InitialLawKind { LogNormal, Normal };

/// Law of X_0: log-normal (mu, sigma of log X) or normal (mean mu, std sigma).
class InitialLaw {
 public:
  static InitialLaw lognormal(double mu, double sigma);
  static InitialLaw normal(double mu, double sigma);

  InitialLawKind kind() const noexcept { return kind_; }
  double mu() const noexcept { return mu_; }
  double sigma() const noexcept { return sigma_; }

  double density(double x) const noexcept;
  double mean() const noexcept;
  double variance() const noexcept;
  /// Quantile at standard-normal score z.
  double quantile_at_score(double z) const noexcept;
  double sample(std::mt19937_64& rng) const;

 private:
  InitialLaw(InitialLawKind kind, double mu, double sigma);
  InitialLawKind kind_;
  double mu_;
  double sigma_;
};

/// Noisy observations y_k = X(t_k) + R xi_k, h(x) = x.
struct MeasurementSet {
  std::vector<double> times;
  std::vector<double> values;
  double noise_std = 1.0;

  std::size_t size() const noexcept { return times.size(); }
  /// Throws InvalidArgument unless times are strictly increasing in (0, horizon] and R > 0.
  void validate(double horizon) const;
};

struct Path {
  std::vector<double> t;
  std::vector<double> x;

  /// Linear interpolation; throws OutOfRange outside [t.front(), t.back()].
  double at(double time) const;
};

Path euler_maruyama(const SdeModel& model, const InitialLaw& law, double dt, double horizon,
                    std::uint64_t seed);

/// Same scheme started from a fixed x0.
Path euler_maruyama_from(const SdeModel& model, double x0, double dt, double horizon,
                         std::mt19937_64& rng);

MeasurementSet generate_measurements(const Path& path, std::span<const double> times,
                                     double noise_std, std::uint64_t seed);

/// Equispaced times horizon/n, 2 horizon/n, ..., horizon.
std::vector<double> equispaced_times(double horizon, std::size_t n);

/// Time nodes on [0, horizon] with roughly `steps` uniform steps, refined so
/// every mandatory time is a node. Between consecutive mandatory times the
/// spacing is uniform.
std::vector<double> make_time_grid(double horizon, std::size_t steps,
                                   std::span<const double> mandatory);

}  // namespace diffsmooth
