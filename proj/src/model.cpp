#include "diffsmooth/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "diffsmooth/error.hpp"

namespace diffsmooth {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorKind::InvalidArgument, std::string(name) + " must be positive and finite");
  }
}

Laurent from_ascending(const std::vector<double>& c) {
  Laurent p;
  for (std::size_t i = 0; i < c.size(); ++i) p.set(static_cast<int>(i), c[i]);
  return p;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::GBM: return "gbm";
    case ModelKind::CIR: return "cir";
    case ModelKind::OU: return "ou";
    case ModelKind::PolyGeneric: return "poly";
  }
  return "unknown";
}

SdeModel::SdeModel(ModelKind kind, std::vector<double> params, Laurent f, Laurent a)
    : kind_(kind), params_(std::move(params)), f_(f), a_(a), da_(a.derivative()) {}

SdeModel SdeModel::gbm(double kappa, double lambda) {
  require_positive(lambda, "lambda");
  return SdeModel(ModelKind::GBM, {kappa, lambda}, Laurent::monomial(kappa, 1),
                  Laurent::monomial(lambda * lambda, 2));
}

SdeModel SdeModel::cir(double kappa, double b, double lambda) {
  require_positive(lambda, "lambda");
  return SdeModel(ModelKind::CIR, {kappa, b, lambda}, Laurent{kappa * b, -kappa},
                  Laurent::monomial(lambda * lambda, 1));
}

SdeModel SdeModel::ou(double gamma, double sigma) {
  require_positive(sigma, "sigma_c");
  return SdeModel(ModelKind::OU, {gamma, sigma}, Laurent::monomial(-gamma, 1),
                  Laurent::monomial(sigma * sigma, 0));
}

SdeModel SdeModel::poly(std::vector<double> drift, std::vector<double> diffusion_sq) {
  if (drift.empty() || diffusion_sq.empty()) {
    throw Error(ErrorKind::InvalidArgument, "polynomial model needs drift and diffusion coefficients");
  }
  Laurent f = from_ascending(drift);
  Laurent a = from_ascending(diffusion_sq);
  if (a.degree() < 0) throw Error(ErrorKind::InvalidArgument, "diffusion polynomial is zero");
  std::vector<double> params = drift;
  params.insert(params.end(), diffusion_sq.begin(), diffusion_sq.end());
  return SdeModel(ModelKind::PolyGeneric, std::move(params), f, a);
}

double SdeModel::diffusion(double x) const noexcept { return std::sqrt(std::max(a_(x), 0.0)); }

Laurent SdeModel::inverse_diffusion_sq_poly() const {
  int nonzero = 0;
  int exponent = 0;
  double coef = 0.0;
  for (int e = a_.lowest(); e <= a_.highest(); ++e) {
    if (a_.coef(e) != 0.0) {
      ++nonzero;
      exponent = e;
      coef = a_.coef(e);
    }
  }
  if (nonzero != 1) {
    throw Error(ErrorKind::ClosureUnsupported,
                "1/a(x) has no closed-form moment expansion unless a(x) is a monomial");
  }
  return Laurent::monomial(1.0 / coef, -exponent);
}

double SdeModel::drift_parameter() const {
  switch (kind_) {
    case ModelKind::GBM:
    case ModelKind::CIR:
    case ModelKind::OU: return params_[0];
    case ModelKind::PolyGeneric: break;
  }
  throw Error(ErrorKind::InvalidArgument, "polynomial model has no drift parameter");
}

SdeModel SdeModel::with_drift_parameter(double value) const {
  switch (kind_) {
    case ModelKind::GBM: return gbm(value, params_[1]);
    case ModelKind::CIR: return cir(value, params_[1], params_[2]);
    case ModelKind::OU: return ou(value, params_[1]);
    case ModelKind::PolyGeneric: break;
  }
  throw Error(ErrorKind::InvalidArgument, "polynomial model has no drift parameter");
}

Laurent SdeModel::drift_base_poly() const {
  if (!has_drift_parameter()) throw Error(ErrorKind::InvalidArgument, "no drift parameter");
  return Laurent{};
}

Laurent SdeModel::drift_sensitivity_poly() const {
  switch (kind_) {
    case ModelKind::GBM: return Laurent::monomial(1.0, 1);
    case ModelKind::CIR: return Laurent{params_[1], -1.0};
    case ModelKind::OU: return Laurent::monomial(-1.0, 1);
    case ModelKind::PolyGeneric: break;
  }
  throw Error(ErrorKind::InvalidArgument, "no drift parameter");
}

InitialLaw::InitialLaw(InitialLawKind kind, double mu, double sigma)
    : kind_(kind), mu_(mu), sigma_(sigma) {
  require_positive(sigma, "initial-law sigma");
  if (!std::isfinite(mu)) throw Error(ErrorKind::InvalidArgument, "initial-law mu must be finite");
}

InitialLaw InitialLaw::lognormal(double mu, double sigma) {
  return InitialLaw(InitialLawKind::LogNormal, mu, sigma);
}

InitialLaw InitialLaw::normal(double mu, double sigma) {
  return InitialLaw(InitialLawKind::Normal, mu, sigma);
}

double InitialLaw::density(double x) const noexcept {
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma_);
  if (kind_ == InitialLawKind::Normal) {
    const double z = (x - mu_) / sigma_;
    return norm * std::exp(-0.5 * z * z);
  }
  if (x <= 0.0) return 0.0;
  const double z = (std::log(x) - mu_) / sigma_;
  return norm / x * std::exp(-0.5 * z * z);
}

double InitialLaw::mean() const noexcept {
  return kind_ == InitialLawKind::Normal ? mu_ : std::exp(mu_ + 0.5 * sigma_ * sigma_);
}

double InitialLaw::variance() const noexcept {
  if (kind_ == InitialLawKind::Normal) return sigma_ * sigma_;
  const double s2 = sigma_ * sigma_;
  return (std::exp(s2) - 1.0) * std::exp(2.0 * mu_ + s2);
}

double InitialLaw::quantile_at_score(double z) const noexcept {
  return kind_ == InitialLawKind::Normal ? mu_ + sigma_ * z : std::exp(mu_ + sigma_ * z);
}

double InitialLaw::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double z = normal(rng);
  return kind_ == InitialLawKind::Normal ? mu_ + sigma_ * z : std::exp(mu_ + sigma_ * z);
}

void MeasurementSet::validate(double horizon) const {
  if (times.size() != values.size()) {
    throw Error(ErrorKind::InvalidArgument, "measurement times and values differ in length");
  }
  if (!(noise_std > 0.0)) throw Error(ErrorKind::InvalidArgument, "noise std R must be positive");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] > 0.0) || times[k] > horizon * (1.0 + 1e-12)) {
      throw Error(ErrorKind::InvalidArgument, "measurement time outside (0, T]");
    }
    if (k > 0 && !(times[k] > times[k - 1])) {
      throw Error(ErrorKind::InvalidArgument, "measurement times must be strictly increasing");
    }
    if (!std::isfinite(values[k])) throw Error(ErrorKind::InvalidArgument, "non-finite measurement");
  }
}

double Path::at(double time) const {
  if (t.empty()) throw Error(ErrorKind::OutOfRange, "empty path");
  const double tol = 1e-12 * std::max(1.0, std::abs(t.back()));
  if (time < t.front() - tol || time > t.back() + tol) {
    throw Error(ErrorKind::OutOfRange, "time " + std::to_string(time) + " beyond path horizon");
  }
  if (time <= t.front()) return x.front();
  if (time >= t.back()) return x.back();
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
  const double w = (time - t[i]) / (t[i + 1] - t[i]);
  return (1.0 - w) * x[i] + w * x[i + 1];
}

Path euler_maruyama_from(const SdeModel& model, double x0, double dt, double horizon,
                         std::mt19937_64& rng) {
  require_positive(dt, "dt");
  require_positive(horizon, "T");
  if (dt > horizon) throw Error(ErrorKind::InvalidArgument, "dt exceeds T");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  const double h = horizon / static_cast<double>(steps);
  const double sqrt_h = std::sqrt(h);
  const bool reflect = model.kind() == ModelKind::CIR;
  std::normal_distribution<double> normal(0.0, 1.0);

  Path path;
  path.t.resize(steps + 1);
  path.x.resize(steps + 1);
  path.t[0] = 0.0;
  path.x[0] = x0;
  double x = x0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double xi = normal(rng);
    x = x + model.drift(x) * h + model.diffusion(x) * sqrt_h * xi;
    if (reflect) x = std::abs(x);
    if (!std::isfinite(x)) {
      throw Error(ErrorKind::SimulationDiverged, "non-finite value at step " + std::to_string(i + 1));
    }
    path.t[i + 1] = static_cast<double>(i + 1) * h;
    path.x[i + 1] = x;
  }
  path.t.back() = horizon;
  return path;
}

Path euler_maruyama(const SdeModel& model, const InitialLaw& law, double dt, double horizon,
                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double x0 = law.sample(rng);
  return euler_maruyama_from(model, x0, dt, horizon, rng);
}

MeasurementSet generate_measurements(const Path& path, std::span<const double> times,
                                     double noise_std, std::uint64_t seed) {
  if (noise_std < 0.0) throw Error(ErrorKind::InvalidArgument, "negative noise std");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MeasurementSet set;
  set.noise_std = noise_std;
  for (double t : times) {
    const double clean = path.at(t);
    set.times.push_back(t);
    set.values.push_back(clean + noise_std * normal(rng));
  }
  return set;
}

std::vector<double> equispaced_times(double horizon, std::size_t n) {
  std::vector<double> times(n);
  for (std::size_t k = 0; k < n; ++k) {
    times[k] = horizon * static_cast<double>(k + 1) / static_cast<double>(n);
  }
  return times;
}

std::vector<double> make_time_grid(double horizon, std::size_t steps,
                                   std::span<const double> mandatory) {
  require_positive(horizon, "T");
  if (steps == 0) throw Error(ErrorKind::InvalidArgument, "time grid needs at least one step");
  std::vector<double> breaks{0.0};
  const double tol = 1e-12 * horizon;
  for (double t : mandatory) {
    if (t > tol && t < horizon - tol && t - breaks.back() > tol) breaks.push_back(t);
  }
  breaks.push_back(horizon);

  std::vector<double> grid{0.0};
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s];
    const double b = breaks[s + 1];
    const auto n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround((b - a) / horizon * static_cast<double>(steps))));
    for (std::size_t i = 1; i <= n; ++i) {
      grid.push_back(i == n ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n));
    }
  }
  return grid;
}

}  // namespace diffsmooth
