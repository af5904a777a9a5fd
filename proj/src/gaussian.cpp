#include "diffsmooth/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "diffsmooth/error.hpp"

namespace diffsmooth {

namespace {

constexpr double kSingularMeanTol = 1e-8;

void check_mean_for_inverse(int order, const GaussianParams& g) {
  if (order != 1 && order != 2) {
    throw Error(ErrorKind::UnsupportedOrder, "inverse moment order " + std::to_string(order));
  }
  if (std::abs(g.mean()) < kSingularMeanTol) {
    throw Error(ErrorKind::NearSingularMean, "mean " + std::to_string(g.mean()) + " too close to 0");
  }
}

}  // namespace

GaussianParams::GaussianParams(double mean, double variance) : m_(mean), S_(variance) {
  if (!std::isfinite(mean) || !std::isfinite(variance)) {
    throw Error(ErrorKind::InvalidArgument, "non-finite Gaussian parameters");
  }
  if (variance < kVarianceFloor) {
    throw Error(ErrorKind::InvalidArgument,
                "variance " + std::to_string(variance) + " below floor 1e-10");
  }
}

GaussianParams GaussianParams::from_natural(double eta, double theta) {
  if (!(theta < 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "theta must be negative");
  }
  const double S = -0.5 / theta;
  return GaussianParams(eta * S, S);
}

double GaussianParams::log_density(double x) const noexcept {
  const double d = x - m_;
  return -0.5 * d * d / S_ - 0.5 * std::log(2.0 * std::numbers::pi * S_);
}

double GaussianParams::density(double x) const noexcept { return std::exp(log_density(x)); }

GaussianMixtureState::GaussianMixtureState(GaussianParams single)
    : weights_{1.0}, components_{single} {}

GaussianMixtureState::GaussianMixtureState(std::vector<double> weights,
                                           std::vector<GaussianParams> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (weights_.empty() || weights_.size() != components_.size()) {
    throw Error(ErrorKind::InvalidArgument, "mixture weights and components differ in size");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw Error(ErrorKind::InvalidArgument, "negative mixture weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorKind::InvalidArgument, "mixture weights do not sum to 1");
  }
}

double log_density(const GaussianMixtureState& state, double x) {
  const auto w = state.weights();
  const auto c = state.components();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < c.size(); ++l) {
    if (w[l] > 0.0) best = std::max(best, std::log(w[l]) + c[l].log_density(x));
  }
  if (!std::isfinite(best)) return best;
  double acc = 0.0;
  for (std::size_t l = 0; l < c.size(); ++l) {
    if (w[l] > 0.0) acc += std::exp(std::log(w[l]) + c[l].log_density(x) - best);
  }
  return best + std::log(acc);
}

double density(const GaussianMixtureState& state, double x) {
  const auto w = state.weights();
  const auto c = state.components();
  double acc = 0.0;
  for (std::size_t l = 0; l < c.size(); ++l) acc += w[l] * c[l].density(x);
  return acc;
}

double gaussian_raw_moment(int n, double m, double S) {
  if (n < 0) throw Error(ErrorKind::UnsupportedOrder, "negative raw moment order");
  double prev2 = 1.0;  // E[X^0]
  if (n == 0) return prev2;
  double prev1 = m;  // E[X^1]
  for (int k = 2; k <= n; ++k) {
    const double next = m * prev1 + (k - 1) * S * prev2;
    prev2 = prev1;
    prev1 = next;
  }
  return prev1;
}

double gaussian_moment(int n, const GaussianParams& g) {
  const double m = g.mean();
  const double S = g.variance();
  switch (n) {
    case 0: return 1.0;
    case 1: return m;
    case 2: return m * m + S;
    case 3: return m * m * m + 3.0 * m * S;
    case 4: return m * m * m * m + 6.0 * m * m * S + 3.0 * S * S;
    default:
      throw Error(ErrorKind::UnsupportedOrder, "moment order " + std::to_string(n) + " not in 0..4");
  }
}

double inverse_moment_approx(int order, const GaussianParams& g) {
  check_mean_for_inverse(order, g);
  const double m = g.mean();
  return order == 1 ? 1.0 / m : 1.0 / (m * m + g.variance());
}

double inverse_moment_second_order(int order, const GaussianParams& g) {
  check_mean_for_inverse(order, g);
  const double m = g.mean();
  const double S = g.variance();
  const double m2 = m * m;
  return order == 1 ? 1.0 / m + S / (m2 * m) : 1.0 / m2 + 3.0 * S / (m2 * m2);
}

std::pair<double, double> mixture_moments(const GaussianMixtureState& state) {
  const auto w = state.weights();
  const auto c = state.components();
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t l = 0; l < c.size(); ++l) {
    mean += w[l] * c[l].mean();
    second += w[l] * (c[l].variance() + c[l].mean() * c[l].mean());
  }
  return {mean, second - mean * mean};
}

}  // namespace diffsmooth
