#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "diffsmooth/model.hpp"
#include "diffsmooth/pde.hpp"

namespace diffsmooth {

/// dX = alpha X dt + sigma dW observed as y_k = X(t_k) + R xi_k.
struct LinearModel {
  double alpha = 0.0;
  double sigma = 1.0;
  double R = 1.0;
};

struct KalmanPoint {
  double t = 0.0;
  double filter_mean = 0.0;
  double filter_var = 0.0;
  double smooth_mean = 0.0;
  double smooth_var = 0.0;
};

struct KalmanResult {
  std::vector<KalmanPoint> points;  ///< sorted union of 0, the output times and the data times
  double neg_log_likelihood = 0.0;

  /// Point at time t (must be one of the stored times).
  const KalmanPoint& at(double t) const;
};

/// Exact-transition Kalman filter and RTS smoother. Filter values at a data
/// time include that datum.
KalmanResult kalman_rts(const LinearModel& model, double m0, double S0, const MeasurementSet& meas,
                        std::span<const double> output_times);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t excluded = 0;
};

using DriftFunction = std::function<double(double x, double t)>;
using InitialSampler = std::function<double(std::mt19937_64&)>;

/// Monte-Carlo estimate of 1/2 E_Q int (u - f)^2 / a dt along Euler paths of
/// dX = u dt + sigma dW, with sigma, f from model_p. Paths are split into
/// fixed blocks with their own seeded streams, so the result does not depend
/// on the thread count.
McEstimate mc_girsanov_kl(const SdeModel& model_p, const DriftFunction& drift_q,
                          const InitialSampler& initial, double horizon, std::size_t n_paths,
                          double dt, std::uint64_t seed, unsigned threads = 1);

/// Trapezoid integral of p log(p / q) over the grid of p.
double grid_kl(const GridDensity& p, const std::function<double(double)>& q_density);

/// KL(N(m1, S1) || N(m2, S2)).
double gaussian_kl(double m1, double S1, double m2, double S2);

}  // namespace diffsmooth
