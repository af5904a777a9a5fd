#include "diffsmooth/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

#include "diffsmooth/error.hpp"

namespace diffsmooth {

const KalmanPoint& KalmanResult::at(double t) const {
  for (const auto& p : points) {
    if (std::abs(p.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return p;
  }
  throw Error(ErrorKind::OutOfRange, "no Kalman point at t = " + std::to_string(t));
}

KalmanResult kalman_rts(const LinearModel& model, double m0, double S0, const MeasurementSet& meas,
                        std::span<const double> output_times) {
  if (!(model.sigma > 0.0) || !(model.R > 0.0) || !(S0 >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "linear model needs sigma > 0, R > 0, S0 >= 0");
  }
  std::vector<double> times{0.0};
  times.insert(times.end(), output_times.begin(), output_times.end());
  times.insert(times.end(), meas.times.begin(), meas.times.end());
  std::sort(times.begin(), times.end());
  std::vector<double> merged;
  for (double t : times) {
    if (merged.empty() || t - merged.back() > 1e-9 * std::max(1.0, std::abs(t))) merged.push_back(t);
  }

  const std::size_t n = merged.size();
  KalmanResult res;
  res.points.resize(n);
  std::vector<double> pred_m(n), pred_S(n), gain_F(n);
  double m = m0;
  double S = S0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = merged[i];
    if (i > 0) {
      const double dt = t - merged[i - 1];
      const double F = std::exp(model.alpha * dt);
      const double Q = std::abs(model.alpha * dt) < 1e-12
                           ? model.sigma * model.sigma * dt
                           : model.sigma * model.sigma * std::expm1(2.0 * model.alpha * dt) /
                                 (2.0 * model.alpha);
      m = F * m;
      S = F * F * S + Q;
      gain_F[i] = F;
    }
    pred_m[i] = m;
    pred_S[i] = S;
    if (k < meas.size() && std::abs(meas.times[k] - t) <= 1e-9 * std::max(1.0, t)) {
      const double s = S + model.R * model.R;
      const double innov = meas.values[k] - m;
      res.neg_log_likelihood += 0.5 * (std::log(2.0 * std::numbers::pi * s) + innov * innov / s);
      const double K = S / s;
      m += K * innov;
      S *= (1.0 - K);
      ++k;
    }
    res.points[i] = {t, m, S, m, S};
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    auto& cur = res.points[i];
    const auto& next = res.points[i + 1];
    const double G = cur.filter_var * gain_F[i + 1] / pred_S[i + 1];
    cur.smooth_mean = cur.filter_mean + G * (next.smooth_mean - pred_m[i + 1]);
    cur.smooth_var = cur.filter_var + G * G * (next.smooth_var - pred_S[i + 1]);
  }
  return res;
}

McEstimate mc_girsanov_kl(const SdeModel& model_p, const DriftFunction& drift_q,
                          const InitialSampler& initial, double horizon, std::size_t n_paths,
                          double dt, std::uint64_t seed, unsigned threads) {
  if (n_paths < 2) throw Error(ErrorKind::InvalidArgument, "need at least two paths");
  if (!(dt > 0.0) || dt > horizon) throw Error(ErrorKind::InvalidArgument, "invalid dt");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  const double h = horizon / static_cast<double>(steps);
  const double sqrt_h = std::sqrt(h);
  constexpr std::size_t kBlock = 256;
  const std::size_t n_blocks = (n_paths + kBlock - 1) / kBlock;

  struct BlockSum {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;
  };
  std::vector<BlockSum> blocks(n_blocks);

  auto run_block = [&](std::size_t b) {
    std::seed_seq seq{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(b)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    BlockSum acc;
    const std::size_t first = b * kBlock;
    const std::size_t last = std::min(n_paths, first + kBlock);
    for (std::size_t p = first; p < last; ++p) {
      double x = initial(rng);
      double kl = 0.0;
      bool ok = std::isfinite(x);
      for (std::size_t i = 0; i < steps && ok; ++i) {
        const double t = static_cast<double>(i) * h;
        const double u = drift_q(x, t);
        const double a = model_p.diffusion_sq(x);
        const double diff = u - model_p.drift(x);
        kl += 0.5 * diff * diff / a * h;
        x += u * h + std::sqrt(std::max(a, 0.0)) * sqrt_h * normal(rng);
        ok = std::isfinite(x) && std::isfinite(kl);
      }
      if (ok) {
        acc.sum += kl;
        acc.sum_sq += kl * kl;
        ++acc.used;
      } else {
        ++acc.excluded;
      }
    }
    blocks[b] = acc;
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_blocks)));
  if (workers == 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < n_blocks; b += workers) run_block(b);
      });
    }
    for (auto& th : pool) th.join();
  }

  BlockSum total;
  for (const auto& b : blocks) {
    total.sum += b.sum;
    total.sum_sq += b.sum_sq;
    total.used += b.used;
    total.excluded += b.excluded;
  }
  if (total.excluded * 100 > n_paths || total.used < 2) {
    throw Error(ErrorKind::UnreliableEstimate,
                std::to_string(total.excluded) + " of " + std::to_string(n_paths) + " paths diverged");
  }
  const double n = static_cast<double>(total.used);
  const double mean = total.sum / n;
  const double var = std::max(0.0, (total.sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), total.excluded};
}

double grid_kl(const GridDensity& p, const std::function<double(double)>& q_density) {
  const std::size_t n = p.values.size();
  const double dx = p.grid.dx();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pv = p.values[i];
    if (pv < 1e-300) continue;
    const double qv = q_density(p.grid.x(i));
    if (!(qv > 0.0) || !std::isfinite(std::log(qv))) {
      if (pv * dx > 1e-8) {
        throw Error(ErrorKind::SupportMismatch,
                    "reference density underflows at x = " + std::to_string(p.grid.x(i)));
      }
      continue;
    }
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    acc += w * pv * (std::log(pv) - std::log(qv));
  }
  return acc * dx;
}

double gaussian_kl(double m1, double S1, double m2, double S2) {
  return 0.5 * (std::log(S2 / S1) + (S1 + (m1 - m2) * (m1 - m2)) / S2 - 1.0);
}

}  // namespace diffsmooth
