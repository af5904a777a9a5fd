#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "diffsmooth/model.hpp"

namespace diffsmooth {

/// Uniform spatial grid plus a nominal time step.
struct Grid1D {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t nx = 2000;
  double dt = 1e-4;

  double dx() const noexcept { return (x_max - x_min) / static_cast<double>(nx - 1); }
  double x(std::size_t i) const noexcept { return x_min + dx() * static_cast<double>(i); }
  std::vector<double> nodes() const;
  /// Throws InvalidArgument on an unusable grid.
  void validate() const;
};

struct GridDensity {
  Grid1D grid;
  std::vector<double> values;
  double time = 0.0;
  bool normalized = false;
};

struct PdeOptions {
  /// Store every n-th time step; measurement times, 0 and T are always stored.
  std::size_t output_every = 10;
  /// Mass allowed in the outermost 1% of the domain on either side.
  double leak_tolerance = 1e-4;
  /// Total negative mass tolerated before clamping.
  double negative_tolerance = 1e-8;
};

/// Domain covering the initial law and an 8-sd Gaussian-closure envelope of
/// the prior over [0, T], clipped at 0 for nonnegative models.
Grid1D auto_grid(const SdeModel& model, const InitialLaw& law, const MeasurementSet& meas,
                 double horizon, std::size_t nx, std::size_t steps);

/// Time nodes used by both solvers: uniform steps of about grid.dt aligned to
/// the measurement times.
std::vector<double> pde_time_nodes(const Grid1D& grid, const MeasurementSet& meas, double horizon);

/// Filter density. Each stored frame at a measurement time already includes
/// that datum.
std::vector<GridDensity> solve_forward(const SdeModel& model, const InitialLaw& law,
                                       const MeasurementSet& meas, const Grid1D& grid,
                                       double horizon, const PdeOptions& options = {});

/// Backward function, rescaled to unit max. A frame at a measurement time
/// holds the value just after that time, so p * w is the smoothing density
/// at every stored time; w(T) = 1.
std::vector<GridDensity> solve_backward(const SdeModel& model, const MeasurementSet& meas,
                                        const Grid1D& grid, double horizon,
                                        const PdeOptions& options = {});

/// Initial density p_0 on the grid, normalized.
GridDensity initial_density(const InitialLaw& law, const Grid1D& grid);

/// Normalized pointwise product p w.
GridDensity smoothing_density(const GridDensity& p, const GridDensity& w);

/// g = f + a d/dx log w with central differences (one-sided at the ends).
std::vector<double> posterior_drift(const GridDensity& w, const SdeModel& model);

/// Trapezoid integral of the nodal values.
double grid_mass(const GridDensity& d);

/// Trapezoid mean and central second moment.
std::pair<double, double> grid_moments(const GridDensity& d);

/// Normalized L2 residual of the smoothing density against the forward
/// equation with the posterior drift, evaluated at interior stored frames
/// that do not touch a measurement time.
double smoothing_fp_residual(const std::vector<GridDensity>& smoothing,
                             const std::vector<GridDensity>& backward, const SdeModel& model,
                             const MeasurementSet& meas);

}  // namespace diffsmooth
