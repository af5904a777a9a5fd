#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diffsmooth/em.hpp"
#include "diffsmooth/model.hpp"
#include "diffsmooth/ocp.hpp"
#include "diffsmooth/pde.hpp"

namespace diffsmooth {

struct MeasurementConfig {
  std::size_t count = 0;
  std::vector<double> times;  ///< explicit times; default equispaced T/N, ..., T
  double noise_std = 0.1;
  std::optional<std::vector<double>> values;  ///< pinned y-values
  std::string file;                           ///< default <output>/measurements.csv
};

struct GridConfig {
  std::size_t nx = 2000;
  std::size_t steps = 2000;
  std::optional<double> x_min;
  std::optional<double> x_max;
  std::size_t output_every = 10;
  /// Write a density CSV for every n-th stored frame (and at data times).
  std::size_t density_every = 20;
};

struct EmConfig {
  double kappa0 = 4.0;
  std::size_t max_iterations = 10;
  double tolerance = 1e-4;
};

struct ExperimentConfig {
  SdeModel model = SdeModel::ou(1.0, 1.0);
  InitialLaw law = InitialLaw::normal(0.0, 1.0);
  double horizon = 1.0;
  MeasurementConfig measurements;
  GridConfig grid;
  ShootOptions shoot;
  InverseMomentRule rule = InverseMomentRule::SecondOrder;
  EmConfig em;
  double simulation_dt = 0.0;  ///< 0 selects T / 2000
  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

/// Parses a JSON document; unknown keys and invalid values raise Config errors.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

struct CommandOptions {
  bool svg = false;
  unsigned threads = 1;
};

enum class SmoothMethod { Pde, Variational };

/// Each command returns 0 on success or 3 when a solver did not converge
/// (outputs are still written). Configuration problems throw Config/Io errors.
int cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opts);
int cmd_smooth(const ExperimentConfig& cfg, SmoothMethod method, const CommandOptions& opts);
int cmd_compare(const ExperimentConfig& cfg, const CommandOptions& opts);
int cmd_infer(const ExperimentConfig& cfg, const CommandOptions& opts);
/// EM on the configured data; the domain also covers the prior at kappa0.
EmRun run_inference(const ExperimentConfig& cfg, const CommandOptions& opts);
/// Renders SVGs from whatever CSV outputs exist in the output directory.
int cmd_plot(const ExperimentConfig& cfg);

/// Measurements for smoothing commands: pinned values from the config or the
/// measurements file.
MeasurementSet load_measurements(const ExperimentConfig& cfg);

/// Grid from the config, or an automatic domain.
Grid1D experiment_grid(const ExperimentConfig& cfg, const MeasurementSet& meas);

}  // namespace diffsmooth
