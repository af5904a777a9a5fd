#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "diffsmooth/error.hpp"
#include "diffsmooth/experiment.hpp"

namespace ds = diffsmooth;

namespace {

unsigned threads_from_env() {
  const char* env = std::getenv("DIFFUSMOOTH_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const unsigned long n = std::strtoul(env, &end, 10);
  if (*end != '\0' || n == 0 || n > 256) {
    throw ds::Error(ds::ErrorKind::Config, std::string("DIFFUSMOOTH_THREADS must be in 1..256, got ") + env);
  }
  return static_cast<unsigned>(n);
}

int exit_code(ds::ErrorKind kind) {
  switch (kind) {
    case ds::ErrorKind::Config:
    case ds::ErrorKind::Io:
    case ds::ErrorKind::InvalidArgument:
    case ds::ErrorKind::OutOfRange:
      return 2;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational and PDE smoothing of partially observed diffusions"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool svg = false;
  std::string method;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--out", out_dir, "override the output directory");
    cmd->add_flag("--svg", svg, "also render SVG figures");
  };

  auto* simulate = app.add_subcommand("simulate", "simulate a path and noisy measurements");
  auto* smooth = app.add_subcommand("smooth", "smooth the measurements");
  auto* compare = app.add_subcommand("compare", "compare PDE and variational smoothers");
  auto* infer = app.add_subcommand("infer", "estimate the drift parameter by EM");
  auto* plot = app.add_subcommand("plot", "render SVG figures from existing outputs");
  for (auto* cmd : {simulate, smooth, compare, infer, plot}) add_common(cmd);
  smooth->add_option("--method", method, "pde or variational")
      ->required()
      ->check(CLI::IsMember({"pde", "variational"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ds::ExperimentConfig cfg = ds::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.output_dir = *out_dir;
    const ds::CommandOptions opts{svg, threads_from_env()};

    if (simulate->parsed()) return ds::cmd_simulate(cfg, opts);
    if (smooth->parsed()) {
      const auto m = method == "pde" ? ds::SmoothMethod::Pde : ds::SmoothMethod::Variational;
      return ds::cmd_smooth(cfg, m, opts);
    }
    if (compare->parsed()) return ds::cmd_compare(cfg, opts);
    if (infer->parsed()) return ds::cmd_infer(cfg, opts);
    return ds::cmd_plot(cfg);
  } catch (const ds::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
}
