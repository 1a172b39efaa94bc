#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbsde/bcos/bcos_solver.hpp"
#include "fbsde/core/time_grid.hpp"
#include "fbsde/deep/deep_solver.hpp"
#include "fbsde/models/fbsde_model.hpp"

namespace fbsde {

struct ModelConfig {
  std::string name = "example1";  // example1 | example2 | example3 | abm
  std::size_t d = 1;
  std::optional<double> T;
  std::optional<double> lambda;
  std::optional<double> gamma;  // example1
  std::optional<double> tau;    // example3
  // abm: X = x0 + μt + σW, g(x) = a·x, all coordinates alike
  double x0 = 0.0, mu = 0.0, sigma = 1.0, a = 1.0;
};

struct GridConfig {
  std::size_t N = 10;
  std::vector<std::size_t> Ns;  // convergence studies
};

struct SolverConfig {
  std::string name = "bcos";  // bcos | osm-p | osm-d | dbdp1
  double theta_y = 1.0;
  BcosSettings bcos;
};

struct ReportConfig {
  std::string pipeline;  // simulate | solve-bcos | solve-deep | convergence; empty follows solver
  std::string out = "out";
  std::uint64_t seed = 0;
  std::size_t runs = 1;
  std::size_t M = 1024;
  std::size_t paths = 16;  // paths written by simulate
  bool timing = false;
  bool curves = false;
  bool checkpoints = false;
};

struct ExperimentConfig {
  ModelConfig model;
  GridConfig grid;
  SolverConfig solver;
  TrainConfig train;
  ReportConfig report;

  /// Pipeline to run when none is named on the command line.
  std::string default_pipeline() const;
  bool deep() const { return solver.name != "bcos"; }
};

/// INI text with sections [model] [grid] [solver] [train] [report].
/// Unknown sections or keys and out-of-range values raise ConfigError naming the key path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

ModelPtr make_model(const ModelConfig& m);
TimeGrid experiment_grid(const ExperimentConfig& c, std::size_t N);

}  // namespace fbsde
