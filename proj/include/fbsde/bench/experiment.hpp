#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbsde/bench/config.hpp"
#include "fbsde/bench/convergence.hpp"
#include "fbsde/bench/metrics.hpp"

namespace fbsde {

struct ExperimentResult {
  std::string pipeline;
  std::vector<ErrorReport> reports;
  std::optional<ConvergenceTable> table;
  std::vector<std::string> files;  // written artifacts, relative to report.out
  std::string summary;             // one-line echo
};

/// Seed of run r; training and test batches derive from it in disjoint domains.
std::uint64_t run_seed(std::uint64_t base, std::size_t run);

/// Solves on an N-step grid with the configured solver and evaluates against the reference.
/// `run_dir`, when non-empty, receives training curves and checkpoints if requested.
ErrorReport solve_and_evaluate(const ExperimentConfig& c, std::size_t N, std::uint64_t seed,
                               const std::string& run_dir = "");

/// Runs `pipeline` (or the configured default) and writes its CSV artifacts under
/// report.out. Everything written is removed again if the pipeline fails.
ExperimentResult run_experiment(const ExperimentConfig& c, const std::string& pipeline = "");
ExperimentResult run_experiment(const std::string& config_path);

/// Collects summary.csv / convergence.csv under `dir` into report.json and returns
/// a plain-text table.
std::string write_report(const std::string& dir);

std::string format_number(double v);
std::string errors_csv(const ErrorReport& r);

}  // namespace fbsde
