#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fbsde/core/time_grid.hpp"
#include "fbsde/deep/stage.hpp"
#include "fbsde/models/fbsde_model.hpp"
#include "fbsde/neural/adam.hpp"

namespace fbsde {

enum class DeepVariant { osm_p, osm_d, dbdp1 };

std::string to_string(DeepVariant v);
DeepVariant parse_variant(const std::string& name);

struct TrainConfig {
  std::size_t batch = 256;
  std::size_t iters_first = 4000;
  std::size_t iters_rest = 1000;
  double theta_y = 1.0;
  DeepVariant variant = DeepVariant::osm_p;
  std::uint64_t seed = 0;
  LearningRateSchedule lr;
  std::size_t layers = 2;
  std::size_t width = 0;  // 0 selects 100 + d
  bool layer_norm = true;
  bool norm_before_activation = false;
  /// Consecutive non-finite losses tolerated before giving up on a stage.
  std::size_t divergence_patience = 100;
  /// When non-empty, stage networks are written here as <stage>_<net>.fbnn.
  std::string checkpoint_dir;
  /// When non-empty, training losses are appended here as stage,iter,loss.
  std::string curve_path;

  void validate() const;
  Architecture architecture(std::size_t d, OutputShape shape) const;
  /// B = 2^10, I = 2^15 / 2^11.
  static TrainConfig full_budget();
};

struct TrainingCurve {
  std::size_t stage = 0;
  std::vector<double> z_loss;  // Z/Γ regression (joint regression for DBDP1)
  std::vector<double> y_loss;  // Y regression (empty for DBDP1)
};

struct DeepSolution {
  TimeGrid grid{1.0, 1};
  TrainConfig config;
  std::vector<StageTriple> stages;     // index n = 0..N
  std::vector<TrainingCurve> curves;   // index n = 0..N−1
  std::vector<double> gamma_asymmetry;  // mean ‖χ − χᵀ‖ on the last batch, OSM-P only
};

/// One-Step Malliavin backward regression (OSM-P or OSM-D).
DeepSolution osm_solve(ModelPtr model, const TimeGrid& grid, const TrainConfig& cfg);
/// Euler-scheme backward regression with joint (φ, ψ) training.
DeepSolution dbdp1_solve(ModelPtr model, const TimeGrid& grid, const TrainConfig& cfg);
/// Dispatches on cfg.variant.
DeepSolution deep_solve(ModelPtr model, const TimeGrid& grid, const TrainConfig& cfg);

}  // namespace fbsde
