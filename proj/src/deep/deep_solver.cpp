#include "fbsde/deep/deep_solver.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "fbsde/core/errors.hpp"
#include "fbsde/core/philox.hpp"
#include "fbsde/deep/losses.hpp"
#include "fbsde/neural/checkpoint.hpp"

namespace fbsde {

std::string to_string(DeepVariant v) {
  switch (v) {
    case DeepVariant::osm_p:
      return "osm-p";
    case DeepVariant::osm_d:
      return "osm-d";
    case DeepVariant::dbdp1:
      return "dbdp1";
  }
  return "?";
}

DeepVariant parse_variant(const std::string& name) {
  if (name == "osm-p" || name == "OSM-P") return DeepVariant::osm_p;
  if (name == "osm-d" || name == "OSM-D") return DeepVariant::osm_d;
  if (name == "dbdp1" || name == "DBDP1") return DeepVariant::dbdp1;
  throw InvalidArgument("unknown deep solver variant '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch < 1) throw InvalidArgument("batch size must be positive");
  if (iters_first < 1 || iters_rest < 1) throw InvalidArgument("iteration budgets must be positive");
  if (!(theta_y >= 0.0 && theta_y <= 1.0)) throw InvalidArgument("theta_y must lie in [0, 1]");
  if (layers < 1) throw InvalidArgument("networks need at least one hidden layer");
  if (divergence_patience < 1) throw InvalidArgument("divergence patience must be positive");
  if (!(lr.base > 0.0)) throw InvalidArgument("learning rate must be positive");
}

Architecture TrainConfig::architecture(std::size_t d, OutputShape shape) const {
  Architecture a;
  a.input_dim = d;
  a.shape = shape;
  a.widths.assign(layers, width == 0 ? 100 + d : width);
  a.layer_norm = layer_norm;
  a.norm_before_activation = norm_before_activation;
  a.validate();
  return a;
}

TrainConfig TrainConfig::full_budget() {
  TrainConfig c;
  c.batch = 1024;
  c.iters_first = 32768;
  c.iters_rest = 2048;
  return c;
}

namespace {

constexpr std::uint64_t kInitPhi = 0, kInitPsi = 1, kInitChi = 2;

using LossBuilder =
    std::function<ad::Var(std::size_t iter, const std::vector<std::vector<ad::Var>>& leaves)>;

void train(std::size_t stage, std::size_t iters, const std::vector<Network*>& nets,
           const LossBuilder& build, const TrainConfig& cfg, std::vector<double>& curve) {
  std::vector<Matrix*> params;
  std::vector<Matrix> shapes;
  for (Network* net : nets)
    for (Matrix& p : net->params()) {
      params.push_back(&p);
      shapes.push_back(p);
    }
  AdamState state(shapes);
  curve.reserve(curve.size() + iters);
  std::size_t bad = 0;
  const auto fail = [&](const std::string& why) {
    if (++bad >= cfg.divergence_patience)
      throw DivergenceError("training diverged at stage " + std::to_string(stage) + " (" + why +
                                ")",
                            stage);
  };
  for (std::size_t i = 0; i < iters; ++i) {
    std::vector<std::vector<ad::Var>> leaves;
    std::vector<ad::Var> flat;
    for (Network* net : nets) {
      leaves.push_back(parameter_leaves(*net));
      flat.insert(flat.end(), leaves.back().begin(), leaves.back().end());
    }
    const ad::Var loss = build(i, leaves);
    const double value = loss.scalar();
    curve.push_back(value);
    if (!std::isfinite(value)) {
      fail("non-finite loss");
      continue;
    }
    const auto grads = ad::grad(loss, flat);
    std::vector<Matrix> g;
    g.reserve(grads.size());
    for (const auto& v : grads) g.push_back(v.value());
    std::string why;
    if (!adam_step(state, params, g, cfg.lr.at(i, iters), &why)) {
      fail(why);
      continue;
    }
    bad = 0;
  }
}

void write_curve_header(const TrainConfig& cfg) {
  if (cfg.curve_path.empty()) return;
  std::ofstream f(cfg.curve_path, std::ios::trunc);
  if (!f) throw InvalidArgument("cannot open " + cfg.curve_path);
  f << "stage,iter,loss\n";
}

/// Both regressions of a stage share one numbering: Z/Γ iterations first, then Y.
void append_curve(const TrainConfig& cfg, const TrainingCurve& c) {
  if (cfg.curve_path.empty()) return;
  std::ofstream f(cfg.curve_path, std::ios::app);
  char buf[64];
  std::size_t it = 0;
  for (const auto* v : {&c.z_loss, &c.y_loss})
    for (double x : *v) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      f << c.stage << ',' << it++ << ',' << buf << '\n';
    }
}

void save_stage(const TrainConfig& cfg, std::size_t n, const StageTriple& s) {
  if (cfg.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(cfg.checkpoint_dir);
  const std::string base = cfg.checkpoint_dir + "/stage_" + std::to_string(n) + "_";
  save_checkpoint(s.phi(), base + "phi.fbnn");
  save_checkpoint(s.psi(), base + "psi.fbnn");
  if (s.has_chi()) save_checkpoint(s.chi(), base + "chi.fbnn");
}

/// Training allocates many short-lived batch-sized matrices; keep them on the
/// heap instead of round-tripping through mmap and heap trimming.
void tune_allocator() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    mallopt(M_TOP_PAD, 64 << 20);
    return true;
  }();
  (void)done;
#endif
}

DeepSolution start(ModelPtr& model, const TimeGrid& grid, const TrainConfig& cfg) {
  tune_allocator();
  if (!model) throw InvalidArgument("deep solver needs a model");
  if (std::abs(grid.horizon() - model->horizon()) > 1e-12 * model->horizon())
    throw InvalidArgument("grid horizon differs from the model horizon");
  cfg.validate();
  DeepSolution sol;
  sol.grid = grid;
  sol.config = cfg;
  sol.stages.reserve(grid.steps() + 1);
  for (std::size_t n = 0; n <= grid.steps(); ++n) sol.stages.push_back(terminal_stage(model, grid.steps()));
  sol.curves.resize(grid.steps());
  sol.gamma_asymmetry.assign(grid.steps(), 0.0);
  write_curve_header(cfg);
  return sol;
}

double mean_asymmetry(const Matrix& chi_rows, Eigen::Index d) {
  double total = 0.0;
  for (Eigen::Index b = 0; b < chi_rows.rows(); ++b) {
    Matrix g(d, d);
    for (Eigen::Index i = 0; i < d; ++i) g.row(i) = chi_rows.block(b, i * d, 1, d);
    total += (g - g.transpose()).norm();
  }
  return total / static_cast<double>(chi_rows.rows());
}

}  // namespace

DeepSolution osm_solve(ModelPtr model, const TimeGrid& grid, const TrainConfig& cfg) {
  if (cfg.variant == DeepVariant::dbdp1)
    throw InvalidArgument("osm_solve requires an OSM variant");
  DeepSolution sol = start(model, grid, cfg);
  const std::size_t N = grid.steps(), d = model->dim();
  const bool parametrized = cfg.variant == DeepVariant::osm_p;
  const Architecture a_phi = cfg.architecture(d, OutputShape::scalar);
  const Architecture a_psi = cfg.architecture(d, OutputShape::row);
  const Architecture a_chi = cfg.architecture(d, OutputShape::matrix);
  Network phi = init_glorot(a_phi, derive_seed(cfg.seed, seed_domain::init, kInitPhi));
  Network psi = init_glorot(a_psi, derive_seed(cfg.seed, seed_domain::init, kInitPsi));
  Network chi = init_glorot(a_chi, derive_seed(cfg.seed, seed_domain::init, kInitChi));

  for (std::size_t n = N; n-- > 0;) {
    const StageTriple& next = sol.stages[n + 1];
    const std::size_t iters = n + 1 == N ? cfg.iters_first : cfg.iters_rest;
    TrainingCurve& curve = sol.curves[n];
    curve.stage = n;

    Matrix last_X;
    const LossBuilder z_loss = [&](std::size_t i, const std::vector<std::vector<ad::Var>>& p) {
      const StageBatch batch = make_stage_batch(
          *model, grid, n, cfg.batch, derive_seed(cfg.seed, seed_domain::train, 2 * n, i));
      const ZLossInputs in = z_loss_inputs(*model, batch, next_stage_data(*model, batch, next));
      if (i + 1 == iters) last_X = batch.X;
      if (parametrized) {
        const ad::Var X = ad::Var::constant(batch.X);
        return loss_zgamma(in, forward(a_psi, p[0], X), forward(a_chi, p[1], X));
      }
      const ad::Var X = ad::Var::leaf(batch.X);
      return loss_zd(in, forward(a_psi, p[0], X), X);
    };
    if (parametrized)
      train(n, iters, {&psi, &chi}, z_loss, cfg, curve.z_loss);
    else
      train(n, iters, {&psi}, z_loss, cfg, curve.z_loss);
    if (parametrized)
      sol.gamma_asymmetry[n] = mean_asymmetry(chi.evaluate(last_X), static_cast<Eigen::Index>(d));

    const LossBuilder y_loss = [&](std::size_t i, const std::vector<std::vector<ad::Var>>& p) {
      const StageBatch batch = make_stage_batch(
          *model, grid, n, cfg.batch, derive_seed(cfg.seed, seed_domain::train, 2 * n + 1, i));
      const YLossInputs in = y_loss_inputs(*model, batch, next_stage_data(*model, batch, next),
                                           psi.evaluate(batch.X), cfg.theta_y);
      return loss_y(in, forward(a_phi, p[0], ad::Var::constant(batch.X)));
    };
    train(n, iters, {&phi}, y_loss, cfg, curve.y_loss);

    sol.stages[n] = parametrized ? StageTriple::networks(n, phi, psi, chi)
                                 : StageTriple::networks(n, phi, psi);
    save_stage(cfg, n, sol.stages[n]);
    append_curve(cfg, curve);
  }
  return sol;
}

DeepSolution dbdp1_solve(ModelPtr model, const TimeGrid& grid, const TrainConfig& cfg) {
  if (cfg.variant != DeepVariant::dbdp1)
    throw InvalidArgument("dbdp1_solve requires the dbdp1 variant");
  DeepSolution sol = start(model, grid, cfg);
  const std::size_t N = grid.steps(), d = model->dim();
  const Architecture a_phi = cfg.architecture(d, OutputShape::scalar);
  const Architecture a_psi = cfg.architecture(d, OutputShape::row);
  Network phi = init_glorot(a_phi, derive_seed(cfg.seed, seed_domain::init, kInitPhi));
  Network psi = init_glorot(a_psi, derive_seed(cfg.seed, seed_domain::init, kInitPsi));

  for (std::size_t n = N; n-- > 0;) {
    const StageTriple& next = sol.stages[n + 1];
    const std::size_t iters = n + 1 == N ? cfg.iters_first : cfg.iters_rest;
    TrainingCurve& curve = sol.curves[n];
    curve.stage = n;
    const LossBuilder loss = [&](std::size_t i, const std::vector<std::vector<ad::Var>>& p) {
      const StageBatch batch = make_stage_batch(
          *model, grid, n, cfg.batch, derive_seed(cfg.seed, seed_domain::train, 2 * n, i));
      const ad::Var X = ad::Var::constant(batch.X);
      return loss_dbdp1(*model, batch, next.y(batch.X_next), forward(a_phi, p[0], X),
                        forward(a_psi, p[1], X));
    };
    train(n, iters, {&phi, &psi}, loss, cfg, curve.z_loss);
    sol.stages[n] = StageTriple::networks(n, phi, psi);
    save_stage(cfg, n, sol.stages[n]);
    append_curve(cfg, curve);
  }
  return sol;
}

DeepSolution deep_solve(ModelPtr model, const TimeGrid& grid, const TrainConfig& cfg) {
  return cfg.variant == DeepVariant::dbdp1 ? dbdp1_solve(std::move(model), grid, cfg)
                                           : osm_solve(std::move(model), grid, cfg);
}

}  // namespace fbsde
