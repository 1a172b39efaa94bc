#include "fbsde/bench/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "fbsde/core/brownian.hpp"
#include "fbsde/core/errors.hpp"
#include "fbsde/core/philox.hpp"
#include "fbsde/sde/sde_sim.hpp"

namespace fbsde {

namespace fs = std::filesystem;

namespace {

const char* kSummaryHeader =
    "solver,model,d,N,theta_y,run,seed,max_mse_y,max_mse_z,gamma_sum_dt,gamma_sigma_weighted,"
    "rel_y0,rel_z0,rel_g0,runtime_s";

/// Tracks created files and directories; removes them unless committed.
class Outputs {
 public:
  explicit Outputs(const fs::path& root) : root_(root) { dir(root); }
  ~Outputs() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) fs::remove_all(*it, ec);
  }

  void dir(const fs::path& p) {
    if (fs::exists(p)) return;
    if (p.has_parent_path() && p.parent_path() != p) dir(p.parent_path());
    fs::create_directory(p);
    created_.push_back(p);
  }

  void write(const std::string& rel, const std::string& text) {
    const fs::path p = root_ / rel;
    dir(p.parent_path());
    if (!fs::exists(p)) created_.push_back(p);
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw InvalidArgument("cannot write " + p.string());
    f << text;
    files_.push_back(rel);
  }

  /// Path under the root for files written by other components.
  fs::path claim(const std::string& rel) {
    const fs::path p = root_ / rel;
    dir(p.parent_path());
    if (!fs::exists(p)) created_.push_back(p);
    files_.push_back(rel);
    return p;
  }

  void commit() { committed_ = true; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path root_;
  std::vector<fs::path> created_;
  std::vector<std::string> files_;
  bool committed_ = false;
};

std::string summary_row(const ExperimentConfig& c, std::size_t N, const std::string& run,
                        const std::string& seed, const ErrorReport& r, bool timing) {
  std::ostringstream s;
  s << r.solver << ',' << c.model.name << ',' << c.model.d << ',' << N << ','
    << format_number(c.solver.theta_y) << ',' << run << ',' << seed << ','
    << format_number(r.max_mse_y) << ',' << format_number(r.max_mse_z) << ','
    << format_number(r.gamma_sum_dt) << ',' << format_number(r.gamma_sigma_weighted) << ','
    << format_number(r.rel_y0) << ',' << format_number(r.rel_z0) << ','
    << format_number(r.rel_g0) << ','
    << (timing ? format_number(r.runtime_s) : std::string("nan")) << '\n';
  return s.str();
}

/// Field-wise mean (or sample standard deviation) of the summary columns.
ErrorReport combine(const std::vector<ErrorReport>& rs, bool stddev) {
  const auto stat = [&](auto field) {
    double m = 0.0;
    for (const auto& r : rs) m += r.*field;
    m /= static_cast<double>(rs.size());
    if (!stddev) return m;
    if (rs.size() < 2) return 0.0;
    double v = 0.0;
    for (const auto& r : rs) v += (r.*field - m) * (r.*field - m);
    return std::sqrt(v / static_cast<double>(rs.size() - 1));
  };
  ErrorReport out;
  out.solver = rs.front().solver;
  out.max_mse_y = stat(&ErrorReport::max_mse_y);
  out.max_mse_z = stat(&ErrorReport::max_mse_z);
  out.gamma_sum_dt = stat(&ErrorReport::gamma_sum_dt);
  out.gamma_sigma_weighted = stat(&ErrorReport::gamma_sigma_weighted);
  out.rel_y0 = stat(&ErrorReport::rel_y0);
  out.rel_z0 = stat(&ErrorReport::rel_z0);
  out.rel_g0 = stat(&ErrorReport::rel_g0);
  out.runtime_s = stat(&ErrorReport::runtime_s);
  return out;
}

std::string seed_audit(const std::vector<std::uint64_t>& seeds) {
  std::ostringstream s;
  s << "run,seed,train_domain,test_seed\n";
  for (std::size_t r = 0; r < seeds.size(); ++r)
    s << r << ',' << seeds[r] << ',' << seed_domain::train << ','
      << derive_seed(seeds[r], seed_domain::test) << '\n';
  return s.str();
}

ExperimentResult simulate(const ExperimentConfig& c, Outputs& out) {
  const ModelPtr model = make_model(c.model);
  const TimeGrid grid(model->horizon(), c.grid.N);
  const std::uint64_t seed = run_seed(c.report.seed, 0);
  const BrownianBatch noise = sample_brownian(grid, model->dim(), c.report.M, seed);
  const PathEnsemble euler = euler_maruyama(*model, noise);
  const std::size_t d = model->dim();

  std::ostringstream paths;
  paths << "path,n,t";
  for (std::size_t i = 0; i < d; ++i) paths << ",x_" << i + 1;
  paths << '\n';
  const std::size_t shown = std::min(c.report.paths, c.report.M);
  for (std::size_t b = 0; b < shown; ++b)
    for (std::size_t n = 0; n <= grid.steps(); ++n) {
      paths << b << ',' << n << ',' << format_number(grid.time(n));
      for (std::size_t i = 0; i < d; ++i)
        paths << ',' << format_number(euler.X[n](static_cast<Eigen::Index>(b),
                                                 static_cast<Eigen::Index>(i)));
      paths << '\n';
    }
  out.write("paths.csv", paths.str());

  ExperimentResult res;
  res.pipeline = "simulate";
  std::ostringstream line;
  line << "simulate " << model->name() << " d=" << d << " N=" << grid.steps()
       << " paths=" << c.report.M;
  if (model->has_exact_paths()) {
    const PathEnsemble exact = exact_paths(*model, noise);
    std::ostringstream strong;
    strong << "n,t,mse_x,mse_dx\n";
    double max_x = 0.0, max_dx = 0.0;
    const double inv = 1.0 / static_cast<double>(c.report.M);
    for (std::size_t n = 0; n <= grid.steps(); ++n) {
      const double ex = (euler.X[n] - exact.X[n]).squaredNorm() * inv;
      const double edx = n < grid.steps() ? (euler.DX[n] - exact.DX[n]).squaredNorm() * inv : 0.0;
      max_x = std::max(max_x, ex);
      max_dx = std::max(max_dx, edx);
      strong << n << ',' << format_number(grid.time(n)) << ',' << format_number(ex) << ','
             << format_number(edx) << '\n';
    }
    out.write("strong.csv", strong.str());
    line << " max_mse_x=" << format_number(max_x) << " max_mse_dx=" << format_number(max_dx);
  }
  res.summary = line.str();
  return res;
}

ExperimentResult solve(const ExperimentConfig& c, const std::string& pipeline, Outputs& out) {
  if ((pipeline == "solve-bcos") == c.deep())
    throw ConfigError("solver.name: '" + c.solver.name + "' does not fit pipeline " + pipeline);
  ExperimentResult res;
  res.pipeline = pipeline;
  std::vector<std::uint64_t> seeds;
  std::string summary = std::string(kSummaryHeader) + '\n';
  for (std::size_t r = 0; r < c.report.runs; ++r) {
    const std::uint64_t seed = run_seed(c.report.seed, r);
    seeds.push_back(seed);
    const std::string dir = "run_" + std::to_string(r);
    std::string run_dir;
    if (c.report.curves || c.report.checkpoints) {
      out.dir(fs::path(c.report.out) / dir);
      run_dir = (fs::path(c.report.out) / dir).string();
      if (c.report.curves) out.claim(dir + "/curves.csv");
      if (c.report.checkpoints) out.claim(dir + "/checkpoints");
    }
    ErrorReport rep = solve_and_evaluate(c, c.grid.N, seed, run_dir);
    out.write(dir + "/errors.csv", errors_csv(rep));
    summary += summary_row(c, c.grid.N, std::to_string(r), std::to_string(seed), rep,
                           c.report.timing);
    res.reports.push_back(std::move(rep));
  }
  if (c.report.runs > 1) {
    summary += summary_row(c, c.grid.N, "mean", "", combine(res.reports, false), c.report.timing);
    summary += summary_row(c, c.grid.N, "std", "", combine(res.reports, true), c.report.timing);
  }
  out.write("summary.csv", summary);
  out.write("seeds.csv", seed_audit(seeds));

  const ErrorReport m = combine(res.reports, false);
  std::ostringstream line;
  line << pipeline << ' ' << m.solver << ' ' << c.model.name << " d=" << c.model.d
       << " N=" << c.grid.N << " runs=" << c.report.runs
       << " max_mse_y=" << format_number(m.max_mse_y)
       << " max_mse_z=" << format_number(m.max_mse_z) << " rel_y0=" << format_number(m.rel_y0)
       << " rel_z0=" << format_number(m.rel_z0);
  res.summary = line.str();
  return res;
}

ExperimentResult convergence(const ExperimentConfig& c, Outputs& out) {
  if (c.grid.Ns.empty()) throw ConfigError("grid.Ns: required by the convergence pipeline");
  ExperimentResult res;
  res.pipeline = "convergence";
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < c.report.runs; ++r) seeds.push_back(run_seed(c.report.seed, r));
  ConvergenceTable table = convergence_study(
      c.grid.Ns, c.report.runs,
      [&](std::size_t N, std::size_t r) { return solve_and_evaluate(c, N, seeds[r]); });

  std::ostringstream csv, summary;
  csv << "kind,N,run,seed";
  for (Aggregate a : all_aggregates()) csv << ',' << to_string(a);
  csv << '\n';
  summary << kSummaryHeader << '\n';
  for (std::size_t i = 0; i < table.Ns.size(); ++i)
    for (std::size_t r = 0; r < table.runs; ++r) {
      const ErrorReport& rep = table.reports[i][r];
      csv << "run," << table.Ns[i] << ',' << r << ',' << seeds[r];
      for (Aggregate a : all_aggregates()) csv << ',' << format_number(value(rep, a));
      csv << '\n';
      summary << summary_row(c, table.Ns[i], std::to_string(r), std::to_string(seeds[r]), rep,
                             c.report.timing);
      res.reports.push_back(rep);
    }
  for (const char* kind : {"mean", "std"})
    for (std::size_t i = 0; i < table.Ns.size(); ++i) {
      csv << kind << ',' << table.Ns[i] << ",,";
      for (Aggregate a : all_aggregates())
        csv << ',' << format_number(kind[0] == 'm' ? table.mean(i, a) : table.stddev(i, a));
      csv << '\n';
    }
  std::ostringstream line;
  line << "convergence " << res.reports.front().solver << ' ' << c.model.name << " Ns=";
  for (std::size_t i = 0; i < table.Ns.size(); ++i) line << (i ? "," : "") << table.Ns[i];
  line << " runs=" << table.runs;
  if (table.Ns.size() > 1) {
    csv << "slope,,,";
    for (Aggregate a : all_aggregates()) {
      csv << ',' << format_number(table.slope(a));
      line << ' ' << to_string(a) << "_slope=" << format_number(table.slope(a));
    }
    csv << '\n';
  }
  out.write("convergence.csv", csv.str());
  out.write("summary.csv", summary.str());
  out.write("seeds.csv", seed_audit(seeds));
  res.summary = line.str();
  res.table = std::move(table);
  return res;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string errors_csv(const ErrorReport& r) {
  std::ostringstream s;
  s << "n,t,mse_y,mse_z,mse_gamma\n";
  for (std::size_t n = 0; n < r.t.size(); ++n)
    s << n << ',' << format_number(r.t[n]) << ',' << format_number(r.mse_y[n]) << ','
      << format_number(r.mse_z[n]) << ',' << format_number(r.mse_gamma[n]) << '\n';
  return s.str();
}

std::uint64_t run_seed(std::uint64_t base, std::size_t run) {
  return derive_seed(base, seed_domain::run, run);
}

ErrorReport solve_and_evaluate(const ExperimentConfig& c, std::size_t N, std::uint64_t seed,
                               const std::string& run_dir) {
  const ModelPtr model = make_model(c.model);
  const TimeGrid grid(model->horizon(), N);
  const auto t0 = std::chrono::steady_clock::now();
  ErrorReport rep;
  if (c.deep()) {
    TrainConfig t = c.train;
    t.seed = seed;
    if (!run_dir.empty() && c.report.curves) t.curve_path = run_dir + "/curves.csv";
    if (!run_dir.empty() && c.report.checkpoints) t.checkpoint_dir = run_dir + "/checkpoints";
    const DeepSolution sol = deep_solve(model, grid, t);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep = evaluate_errors(sol, model, grid, c.report.M, seed);
    rep.runtime_s = secs;
  } else {
    const BcosSolution sol = bcos_solve(model, grid, c.solver.bcos);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep = evaluate_errors(sol, model, grid, c.report.M, seed);
    rep.runtime_s = secs;
  }
  return rep;
}

ExperimentResult run_experiment(const ExperimentConfig& c, const std::string& pipeline) {
  const std::string p = pipeline.empty() ? c.default_pipeline() : pipeline;
  if (p != "simulate" && p != "solve-bcos" && p != "solve-deep" && p != "convergence")
    throw ConfigError("report.pipeline: unknown pipeline '" + p + "'");
  if (make_model(c.model)->has_reference() == false && p != "simulate")
    throw ConfigError("model.name: '" + c.model.name + "' has no reference solution");
  Outputs out(c.report.out);
  ExperimentResult res = p == "simulate"      ? simulate(c, out)
                         : p == "convergence" ? convergence(c, out)
                                              : solve(c, p, out);
  res.files = out.files();
  out.commit();
  return res;
}

ExperimentResult run_experiment(const std::string& config_path) {
  return run_experiment(load_config(config_path));
}

std::string write_report(const std::string& dir) {
  using nlohmann::ordered_json;
  const fs::path root(dir);
  ordered_json doc = ordered_json::object();
  std::ostringstream text;
  for (const char* name : {"summary.csv", "convergence.csv"}) {
    const fs::path p = root / name;
    if (!fs::exists(p)) continue;
    const auto rows = read_csv(p);
    if (rows.empty()) continue;
    ordered_json table = ordered_json::array();
    std::vector<std::size_t> width(rows[0].size(), 0);
    for (const auto& row : rows)
      for (std::size_t i = 0; i < row.size() && i < width.size(); ++i)
        width[i] = std::max(width[i], std::min<std::size_t>(row[i].size(), 12));
    text << name << '\n';
    for (std::size_t k = 0; k < rows.size(); ++k) {
      for (std::size_t i = 0; i < rows[k].size() && i < width.size(); ++i) {
        std::string cell = rows[k][i];
        if (k > 0 && cell.size() > 12 && cell.find_first_not_of("0123456789") != std::string::npos) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.4g", std::strtod(cell.c_str(), nullptr));
          cell = buf;
        }
        text << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << cell;
      }
      text << '\n';
      if (k == 0) continue;
      ordered_json obj = ordered_json::object();
      for (std::size_t i = 0; i < rows[0].size(); ++i) {
        const std::string cell = i < rows[k].size() ? rows[k][i] : "";
        char* end = nullptr;
        const bool digits = !cell.empty() && cell.find_first_not_of("0123456789") == std::string::npos;
        if (digits) {
          obj[rows[0][i]] = std::strtoull(cell.c_str(), nullptr, 10);
          continue;
        }
        const double v = std::strtod(cell.c_str(), &end);
        if (!cell.empty() && end == cell.c_str() + cell.size() && std::isfinite(v))
          obj[rows[0][i]] = v;
        else
          obj[rows[0][i]] = cell;
      }
      table.push_back(std::move(obj));
    }
    doc[fs::path(name).stem().string()] = std::move(table);
  }
  if (doc.empty()) throw InvalidArgument("no summary.csv or convergence.csv under " + dir);
  std::ofstream(root / "report.json") << doc.dump(2) << '\n';
  return text.str();
}

}  // namespace fbsde
