#include "fbsde/bench/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fbsde/core/errors.hpp"
#include "fbsde/models/examples.hpp"

namespace fbsde {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"model", {"name", "d", "T", "lambda", "gamma", "tau", "x0", "mu", "sigma", "a"}},
      {"grid", {"N", "Ns"}},
      {"solver", {"name", "theta_y", "K", "M", "picard", "L"}},
      {"train",
       {"batch", "iters_first", "iters_rest", "lr", "lr_factor", "lr_milestones", "layers",
        "width", "layer_norm", "norm_before_activation", "patience"}},
      {"report",
       {"pipeline", "out", "seed", "runs", "M", "paths", "timing", "curves", "checkpoints"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty() || !std::isfinite(v))
    throw ConfigError(key + ": expected a finite number, got '" + raw + "'");
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError(key + ": expected a non-negative integer, got '" + raw + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + raw + "'");
}

template <class F>
auto to_list(const std::string& key, const std::string& raw, F&& item) {
  std::vector<decltype(item(key, raw))> out;
  std::stringstream ss(raw);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(item(key, tok));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list");
  return out;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {
    for (const auto& [section, body] : tree) {
      const auto it = schema().find(section);
      if (it == schema().end()) {
        if (body.empty()) throw ConfigError(section + ": keys must sit inside a section");
        throw ConfigError(section + ": unknown section");
      }
      for (const auto& [key, value] : body)
        if (!it->second.count(key)) throw ConfigError(section + "." + key + ": unknown key");
    }
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto s = tree_.get_child_optional(section);
    if (!s) return std::nullopt;
    const auto v = s->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return *v;
  }

  template <class T, class Conv>
  void read(const std::string& section, const std::string& key, T& out, Conv&& conv) const {
    if (const auto v = raw(section, key)) out = conv(section + "." + key, *v);
  }

 private:
  const pt::ptree& tree_;
};

std::size_t to_size(const std::string& key, const std::string& raw) {
  return static_cast<std::size_t>(to_uint(key, raw));
}

std::string to_string_value(const std::string&, const std::string& raw) { return trim(raw); }

std::size_t positive(const std::string& key, std::size_t v) {
  if (v < 1) throw ConfigError(key + ": must be positive");
  return v;
}

}  // namespace

std::string ExperimentConfig::default_pipeline() const {
  if (!report.pipeline.empty()) return report.pipeline;
  if (!grid.Ns.empty()) return "convergence";
  return deep() ? "solve-deep" : "solve-bcos";
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const Reader r(tree);
  ExperimentConfig c;
  const auto opt_double = [](const std::string& k, const std::string& v) {
    return std::optional<double>(to_double(k, v));
  };

  r.read("model", "name", c.model.name, to_string_value);
  r.read("model", "d", c.model.d, to_size);
  r.read("model", "T", c.model.T, opt_double);
  r.read("model", "lambda", c.model.lambda, opt_double);
  r.read("model", "gamma", c.model.gamma, opt_double);
  r.read("model", "tau", c.model.tau, opt_double);
  r.read("model", "x0", c.model.x0, to_double);
  r.read("model", "mu", c.model.mu, to_double);
  r.read("model", "sigma", c.model.sigma, to_double);
  r.read("model", "a", c.model.a, to_double);
  static const std::set<std::string> models = {"example1", "example2", "example3", "abm"};
  if (!models.count(c.model.name))
    throw ConfigError("model.name: unknown model '" + c.model.name + "'");
  positive("model.d", c.model.d);
  if (c.model.T && !(*c.model.T > 0.0)) throw ConfigError("model.T: must be positive");

  r.read("grid", "N", c.grid.N, to_size);
  positive("grid.N", c.grid.N);
  if (const auto v = r.raw("grid", "Ns")) {
    c.grid.Ns = to_list("grid.Ns", *v, to_size);
    for (std::size_t i = 0; i < c.grid.Ns.size(); ++i) {
      positive("grid.Ns", c.grid.Ns[i]);
      if (i > 0 && c.grid.Ns[i] <= c.grid.Ns[i - 1])
        throw ConfigError("grid.Ns: must increase strictly");
    }
  }

  r.read("solver", "name", c.solver.name, to_string_value);
  r.read("solver", "theta_y", c.solver.theta_y, to_double);
  r.read("solver", "K", c.solver.bcos.K, to_size);
  r.read("solver", "M", c.solver.bcos.M, to_size);
  r.read("solver", "picard", c.solver.bcos.picard, to_size);
  r.read("solver", "L", c.solver.bcos.L, to_double);
  static const std::set<std::string> solvers = {"bcos", "osm-p", "osm-d", "dbdp1"};
  if (!solvers.count(c.solver.name))
    throw ConfigError("solver.name: unknown solver '" + c.solver.name + "'");
  if (!(c.solver.theta_y >= 0.0 && c.solver.theta_y <= 1.0))
    throw ConfigError("solver.theta_y: must lie in [0, 1]");
  positive("solver.K", c.solver.bcos.K);
  if (!(c.solver.bcos.L > 0.0)) throw ConfigError("solver.L: must be positive");
  c.solver.bcos.theta_y = c.solver.theta_y;
  if (!c.deep() && c.model.d != 1) throw ConfigError("model.d: the cosine solver needs d = 1");

  TrainConfig& t = c.train;
  r.read("train", "batch", t.batch, to_size);
  r.read("train", "iters_first", t.iters_first, to_size);
  r.read("train", "iters_rest", t.iters_rest, to_size);
  r.read("train", "lr", t.lr.base, to_double);
  r.read("train", "lr_factor", t.lr.factor, to_double);
  if (const auto v = r.raw("train", "lr_milestones"))
    t.lr.milestones = to_list("train.lr_milestones", *v, to_double);
  r.read("train", "layers", t.layers, to_size);
  r.read("train", "width", t.width, to_size);
  r.read("train", "layer_norm", t.layer_norm, to_bool);
  r.read("train", "norm_before_activation", t.norm_before_activation, to_bool);
  r.read("train", "patience", t.divergence_patience, to_size);
  positive("train.batch", t.batch);
  positive("train.iters_first", t.iters_first);
  positive("train.iters_rest", t.iters_rest);
  positive("train.layers", t.layers);
  positive("train.patience", t.divergence_patience);
  if (!(t.lr.base > 0.0)) throw ConfigError("train.lr: must be positive");
  if (!(t.lr.factor > 0.0)) throw ConfigError("train.lr_factor: must be positive");
  for (double m : t.lr.milestones)
    if (!(m > 0.0 && m < 1.0)) throw ConfigError("train.lr_milestones: must lie in (0, 1)");
  t.theta_y = c.solver.theta_y;
  if (c.deep()) t.variant = parse_variant(c.solver.name);

  ReportConfig& p = c.report;
  r.read("report", "pipeline", p.pipeline, to_string_value);
  r.read("report", "out", p.out, to_string_value);
  r.read("report", "seed", p.seed, to_uint);
  r.read("report", "runs", p.runs, to_size);
  r.read("report", "M", p.M, to_size);
  r.read("report", "paths", p.paths, to_size);
  r.read("report", "timing", p.timing, to_bool);
  r.read("report", "curves", p.curves, to_bool);
  r.read("report", "checkpoints", p.checkpoints, to_bool);
  static const std::set<std::string> pipelines = {"", "simulate", "solve-bcos", "solve-deep",
                                                  "convergence"};
  if (!pipelines.count(p.pipeline))
    throw ConfigError("report.pipeline: unknown pipeline '" + p.pipeline + "'");
  positive("report.runs", p.runs);
  positive("report.M", p.M);
  if (p.out.empty()) throw ConfigError("report.out: must not be empty");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

ModelPtr make_model(const ModelConfig& m) {
  const std::size_t d = m.d;
  if (m.name == "example1")
    return make_example1(d, m.T.value_or(0.5), m.lambda.value_or(1.0), m.gamma.value_or(0.6));
  if (m.name == "example2") return make_example2(d, m.T.value_or(0.5));
  if (m.name == "example3")
    return make_example3(d, m.T.value_or(10.0), m.lambda.value_or(10.0), m.tau.value_or(1.0));
  if (m.name == "abm")
    return make_linear_abm(Vector::Constant(d, m.x0), Vector::Constant(d, m.mu),
                           m.sigma * Matrix::Identity(d, d), RowVector::Constant(d, m.a),
                           m.T.value_or(1.0));
  throw ConfigError("model.name: unknown model '" + m.name + "'");
}

TimeGrid experiment_grid(const ExperimentConfig& c, std::size_t N) {
  return TimeGrid(make_model(c.model)->horizon(), N);
}

}  // namespace fbsde
