#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>

#include "fbsde/bcos/bcos_solver.hpp"
#include "fbsde/bench/config.hpp"
#include "fbsde/bench/experiment.hpp"
#include "fbsde/bench/metrics.hpp"
#include "fbsde/core/brownian.hpp"
#include "fbsde/core/errors.hpp"
#include "fbsde/deep/deep_solver.hpp"
#include "fbsde/models/examples.hpp"
#include "fbsde/models/riccati.hpp"
#include "fbsde/sde/sde_sim.hpp"

namespace py = pybind11;
using namespace fbsde;

namespace {

/// A solved problem: stage evaluators plus whatever owns them.
struct Solution {
  std::shared_ptr<const void> owner;
  SolutionView view;
  ModelPtr model;
  TimeGrid grid;
};

Matrix as_batch(const Solution& s, const Matrix& X) {
  if (static_cast<std::size_t>(X.cols()) != s.model->dim())
    throw InvalidArgument("points must have shape (B, d)");
  return X;
}

void check_stage(const Solution& s, std::size_t n) {
  if (n > s.view.steps) throw InvalidArgument("stage index out of range");
}

py::dict report_dict(const ErrorReport& r) {
  py::dict d;
  d["solver"] = r.solver;
  d["seed"] = r.seed;
  d["t"] = r.t;
  d["mse_y"] = r.mse_y;
  d["mse_z"] = r.mse_z;
  d["mse_gamma"] = r.mse_gamma;
  d["max_mse_y"] = r.max_mse_y;
  d["max_mse_z"] = r.max_mse_z;
  d["gamma_sum_dt"] = r.gamma_sum_dt;
  d["gamma_sigma_weighted"] = r.gamma_sigma_weighted;
  d["rel_y0"] = r.rel_y0;
  d["rel_z0"] = r.rel_z0;
  d["rel_g0"] = r.rel_g0;
  return d;
}

py::array_t<double> stack(const std::vector<Matrix>& blocks) {
  const auto n = static_cast<py::ssize_t>(blocks.size());
  const py::ssize_t B = blocks.empty() ? 0 : blocks[0].rows();
  const py::ssize_t c = blocks.empty() ? 0 : blocks[0].cols();
  py::array_t<double> out({n, B, c});
  auto a = out.mutable_unchecked<3>();
  for (py::ssize_t k = 0; k < n; ++k)
    for (py::ssize_t b = 0; b < B; ++b)
      for (py::ssize_t j = 0; j < c; ++j) a(k, b, j) = blocks[k](b, j);
  return out;
}

}  // namespace

PYBIND11_MODULE(_fbsde, m) {
  m.doc() = "Forward-backward SDE solvers with one-step Malliavin estimates";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  py::class_<FbsdeModel, std::shared_ptr<FbsdeModel>>(m, "Model")
      .def_property_readonly("name", &FbsdeModel::name)
      .def_property_readonly("dim", &FbsdeModel::dim)
      .def_property_readonly("horizon", &FbsdeModel::horizon)
      .def_property_readonly("x0", [](const FbsdeModel& s) { return Vector(s.x0()); })
      .def_property_readonly("has_reference", &FbsdeModel::has_reference)
      .def(
          "reference",
          [](const FbsdeModel& s, double t, const Vector& x) {
            const ReferenceTriple r = reference_solution(s, t, x);
            return py::make_tuple(r.y, RowVector(r.z), Matrix(r.gamma));
          },
          py::arg("t"), py::arg("x"), "Exact (y, z, Γ) at (t, x).")
      .def("__repr__", [](const FbsdeModel& s) {
        return "<Model " + s.name() + " d=" + std::to_string(s.dim()) + ">";
      });

  m.def(
      "example1",
      [](std::size_t d, double T, double lam, double gamma) -> ModelPtr {
        return make_example1(d, T, lam, gamma);
      },
      py::arg("d") = 1, py::arg("T") = 0.5, py::arg("lam") = 1.0, py::arg("gamma") = 0.6);
  m.def(
      "example2", [](std::size_t d, double T) -> ModelPtr { return make_example2(d, T); },
      py::arg("d") = 1, py::arg("T") = 0.5);
  m.def(
      "example3",
      [](std::size_t d, double T, double lam, double tau) -> ModelPtr {
        return make_example3(d, T, lam, tau);
      },
      py::arg("d") = 1, py::arg("T") = 10.0, py::arg("lam") = 10.0, py::arg("tau") = 1.0);
  m.def(
      "abm",
      [](std::size_t d, double x0, double mu, double sigma, double a, double T) -> ModelPtr {
        return make_linear_abm(Vector::Constant(d, x0), Vector::Constant(d, mu),
                               sigma * Matrix::Identity(d, d), RowVector::Constant(d, a), T);
      },
      py::arg("d") = 1, py::arg("x0") = 0.0, py::arg("mu") = 0.0, py::arg("sigma") = 1.0,
      py::arg("a") = 1.0, py::arg("T") = 1.0, "Arithmetic Brownian motion with g(x) = a·x, f = 0.");

  m.def(
      "riccati",
      [](const Matrix& A, const Vector& v, double c, double T, std::size_t steps) {
        const RiccatiTable tab = solve_riccati(A, v, c, T, steps);
        return py::make_tuple(tab.P[0], tab.Q[0], tab.R[0]);
      },
      py::arg("A"), py::arg("v"), py::arg("c"), py::arg("T"), py::arg("steps") = 10000,
      "(P, Q, R) at t = 0.");

  m.def(
      "simulate",
      [](ModelPtr model, std::size_t N, std::size_t paths, std::uint64_t seed, bool exact) {
        const TimeGrid grid(model->horizon(), N);
        py::gil_scoped_release release;
        const BrownianBatch dw = sample_brownian(grid, model->dim(), paths, seed);
        const PathEnsemble p = exact ? exact_paths(*model, dw) : euler_maruyama(*model, dw);
        py::gil_scoped_acquire acquire;
        py::dict d;
        d["t"] = grid.nodes();
        d["X"] = stack(p.X);
        d["DX"] = stack(p.DX);
        return d;
      },
      py::arg("model"), py::arg("N"), py::arg("paths") = 1024, py::arg("seed") = 0,
      py::arg("exact") = false,
      "Euler (or exact) paths: X of shape (N+1, paths, d), DX of shape (N, paths, d*d).");

  py::class_<Solution>(m, "Solution")
      .def_property_readonly("solver", [](const Solution& s) { return s.view.solver; })
      .def_property_readonly("steps", [](const Solution& s) { return s.view.steps; })
      .def_property_readonly("times", [](const Solution& s) { return s.grid.nodes(); })
      .def(
          "y",
          [](const Solution& s, std::size_t n, const Matrix& X) {
            check_stage(s, n);
            return s.view.y(n, as_batch(s, X));
          },
          py::arg("n"), py::arg("X"))
      .def(
          "z",
          [](const Solution& s, std::size_t n, const Matrix& X) {
            check_stage(s, n);
            return s.view.z(n, as_batch(s, X));
          },
          py::arg("n"), py::arg("X"))
      .def(
          "gamma",
          [](const Solution& s, std::size_t n, const Matrix& X) {
            check_stage(s, n);
            return s.view.gamma(n, as_batch(s, X));
          },
          py::arg("n"), py::arg("X"), "Γ rows flattened row-major, shape (B, d*d).")
      .def(
          "evaluate",
          [](const Solution& s, std::size_t paths, std::uint64_t seed) {
            ErrorReport r;
            {
              py::gil_scoped_release release;
              r = evaluate_errors(s.view, s.model, s.grid, paths, seed);
            }
            return report_dict(r);
          },
          py::arg("paths") = 1024, py::arg("seed") = 0,
          "Mean squared errors against the reference along Euler test paths.");

  m.def(
      "bcos_solve",
      [](ModelPtr model, std::size_t N, std::size_t K, std::size_t picard, double theta_y,
         double L) {
        BcosSettings s;
        s.K = K;
        s.picard = picard;
        s.theta_y = theta_y;
        s.L = L;
        const TimeGrid grid(model->horizon(), N);
        std::shared_ptr<BcosSolution> sol;
        {
          py::gil_scoped_release release;
          sol = std::make_shared<BcosSolution>(bcos_solve(model, grid, s));
        }
        return Solution{sol, view(*sol), model, grid};
      },
      py::arg("model"), py::arg("N"), py::arg("K") = 512, py::arg("picard") = 5,
      py::arg("theta_y") = 1.0, py::arg("L") = 10.0);

  m.def(
      "deep_solve",
      [](ModelPtr model, std::size_t N, const std::string& variant, double theta_y,
         std::size_t batch, std::size_t iters_first, std::size_t iters_rest, double lr,
         std::size_t width, std::size_t layers, std::uint64_t seed) {
        TrainConfig c;
        c.variant = parse_variant(variant);
        c.theta_y = theta_y;
        c.batch = batch;
        c.iters_first = iters_first;
        c.iters_rest = iters_rest;
        c.lr.base = lr;
        c.width = width;
        c.layers = layers;
        c.seed = seed;
        const TimeGrid grid(model->horizon(), N);
        std::shared_ptr<DeepSolution> sol;
        {
          py::gil_scoped_release release;
          sol = std::make_shared<DeepSolution>(deep_solve(model, grid, c));
        }
        return Solution{sol, view(*sol), model, grid};
      },
      py::arg("model"), py::arg("N"), py::arg("variant") = "osm-p", py::arg("theta_y") = 1.0,
      py::arg("batch") = 256, py::arg("iters_first") = 4000, py::arg("iters_rest") = 1000,
      py::arg("lr") = 1e-3, py::arg("width") = 0, py::arg("layers") = 2, py::arg("seed") = 0,
      "variant: osm-p, osm-d or dbdp1.");

  m.def(
      "run_config",
      [](const std::string& text, const std::string& pipeline, const std::string& out) {
        ExperimentConfig c = parse_config(text);
        if (!out.empty()) c.report.out = out;
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(c, pipeline);
        }
        py::dict d;
        d["pipeline"] = r.pipeline;
        d["summary"] = r.summary;
        d["files"] = r.files;
        py::list reports;
        for (const auto& rep : r.reports) reports.append(report_dict(rep));
        d["reports"] = reports;
        return d;
      },
      py::arg("text"), py::arg("pipeline") = "", py::arg("out") = "",
      "Runs an INI experiment given as text; returns the summary and written files.");
}
