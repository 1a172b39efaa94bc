#include "fbsde/bench/convergence.hpp"

#include <cmath>

#include "fbsde/core/errors.hpp"

namespace fbsde {

double loglog_slope(const std::vector<double>& N, const std::vector<double>& err) {
  if (N.size() != err.size() || N.size() < 2)
    throw InvalidArgument("slope fit needs at least two matching points");
  const double n = static_cast<double>(N.size());
  double sx = 0.0, sy = 0.0;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < N.size(); ++i) {
    if (!(N[i] > 0.0) || !(err[i] > 0.0)) throw InvalidArgument("slope fit needs positive data");
    lx.push_back(std::log(N[i]));
    ly.push_back(std::log(err[i]));
    sx += lx.back();
    sy += ly.back();
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw InvalidArgument("slope fit needs distinct N");
  return sxy / sxx;
}

const std::vector<Aggregate>& all_aggregates() {
  static const std::vector<Aggregate> all = {Aggregate::max_mse_y, Aggregate::max_mse_z,
                                             Aggregate::gamma_sum_dt,
                                             Aggregate::gamma_sigma_weighted};
  return all;
}

std::string to_string(Aggregate a) {
  switch (a) {
    case Aggregate::max_mse_y:
      return "max_mse_y";
    case Aggregate::max_mse_z:
      return "max_mse_z";
    case Aggregate::gamma_sum_dt:
      return "gamma_sum_dt";
    case Aggregate::gamma_sigma_weighted:
      return "gamma_sigma_weighted";
  }
  return "?";
}

double value(const ErrorReport& r, Aggregate a) {
  switch (a) {
    case Aggregate::max_mse_y:
      return r.max_mse_y;
    case Aggregate::max_mse_z:
      return r.max_mse_z;
    case Aggregate::gamma_sum_dt:
      return r.gamma_sum_dt;
    case Aggregate::gamma_sigma_weighted:
      return r.gamma_sigma_weighted;
  }
  return 0.0;
}

double ConvergenceTable::mean(std::size_t i, Aggregate a) const {
  double s = 0.0;
  for (const ErrorReport& r : reports.at(i)) s += value(r, a);
  return s / static_cast<double>(reports[i].size());
}

double ConvergenceTable::stddev(std::size_t i, Aggregate a) const {
  const auto& row = reports.at(i);
  if (row.size() < 2) return 0.0;
  const double m = mean(i, a);
  double s = 0.0;
  for (const ErrorReport& r : row) s += (value(r, a) - m) * (value(r, a) - m);
  return std::sqrt(s / static_cast<double>(row.size() - 1));
}

double ConvergenceTable::slope(Aggregate a) const {
  std::vector<double> n, e;
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    n.push_back(static_cast<double>(Ns[i]));
    e.push_back(mean(i, a));
  }
  return loglog_slope(n, e);
}

ConvergenceTable convergence_study(const std::vector<std::size_t>& Ns, std::size_t runs,
                                   const StudyCell& cell) {
  if (Ns.empty()) throw InvalidArgument("convergence study needs at least one N");
  if (runs < 1) throw InvalidArgument("convergence study needs at least one run");
  for (std::size_t i = 1; i < Ns.size(); ++i)
    if (Ns[i] <= Ns[i - 1]) throw InvalidArgument("study grid sizes must increase strictly");
  ConvergenceTable t;
  t.Ns = Ns;
  t.runs = runs;
  for (std::size_t N : Ns) {
    std::vector<ErrorReport> row;
    for (std::size_t r = 0; r < runs; ++r) {
      try {
        row.push_back(cell(N, r));
      } catch (const std::exception& e) {
        throw StudyError("N=" + std::to_string(N) + " run=" + std::to_string(r) + ": " + e.what(),
                         N, r);
      }
    }
    t.reports.push_back(std::move(row));
  }
  return t;
}

}  // namespace fbsde
