#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbsde/bench/metrics.hpp"

namespace fbsde {

/// Least-squares slope of log(err) against log(N).
double loglog_slope(const std::vector<double>& N, const std::vector<double>& err);

enum class Aggregate { max_mse_y, max_mse_z, gamma_sum_dt, gamma_sigma_weighted };

const std::vector<Aggregate>& all_aggregates();
std::string to_string(Aggregate a);
double value(const ErrorReport& r, Aggregate a);

struct ConvergenceTable {
  std::vector<std::size_t> Ns;
  std::size_t runs = 1;
  /// reports[i][r]: grid Ns[i], run r.
  std::vector<std::vector<ErrorReport>> reports;

  double mean(std::size_t i, Aggregate a) const;
  /// Sample standard deviation over runs (0 when runs = 1).
  double stddev(std::size_t i, Aggregate a) const;
  /// Slope of the run-mean aggregate.
  double slope(Aggregate a) const;
};

/// Solves one (N, run) cell and evaluates it.
using StudyCell = std::function<ErrorReport(std::size_t N, std::size_t run)>;

/// Raised when a study cell fails; carries the cell coordinates.
class StudyError : public std::runtime_error {
 public:
  StudyError(const std::string& what, std::size_t N, std::size_t run)
      : std::runtime_error(what), N_(N), run_(run) {}
  std::size_t N() const noexcept { return N_; }
  std::size_t run() const noexcept { return run_; }

 private:
  std::size_t N_, run_;
};

ConvergenceTable convergence_study(const std::vector<std::size_t>& Ns, std::size_t runs,
                                   const StudyCell& cell);

}  // namespace fbsde
