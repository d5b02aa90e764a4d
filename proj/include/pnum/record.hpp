#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pnum {

/// One row of a convergence trace: an estimate after `budget` evaluations.
struct ConvergenceRow {
  std::string method;
  std::int64_t budget = 0;
  double wall_ms = 0.0;
  double estimate = 0.0;
  double abs_error = 0.0;  ///< |estimate - oracle|, 0 when no oracle is attached
  double spread = 0.0;     ///< posterior std or Monte Carlo standard error
  std::uint64_t seed = 0;
};

struct ConvergenceRecord {
  std::vector<ConvergenceRow> rows;

  void add(ConvergenceRow row) { rows.push_back(std::move(row)); }
  /// Fills abs_error = |estimate - oracle| on every row.
  void attach_oracle(double oracle);
  /// Budgets strictly increase within each (method, seed) run.
  bool budgets_increasing() const;
};

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pnum
