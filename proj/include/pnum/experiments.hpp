#pragma once

#include "pnum/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace pnum {

/// Column-ordered table of already formatted cells.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  std::size_t column(const std::string& name) const;  // throws InvalidArgument if absent
  double number(std::size_t row, const std::string& name) const;
  void write(std::ostream& out) const;
};

/// Parses CSV written by CsvTable::write; lines starting with '#' are skipped.
CsvTable read_csv(std::istream& in);

/// Shortest representation that parses back to the same double.
std::string format_number(double v);

struct ExperimentOutput {
  CsvTable table;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
};

/// f(x) = exp(-sin^2(3x) - x^2), the running example integrand on [-3, 3].
double example_integrand(double x);
/// Its integral over [-3, 3] from a 10^6-node trapezoid rule, computed once.
double example_integral_oracle();

/// Mixes a base seed with stream indices (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

ExperimentOutput cmd_quad(Config& cfg, std::uint64_t seed);
ExperimentOutput cmd_evidence(Config& cfg, std::uint64_t seed);
ExperimentOutput cmd_linsolve(Config& cfg, std::uint64_t seed);
ExperimentOutput cmd_recycle(Config& cfg, std::uint64_t seed);
ExperimentOutput cmd_ode(Config& cfg, std::uint64_t seed);

/// Dispatches on "quad", "evidence", "linsolve", "recycle" or "ode".
ExperimentOutput run_command(const std::string& command, Config& cfg, std::uint64_t seed);

/// First budget from which every later row of one (method, seed) run stays
/// below `threshold`; -1 if the last row is still above it.
std::int64_t settle_budget(const std::vector<std::int64_t>& budgets, const std::vector<double>& errors,
                           double threshold);

}  // namespace pnum
