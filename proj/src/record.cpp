#include "pnum/record.hpp"

#include "pnum/error.hpp"

#include <cmath>
#include <map>
#include <utility>

namespace pnum {

void ConvergenceRecord::attach_oracle(double oracle) {
  for (auto& row : rows) row.abs_error = std::abs(row.estimate - oracle);
}

bool ConvergenceRecord::budgets_increasing() const {
  std::map<std::pair<std::string, std::uint64_t>, std::int64_t> last;
  for (const auto& row : rows) {
    auto key = std::make_pair(row.method, row.seed);
    auto it = last.find(key);
    if (it != last.end() && row.budget <= it->second) return false;
    last[key] = row.budget;
  }
  return true;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope needs >= 2 paired points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) throw ZeroError("log-log slope needs positive values");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace pnum
