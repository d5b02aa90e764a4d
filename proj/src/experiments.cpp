#include "pnum/experiments.hpp"

#include "pnum/deconv.hpp"
#include "pnum/gp.hpp"
#include "pnum/linalg.hpp"
#include "pnum/mc.hpp"
#include "pnum/ode.hpp"
#include "pnum/quadrature.hpp"
#include "pnum/warped_bq.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace pnum {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs task(i) for i in [0, n) on a small thread pool. Results are written by
// index, so output order never depends on scheduling. The first exception
// (lowest index) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string fmt(double v) { return format_number(v); }
std::string fmt(std::int64_t v) { return std::to_string(v); }

double lerp_table(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - xs.begin());
  const double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return (1.0 - w) * ys[j - 1] + w * ys[j];
}

std::int64_t lcm_of_intervals(const std::vector<std::int64_t>& budgets) {
  std::int64_t l = 1;
  for (std::int64_t n : budgets) l = std::lcm(l, n - 1);
  return l;
}

// Slope of root-mean-square error against budget, over budgets >= min_budget.
std::optional<double> rms_slope(const std::map<std::int64_t, std::vector<double>>& errors, std::int64_t min_budget) {
  std::vector<double> x, y;
  for (const auto& [budget, errs] : errors) {
    if (budget < min_budget || errs.empty()) continue;
    double ss = 0.0;
    for (double e : errs) ss += e * e;
    const double rms = std::sqrt(ss / static_cast<double>(errs.size()));
    if (!(rms > 0.0)) continue;
    x.push_back(static_cast<double>(budget));
    y.push_back(rms);
  }
  if (x.size() < 2) return std::nullopt;
  return log_log_slope(x, y);
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_positive(Config& cfg, const std::string& key, double v) {
  if (!(v > 0.0)) cfg.fail(key, "'" + key + "' must be positive");
}

void check_budgets(Config& cfg, const std::string& key, const std::vector<std::int64_t>& b, std::int64_t min_value) {
  if (b.empty()) cfg.fail(key, "'" + key + "' must not be empty");
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] < min_value) cfg.fail(key, "'" + key + "' entries must be at least " + std::to_string(min_value));
    if (i > 0 && b[i] <= b[i - 1]) cfg.fail(key, "'" + key + "' must be strictly increasing");
  }
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw InvalidArgument("no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& cell = rows.at(row).at(column(name));
  if (cell.empty()) return kNaN;
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw InvalidArgument("cell '" + cell + "' in column '" + name + "' is not a number");
  }
  return v;
}

void CsvTable::write(std::ostream& out) const {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(columns);
  for (const auto& r : rows) line(r);
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string raw;
  bool header = true;
  while (std::getline(in, raw)) {
    if (raw.empty() || raw[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(raw);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!raw.empty() && raw.back() == ',') cells.emplace_back();
    if (header) {
      t.columns = std::move(cells);
      header = false;
    } else {
      if (cells.size() != t.columns.size()) throw InvalidArgument("CSV row width differs from header");
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double example_integrand(double x) {
  const double s = std::sin(3.0 * x);
  return std::exp(-s * s - x * x);
}

double example_integral_oracle() {
  static const double value = [] {
    constexpr int n = 1'000'000;
    const double h = 6.0 / (n - 1);
    double sum = 0.5 * (example_integrand(-3.0) + example_integrand(3.0));
    for (int i = 1; i < n - 1; ++i) sum += example_integrand(-3.0 + h * i);
    return h * sum;
  }();
  return value;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

std::int64_t settle_budget(const std::vector<std::int64_t>& budgets, const std::vector<double>& errors,
                           double threshold) {
  if (budgets.size() != errors.size()) throw DimensionMismatch("budgets and errors differ in length");
  std::int64_t settled = -1;
  for (std::size_t i = budgets.size(); i-- > 0;) {
    if (!(errors[i] < threshold)) break;
    settled = budgets[i];
  }
  return settled;
}

// ---------------------------------------------------------------------------
// quad

namespace {

struct QuadIntegrand {
  std::function<double(double)> f;
  Domain domain;
  double oracle = 0.0;
};

struct QuadTask {
  std::string method;
  std::size_t integrand = 0;
  std::int64_t rep = 0;
  std::int64_t budget = 0;
};

struct QuadResult {
  double estimate = 0.0;
  double stddev = kNaN;
};

}  // namespace

ExperimentOutput cmd_quad(Config& cfg, std::uint64_t seed) {
  cfg.restrict_to({"integrand", "methods", "budgets", "spline_c", "spline_b", "eq_fit", "eq_theta", "eq_lambda",
                   "draws", "draw_resolution", "values_path", "smc_reps", "slope_min_budget"});
  const std::string kind = cfg.get_choice("integrand", "paper-example", {"paper-example", "spline-draw", "custom-grid-values"});
  const auto methods = cfg.get_strings("methods", {"trapezoid", "spline-bq", "eq-bq", "smc"},
                                       {"trapezoid", "spline-bq", "eq-bq", "smc"});
  const bool drawn = kind == "spline-draw";
  const auto budgets = cfg.get_ints("budgets", drawn ? std::vector<std::int64_t>{10}
                                                     : std::vector<std::int64_t>{4, 8, 16, 32, 64, 128, 256});
  check_budgets(cfg, "budgets", budgets, 2);
  const double spline_c = cfg.get_double("spline_c", 1.0);
  const double spline_b = cfg.get_double("spline_b", 1.0);
  check_positive(cfg, "spline_c", spline_c);
  check_positive(cfg, "spline_b", spline_b);
  const bool eq_fit = cfg.get_bool("eq_fit", !drawn);
  const double eq_theta = cfg.get_double("eq_theta", std::sqrt(2.0));
  const double eq_lambda = cfg.get_double("eq_lambda", 1.0);
  check_positive(cfg, "eq_theta", eq_theta);
  check_positive(cfg, "eq_lambda", eq_lambda);
  const std::int64_t smc_reps = cfg.get_int("smc_reps", 1);
  if (smc_reps < 1) cfg.fail("smc_reps", "'smc_reps' must be at least 1");
  const std::int64_t slope_min = cfg.get_int("slope_min_budget", 64);

  std::vector<QuadIntegrand> integrands;
  if (kind == "paper-example") {
    integrands.push_back({example_integrand, Domain(-3.0, 3.0), example_integral_oracle()});
  } else if (drawn) {
    const std::int64_t draws = cfg.get_int("draws", 200);
    if (draws < 1) cfg.fail("draws", "'draws' must be at least 1");
    const std::int64_t resolution = cfg.get_int("draw_resolution", 900);
    if (resolution < 1) cfg.fail("draw_resolution", "'draw_resolution' must be at least 1");
    // Fine grid whose interval count is a multiple of every N - 1, so each
    // equidistant design lands exactly on fine-grid points.
    const std::int64_t base = lcm_of_intervals(budgets);
    const std::int64_t intervals = base * ((resolution + base - 1) / base);
    if (intervals > 20000) cfg.fail("budgets", "budgets need a fine grid of " + std::to_string(intervals) + " intervals (limit 20000)");
    const Domain dom(-3.0, 3.0);
    const auto grid = select_nodes_grid(dom, static_cast<int>(intervals + 1));
    const PathSampler sampler(Kernel::linear_spline(spline_c, spline_b, dom), grid);
    integrands.resize(static_cast<std::size_t>(draws));
    parallel_for(integrands.size(), [&](std::size_t d) {
      auto values = std::make_shared<std::vector<double>>(sampler.draw(derive_seed(seed, 0x5d, d)));
      auto xs = std::make_shared<std::vector<double>>(grid);
      integrands[d] = {[xs, values](double x) { return lerp_table(*xs, *values, x); }, dom, trapezoid(grid, *values)};
    });
  } else {
    const std::string path = cfg.get_string("values_path", "");
    if (path.empty()) cfg.fail("integrand", "custom-grid-values needs 'values_path'");
    std::ifstream in(path);
    if (!in) cfg.fail("values_path", "cannot open '" + path + "'");
    auto xs = std::make_shared<std::vector<double>>();
    auto ys = std::make_shared<std::vector<double>>();
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      double x = 0.0, y = 0.0;
      if (!(ls >> x >> y)) cfg.fail("values_path", "malformed line in '" + path + "': " + line);
      xs->push_back(x);
      ys->push_back(y);
    }
    if (xs->size() < 2) cfg.fail("values_path", "'" + path + "' needs at least two points");
    const double oracle = trapezoid(*xs, *ys);  // throws UnsortedNodes
    integrands.push_back({[xs, ys](double x) { return lerp_table(*xs, *ys, x); }, Domain(xs->front(), xs->back()), oracle});
  }

  std::vector<QuadTask> tasks;
  for (const std::string& m : methods) {
    for (std::size_t i = 0; i < integrands.size(); ++i) {
      const std::int64_t reps = m == "smc" ? smc_reps : 1;
      for (std::int64_t r = 0; r < reps; ++r) {
        for (std::int64_t n : budgets) tasks.push_back({m, i, r, n});
      }
    }
  }
  std::vector<QuadResult> results(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t k) {
    const QuadTask& t = tasks[k];
    const QuadIntegrand& g = integrands[t.integrand];
    QuadResult& out = results[k];
    if (t.method == "smc") {
      const SMCResult r = smc_integrate([&](std::span<const double> x) { return g.f(x[0]); }, Box(g.domain), t.budget,
                                        derive_seed(seed, t.integrand, static_cast<std::uint64_t>(t.rep) << 32 | static_cast<std::uint64_t>(t.budget)));
      out = {r.estimate, r.std_error};
      return;
    }
    const auto nodes = select_nodes_grid(g.domain, static_cast<int>(t.budget));
    std::vector<double> values;
    for (double x : nodes) values.push_back(g.f(x));
    if (t.method == "trapezoid") {
      out.estimate = trapezoid(nodes, values);
    } else if (t.method == "spline-bq") {
      const QuadratureEstimate e = bq_integrate(Kernel::linear_spline(spline_c, spline_b, g.domain), nodes, values);
      out = {e.mean, e.stddev()};
    } else {
      Kernel k = Kernel::exp_quadratic(eq_theta, eq_lambda, g.domain);
      if (eq_fit) k = fit_hyperparameters(k, nodes, values).kernel;
      const QuadratureEstimate e = bq_integrate(k, nodes, values);
      out = {e.mean, e.stddev()};
    }
  });

  ExperimentOutput res;
  res.table.columns = {"method", "integrand", "rep", "budget", "estimate", "oracle", "abs_error", "std"};
  std::map<std::string, std::map<std::int64_t, std::vector<double>>> errors;
  std::map<std::string, std::map<std::int64_t, std::pair<int, int>>> hits;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const QuadTask& t = tasks[k];
    const double oracle = integrands[t.integrand].oracle;
    const double err = std::abs(results[k].estimate - oracle);
    res.table.add({t.method, std::to_string(t.integrand), fmt(t.rep), fmt(t.budget), fmt(results[k].estimate), fmt(oracle),
                   fmt(err), std::isnan(results[k].stddev) ? "" : fmt(results[k].stddev)});
    errors[t.method][t.budget].push_back(err);
    if (!std::isnan(results[k].stddev)) {
      auto& h = hits[t.method][t.budget];
      h.first += err <= results[k].stddev;
      ++h.second;
    }
  }
  res.summary["integrand"] = kind;
  for (const std::string& m : methods) {
    nlohmann::ordered_json s;
    s["slope"] = optional_json(rms_slope(errors[m], slope_min));
    if (hits.count(m)) {
      nlohmann::ordered_json cov = nlohmann::ordered_json::object();
      for (const auto& [n, h] : hits[m]) cov[std::to_string(n)] = static_cast<double>(h.first) / h.second;
      s["coverage"] = cov;
    }
    res.summary["methods"][m] = s;
  }
  return res;
}

// ---------------------------------------------------------------------------
// evidence

namespace {

struct EvidenceRow {
  std::int64_t budget = 0;
  double log_estimate = 0.0;
  double log_spread = 0.0;
};

}  // namespace

ExperimentOutput cmd_evidence(Config& cfg, std::uint64_t seed) {
  cfg.restrict_to({"dim", "lo", "hi", "mu", "sigma", "scale", "methods", "seeds", "bq_budget", "smc_budget",
                   "ais_temps", "ais_chains", "ais_mh_steps", "threshold", "candidates", "slope_min_budget"});
  const std::int64_t dim = cfg.get_int("dim", 2);
  if (dim < 1 || dim > 4) cfg.fail("dim", "'dim' must be between 1 and 4");
  const double lo = cfg.get_double("lo", -3.0);
  const double hi = cfg.get_double("hi", 3.0);
  if (!(hi > lo)) cfg.fail("hi", "'hi' must exceed 'lo'");
  std::vector<double> mu_default{0.3, -0.2, 0.1, -0.1};
  mu_default.resize(static_cast<std::size_t>(dim));
  const auto mu = cfg.get_doubles("mu", mu_default);
  if (mu.size() != static_cast<std::size_t>(dim)) cfg.fail("mu", "'mu' needs one entry per dimension");
  const double sigma = cfg.get_double("sigma", 1.0);
  const double scale = cfg.get_double("scale", 1.0);
  check_positive(cfg, "sigma", sigma);
  check_positive(cfg, "scale", scale);
  const auto methods = cfg.get_strings("methods", {"warped-bq", "smc", "ais"}, {"warped-bq", "smc", "ais"});
  const std::int64_t seeds = cfg.get_int("seeds", 10);
  if (seeds < 1) cfg.fail("seeds", "'seeds' must be at least 1");
  const std::int64_t bq_budget = cfg.get_int("bq_budget", 40);
  const std::int64_t smc_budget = cfg.get_int("smc_budget", 16384);
  const std::int64_t ais_temps = cfg.get_int("ais_temps", 64);
  const std::int64_t ais_chains = cfg.get_int("ais_chains", 64);
  const std::int64_t ais_mh = cfg.get_int("ais_mh_steps", 5);
  for (const char* key : {"bq_budget", "smc_budget", "ais_temps", "ais_chains", "ais_mh_steps"}) {
    if (cfg.resolved()[key].get<std::int64_t>() < 1) cfg.fail(key, std::string("'") + key + "' must be at least 1");
  }
  const double threshold = cfg.get_double("threshold", 0.1);
  check_positive(cfg, "threshold", threshold);
  const std::int64_t candidates = cfg.get_int("candidates", 512);
  if (candidates < 2) cfg.fail("candidates", "'candidates' must be at least 2");
  const std::int64_t slope_min = cfg.get_int("slope_min_budget", 64);

  const Box box(std::vector<double>(static_cast<std::size_t>(dim), lo), std::vector<double>(static_cast<std::size_t>(dim), hi));
  const EvidenceProblem problem = gaussian_evidence_problem(box, mu, sigma, scale);
  const double log_z = *problem.log_z;
  const double log_vol = std::log(box.volume());

  std::vector<std::pair<std::string, std::int64_t>> tasks;
  for (const auto& m : methods) {
    for (std::int64_t s = 0; s < seeds; ++s) tasks.emplace_back(m, s);
  }
  std::vector<std::vector<EvidenceRow>> runs(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t k) {
    const auto& [method, s] = tasks[k];
    const std::uint64_t run_seed = derive_seed(seed, 0xe7, static_cast<std::uint64_t>(s));
    auto& rows = runs[k];
    if (method == "warped-bq") {
      WarpedOptions opt;
      opt.candidates = static_cast<int>(candidates);
      opt.record_log_error = true;
      opt.has_oracle = true;
      opt.oracle = std::exp(log_z + log_vol);
      const WarpedResult r = warped_bq_integrate([&](std::span<const double> x) { return std::exp(problem.log_likelihood(x)); },
                                                 box, static_cast<int>(bq_budget), run_seed, opt);
      for (const auto& row : r.record.rows) rows.push_back({row.budget, row.estimate - log_vol, row.spread});
    } else if (method == "smc") {
      const SMCResult r = smc_integrate(problem, smc_budget, run_seed);
      for (const auto& row : r.record.rows) rows.push_back({row.budget, std::log(row.estimate), row.spread / row.estimate});
    } else {
      const AISResult r = ais_evidence(problem, static_cast<int>(ais_temps), static_cast<int>(ais_chains),
                                       static_cast<int>(ais_mh), run_seed);
      for (const auto& row : r.record.rows) rows.push_back({row.budget, row.estimate, row.spread});
    }
  });

  ExperimentOutput res;
  res.table.columns = {"method", "seed", "budget", "log_estimate", "log_oracle", "abs_error", "log_spread"};
  std::map<std::string, std::vector<double>> settles;
  std::map<std::string, std::map<std::int64_t, std::vector<double>>> errors;
  std::vector<std::vector<std::pair<double, double>>> finals(static_cast<std::size_t>(seeds));  // (error, spread)
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto& [method, s] = tasks[k];
    std::vector<std::int64_t> b;
    std::vector<double> e;
    for (const auto& row : runs[k]) {
      const double err = std::abs(row.log_estimate - log_z);
      res.table.add({method, fmt(s), fmt(row.budget), fmt(row.log_estimate), fmt(log_z), fmt(err), fmt(row.log_spread)});
      b.push_back(row.budget);
      e.push_back(err);
      errors[method][row.budget].push_back(err);
    }
    const std::int64_t settled = settle_budget(b, e, threshold);
    settles[method].push_back(settled < 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(settled));
    if (!runs[k].empty()) finals[static_cast<std::size_t>(s)].emplace_back(e.back(), runs[k].back().log_spread);
  }

  res.summary["log_z"] = log_z;
  std::map<std::string, double> med;
  for (const auto& m : methods) {
    nlohmann::ordered_json s;
    med[m] = median(settles[m]);
    s["median_settle_budget"] = std::isfinite(med[m]) ? nlohmann::ordered_json(med[m]) : nlohmann::ordered_json(nullptr);
    s["slope"] = optional_json(rms_slope(errors[m], slope_min));
    res.summary["methods"][m] = s;
  }
  if (med.count("warped-bq") && med.count("smc") && std::isfinite(med["warped-bq"])) {
    res.summary["bq_over_smc_settle"] = std::isfinite(med["smc"]) ? nlohmann::ordered_json(med["warped-bq"] / med["smc"])
                                                                  : nlohmann::ordered_json(0.0);
  }
  // Final estimates against three times the spreads combined in quadrature.
  int within = 0, total = 0;
  for (const auto& per_seed : finals) {
    double var = 0.0;
    for (const auto& [err, spread] : per_seed) var += spread * spread;
    for (const auto& fe : per_seed) {
      within += fe.first <= 3.0 * std::sqrt(var);
      ++total;
    }
  }
  res.summary["final_within_3se"] = total ? static_cast<double>(within) / total : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// linsolve

ExperimentOutput cmd_linsolve(Config& cfg, std::uint64_t seed) {
  cfg.restrict_to({"operator", "size", "spectrum_lo", "spectrum_hi", "matrix_path", "rhs", "tol", "max_iterations",
                   "calibrate", "match_tol", "blur_width"});
  const std::string op = cfg.get_choice("operator", "random-spd", {"random-spd", "diagonal", "convolution", "file"});
  std::int64_t n = cfg.get_int("size", 32);
  if (n < 1) cfg.fail("size", "'size' must be at least 1");
  Eigen::MatrixXd a;
  if (op == "random-spd" || op == "diagonal") {
    const double lo = cfg.get_double("spectrum_lo", 1.0);
    const double hi = cfg.get_double("spectrum_hi", 10.0);
    check_positive(cfg, "spectrum_lo", lo);
    if (!(hi >= lo)) cfg.fail("spectrum_hi", "'spectrum_hi' must be at least 'spectrum_lo'");
    if (op == "random-spd") {
      a = random_spd_matrix(n, seed, lo, hi);
    } else {
      a = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) a(i, i) = n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    }
  } else if (op == "convolution") {
    const double width = cfg.get_double("blur_width", 2.0);
    check_positive(cfg, "blur_width", width);
    if (n < 2) cfg.fail("size", "'size' must be at least 2 for a convolution operator");
    BlurParams p;
    p.width = width;
    p.center = 0.0;
    a = normal_operator(convolution_matrix(blur_taps(p, 6), static_cast<int>(n)), 1e-3);
  } else {
    const std::string path = cfg.get_string("matrix_path", "");
    if (path.empty()) cfg.fail("operator", "operator 'file' needs 'matrix_path'");
    const bool binary = path.size() > 4 && path.substr(path.size() - 4) == ".bin";
    a = binary ? read_matrix_binary(path) : read_matrix_csv(path);
    if (a.rows() != a.cols()) cfg.fail("matrix_path", "matrix in '" + path + "' is not square");
    n = a.rows();
    cfg.get_int("size", n);
  }
  const std::string rhs_kind = cfg.get_choice("rhs", "random", {"random", "ones"});
  const Eigen::VectorXd b = rhs_kind == "ones" ? Eigen::VectorXd::Ones(n) : standard_normal(n, derive_seed(seed, 0xb));
  SolveOptions opt;
  opt.tol = cfg.get_double("tol", 1e-10);
  check_positive(cfg, "tol", opt.tol);
  opt.max_iterations = static_cast<int>(cfg.get_int("max_iterations", -1));
  const bool calibrate = cfg.get_bool("calibrate", true);
  const double match_tol = cfg.get_double("match_tol", 1e-6);
  check_positive(cfg, "match_tol", match_tol);

  const LinearOperator lin = LinearOperator::dense(a);
  const SolveReport cg = classic_cg(lin, b, opt);
  SolveReport prob = solve_probabilistic(lin, b, MatrixBelief::identity(n), opt);
  if (calibrate && prob.belief.observations() > 0) calibrate_scale(prob);

  ExperimentOutput res;
  res.table.columns = {"iteration", "cg_residual", "prob_residual", "iterate_rel_diff", "cg_match"};
  const std::size_t rows = std::max(cg.residual_norms.size(), prob.residual_norms.size());
  bool all_match = cg.iterations == prob.iterations;
  for (std::size_t k = 0; k < rows; ++k) {
    const bool both = k < cg.residual_norms.size() && k < prob.residual_norms.size();
    double diff = 0.0;
    if (k > 0 && both) {
      const Eigen::VectorXd& xc = cg.iterates[k - 1];
      diff = (prob.iterates[k - 1] - xc).norm() / std::max(xc.norm(), std::numeric_limits<double>::min());
    }
    const bool match = both && diff <= match_tol;
    all_match = all_match && match;
    res.table.add({std::to_string(k), k < cg.residual_norms.size() ? fmt(cg.residual_norms[k]) : "",
                   k < prob.residual_norms.size() ? fmt(prob.residual_norms[k]) : "", both ? fmt(diff) : "",
                   match ? "true" : "false"});
  }
  res.summary["size"] = n;
  res.summary["cg_iterations"] = cg.iterations;
  res.summary["prob_iterations"] = prob.iterations;
  res.summary["converged"] = prob.converged;
  res.summary["all_match"] = all_match;
  res.summary["calibrated_scale"] = optional_json(prob.calibrated_scale);
  return res;
}

// ---------------------------------------------------------------------------
// recycle

ExperimentOutput cmd_recycle(Config& cfg, std::uint64_t seed) {
  cfg.restrict_to({"size", "length", "drift", "noise", "blur_width", "kernel_radius", "epsilon_factor", "rank", "tol"});
  DeconvConfig d;
  d.size = static_cast<int>(cfg.get_int("size", d.size));
  d.length = static_cast<int>(cfg.get_int("length", d.length));
  d.drift = cfg.get_double("drift", d.drift);
  d.noise = cfg.get_double("noise", d.noise);
  d.blur_width = cfg.get_double("blur_width", d.blur_width);
  d.kernel_radius = static_cast<int>(cfg.get_int("kernel_radius", d.kernel_radius));
  d.epsilon_factor = cfg.get_double("epsilon_factor", d.epsilon_factor);
  const int rank = static_cast<int>(cfg.get_int("rank", -1));
  const double tol = cfg.get_double("tol", 1e-8);
  check_positive(cfg, "tol", tol);
  const DeconvSequence seq = generate_sequence(d, seed);
  const RecyclingReport report = run_recycling_benchmark(seq.problems, rank, tol);

  ExperimentOutput res;
  res.table.columns = {"variant", "problem_index", "iterations", "initial_residual", "final_residual", "matvecs"};
  for (const auto& r : report.rows) {
    res.table.add({r.variant, std::to_string(r.problem_index), std::to_string(r.iterations), fmt(r.initial_residual),
                   fmt(r.final_residual), fmt(r.matvecs)});
  }
  const int first = std::min(5, d.length);
  const double cold = report.mean_initial_residual("cold", first);
  const double warm = report.mean_initial_residual("warm", first);
  res.summary["first_problem_in_mean"] = first;
  res.summary["cold_mean_initial_residual"] = cold;
  res.summary["warm_mean_initial_residual"] = warm;
  res.summary["residual_ratio"] = warm / cold;
  res.summary["cold_matvecs"] = report.total_matvecs("cold");
  res.summary["warm_matvecs"] = report.total_matvecs("warm");
  return res;
}

// ---------------------------------------------------------------------------
// ode

ExperimentOutput cmd_ode(Config& cfg, std::uint64_t /*seed*/) {
  cfg.restrict_to({"study", "field", "rate", "capacity", "lambda", "alpha", "beta", "delta", "gamma", "x0", "t0",
                   "t_end", "solver", "h", "rho2", "calibrate", "solvers", "steps"});
  const std::string study = cfg.get_choice("study", "trajectory", {"trajectory", "order"});
  const std::string field = cfg.get_choice("field", "linear", {"linear", "logistic", "stiff-linear", "lotka-volterra"});
  std::map<std::string, double> params;
  for (const char* key : {"rate", "capacity", "lambda", "alpha", "beta", "delta", "gamma"}) {
    if (cfg.has(key)) params[key] = cfg.get_double(key, 0.0);
  }
  const auto x0v = cfg.get_doubles("x0", field == "lotka-volterra" ? std::vector<double>{1.0, 1.0}
                                        : field == "logistic"      ? std::vector<double>{0.1}
                                                                   : std::vector<double>{1.0});
  const double t0 = cfg.get_double("t0", 0.0);
  const double t_end = cfg.get_double("t_end", 1.0);
  if (!(t_end > t0)) cfg.fail("t_end", "'t_end' must exceed 't0'");
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(x0v.data(), static_cast<Eigen::Index>(x0v.size()));
  IVProblem problem;
  try {
    problem = named_problem(field, params, x0, t0, t_end);
  } catch (const InvalidArgument& e) {
    cfg.fail("field", e.what());
  }
  const std::vector<std::string> solver_names{"euler", "midpoint", "rk4", "filter1", "filter2"};

  ExperimentOutput res;
  if (study == "trajectory") {
    const std::string solver = cfg.get_choice("solver", "filter1", solver_names);
    const double h = cfg.get_double("h", 0.1);
    check_positive(cfg, "h", h);
    Trajectory traj;
    if (solver.rfind("filter", 0) == 0) {
      FilterOptions opt;
      opt.q = solver == "filter1" ? 1 : 2;
      opt.h = h;
      opt.rho2 = cfg.get_double("rho2", 1.0);
      check_positive(cfg, "rho2", opt.rho2);
      opt.calibrate = cfg.get_bool("calibrate", true);
      const FilterResult r = solve_ivp_filter(problem, opt);
      traj = r.trajectory;
      res.summary["rho2"] = r.rho2;
      res.summary["log_likelihood"] = r.log_likelihood;
      res.summary["evaluations"] = r.evaluations;
    } else {
      traj = rk_reference(problem, RKMethod::by_name(solver), h);
    }
    const Eigen::Index d = problem.dim();
    res.table.columns = {"t"};
    for (Eigen::Index i = 0; i < d; ++i) res.table.columns.push_back("mean_" + std::to_string(i));
    for (Eigen::Index i = 0; i < d; ++i) res.table.columns.push_back("std_" + std::to_string(i));
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
      std::vector<std::string> row{fmt(traj.t[k])};
      for (Eigen::Index i = 0; i < d; ++i) row.push_back(fmt(traj.x[k](i)));
      for (Eigen::Index i = 0; i < d; ++i) row.push_back(fmt(traj.std.empty() ? 0.0 : traj.std[k](i)));
      res.table.add(std::move(row));
    }
    res.summary["steps"] = static_cast<std::int64_t>(traj.t.size()) - 1;
    if (problem.exact) res.summary["final_error"] = (traj.x.back() - (*problem.exact)(traj.t.back())).norm();
    return res;
  }

  if (!problem.exact) cfg.fail("field", "order study needs a field with a closed-form solution");
  const auto solvers = cfg.get_strings("solvers", solver_names, solver_names);
  const auto steps = cfg.get_doubles("steps", {0.1, 0.05, 0.025, 0.0125, 0.00625});
  if (steps.size() < 4) cfg.fail("steps", "'steps' needs at least four step sizes");
  for (double h : steps) check_positive(cfg, "steps", h);
  std::vector<OrderEstimate> est(solvers.size());
  parallel_for(solvers.size(), [&](std::size_t i) { est[i] = convergence_order_estimate(solver_by_name(solvers[i]), problem, steps); });
  res.table.columns = {"solver", "h", "error", "slope"};
  for (std::size_t i = 0; i < solvers.size(); ++i) {
    for (std::size_t k = 0; k < est[i].h.size(); ++k) {
      res.table.add({solvers[i], fmt(est[i].h[k]), fmt(est[i].error[k]), fmt(est[i].slope)});
    }
    res.summary["slopes"][solvers[i]] = est[i].slope;
  }
  return res;
}

ExperimentOutput run_command(const std::string& command, Config& cfg, std::uint64_t seed) {
  if (command == "quad") return cmd_quad(cfg, seed);
  if (command == "evidence") return cmd_evidence(cfg, seed);
  if (command == "linsolve") return cmd_linsolve(cfg, seed);
  if (command == "recycle") return cmd_recycle(cfg, seed);
  if (command == "ode") return cmd_ode(cfg, seed);
  throw InvalidArgument("unknown command '" + command + "'");
}

}  // namespace pnum
