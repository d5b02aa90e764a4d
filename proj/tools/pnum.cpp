#include "pnum/config.hpp"
#include "pnum/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

namespace {

struct Options {
  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 1;
  bool reproducible = false;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int run(const std::string& command, const Options& opt) {
  pnum::Config cfg = opt.config_path.empty() ? pnum::Config::parse("", "<defaults>") : pnum::Config::load(opt.config_path);
  const auto start = std::chrono::steady_clock::now();
  const pnum::ExperimentOutput result = pnum::run_command(command, cfg, opt.seed);
  const double wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  std::ofstream csv(opt.out_path, std::ios::binary);
  if (!csv) throw pnum::ConfigError(opt.out_path + ": cannot open output file");
  const std::string stamp = utc_timestamp();
  if (!opt.reproducible) csv << "# generated_at=" << stamp << '\n';
  result.table.write(csv);
  if (!csv.flush()) throw pnum::ConfigError(opt.out_path + ": write failed");

  nlohmann::ordered_json side;
  side["command"] = command;
  side["seed"] = opt.seed;
  side["config"] = cfg.resolved();
  side["columns"] = result.table.columns;
  side["rows"] = result.table.rows.size();
  side["summary"] = result.summary;
  if (!opt.reproducible) {
    side["generated_at"] = stamp;
    side["wall_ms"] = wall_ms;
  }
  std::ofstream json(opt.out_path + ".json", std::ios::binary);
  if (!json) throw pnum::ConfigError(opt.out_path + ".json: cannot open output file");
  json << side.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic numerics experiment runner"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"quad", "Quadrature convergence and calibration"},
      {"evidence", "Evidence estimation race: warped BQ, SMC, AIS"},
      {"linsolve", "Probabilistic linear solver against classic CG"},
      {"recycle", "Cold vs warm-started solves on a drifting deconvolution sequence"},
      {"ode", "ODE filter trajectories and convergence-order studies"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_path, "CSV output path; the resolved config goes to <out>.json")->required();
    sub->add_option("--seed", opt.seed, "Base seed");
    sub->add_flag("--reproducible", opt.reproducible, "Omit the timestamp header and timing fields");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, opt);
  } catch (const pnum::InvalidArgument& e) {
    std::cerr << "pnum " << command << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pnum " << command << ": numerical failure: " << e.what() << '\n';
    return 3;
  }
}
