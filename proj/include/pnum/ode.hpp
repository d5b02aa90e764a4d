#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pnum {

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, double t)>;
using ExactSolution = std::function<Eigen::VectorXd(double t)>;

struct IVProblem {
  std::string name;
  VectorField f;
  Eigen::VectorXd x0;
  double t0 = 0.0;
  double t_end = 1.0;
  std::optional<ExactSolution> exact;

  Eigen::Index dim() const { return x0.size(); }
};

/// f(x, t) = a x, componentwise.
IVProblem linear_problem(double rate, Eigen::VectorXd x0, double t0, double t_end);
/// f(x, t) = r x (1 - x / K).
IVProblem logistic_problem(double rate, double capacity, Eigen::VectorXd x0, double t0, double t_end);
/// Linear decay with lambda < 0, meant to be run at large |lambda| h.
IVProblem stiff_linear_problem(double lambda, Eigen::VectorXd x0, double t0, double t_end);
/// Predator-prey system on R^2; no closed-form solution.
IVProblem lotka_volterra_problem(double alpha, double beta, double delta, double gamma, Eigen::VectorXd x0,
                                 double t0, double t_end);
/// Builds one of the problems above from a name and a parameter map.
/// Unknown names or parameters raise InvalidArgument.
IVProblem named_problem(const std::string& name, const std::map<std::string, double>& params,
                        const Eigen::VectorXd& x0, double t0, double t_end);

struct RKMethod {
  std::string name;
  Eigen::MatrixXd a;  // strictly lower triangular
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  int order = 1;

  static RKMethod euler();
  static RKMethod midpoint();
  static RKMethod rk4();
  static RKMethod by_name(const std::string& name);
  int stages() const { return static_cast<int>(b.size()); }
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> std;  // empty for classical methods
};

/// Number of fixed steps of size h covering the problem horizon.
int step_count(const IVProblem& problem, double h);

Trajectory rk_reference(const IVProblem& problem, const RKMethod& method, double h);

struct FilterState {
  double t = 0.0;
  Eigen::VectorXd mean;  // [x; x'; ...] blocks of size d
  Eigen::MatrixXd cov;
  double h = 0.0;
  int q = 1;
  double rho2 = 1.0;
};

struct FilterOptions {
  int q = 1;
  double h = 0.1;
  double rho2 = 1.0;
  bool calibrate = false;
};

struct FilterResult {
  std::vector<FilterState> states;
  Trajectory trajectory;
  double rho2 = 1.0;
  double log_likelihood = 0.0;  // one-step predictive log-likelihood of the observed derivatives
  int evaluations = 0;
};

/// Integrated-Wiener transition A(h) and unit-diffusion noise Q(h) for one dimension.
Eigen::MatrixXd iwp_transition(int q, double h);
Eigen::MatrixXd iwp_noise(int q, double h);

/// Gauss-Markov filter with an integrated Wiener prior, evaluating the field
/// once per step at the current mean. For q = 1 the update conditions only the
/// derivative block, which reproduces explicit Euler; q = 2 runs a joint
/// Kalman update on the full state.
FilterResult solve_ivp_filter(const IVProblem& problem, const FilterOptions& options);

enum class NamedSolver { Euler, Midpoint, RK4, Filter1, Filter2 };

NamedSolver solver_by_name(const std::string& name);
std::string solver_name(NamedSolver s);
Eigen::VectorXd solve_to_end(NamedSolver solver, const IVProblem& problem, double h);

struct OrderEstimate {
  double slope = 0.0;
  std::vector<double> h;
  std::vector<double> error;
};

/// Slope of log global error at t_end against log h. Needs a problem with a
/// closed-form solution and at least four step sizes in geometric progression.
OrderEstimate convergence_order_estimate(NamedSolver solver, const IVProblem& problem, const std::vector<double>& hs);

}  // namespace pnum
