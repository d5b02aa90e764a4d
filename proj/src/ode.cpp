#include "pnum/ode.hpp"

#include "pnum/error.hpp"
#include "pnum/record.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace pnum {

namespace {

void require_horizon(double t0, double t_end) {
  if (!(t_end > t0)) throw InvalidArgument("ODE horizon must satisfy t_end > t0");
}

Eigen::VectorXd checked_eval(const IVProblem& p, const Eigen::VectorXd& x, double t) {
  Eigen::VectorXd y = p.f(x, t);
  if (y.size() != p.dim()) throw DimensionMismatch("vector field returned the wrong dimension");
  if (!y.allFinite()) throw NonFiniteField("vector field returned a non-finite value at t = " + std::to_string(t));
  return y;
}

double param(const std::map<std::string, double>& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void reject_unknown(const std::map<std::string, double>& params, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : params) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidArgument("unknown vector-field parameter '" + key + "'");
  }
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// kron(m, I_d)
Eigen::MatrixXd expand(const Eigen::MatrixXd& m, Eigen::Index d) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows() * d, m.cols() * d);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out.block(i * d, j * d, d, d).diagonal().setConstant(m(i, j));
    }
  }
  return out;
}

void repair_psd(Eigen::MatrixXd& p, double t) {
  p = 0.5 * (p + p.transpose()).eval();
  const double scale = std::max(p.trace(), std::numeric_limits<double>::min());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo >= -1e-8 * scale) return;
  if (lo < -1e-6 * scale) {
    throw CovarianceBreakdown("filter covariance lost positive semi-definiteness at t = " + std::to_string(t));
  }
  p.diagonal().array() -= lo;
}

// Maximizes the scale-only log-likelihood sum_k -0.5 (d log rho2 + quad_k / rho2)
// over a log grid, then refines between the neighbours of the best grid point.
double fit_diffusion(double quad, double count) {
  auto loglik = [&](double log_rho2) { return -0.5 * (count * log_rho2 + quad * std::exp(-log_rho2)); };
  constexpr int kGrid = 16;
  const double lo = std::log(1e-8), hi = std::log(1e8);
  const double step = (hi - lo) / (kGrid - 1);
  int best = 0;
  for (int i = 1; i < kGrid; ++i) {
    if (loglik(lo + i * step) > loglik(lo + best * step)) best = i;
  }
  double a = lo + std::max(0, best - 1) * step;
  double b = lo + std::min(kGrid - 1, best + 1) * step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  for (int it = 0; it < 100 && b - a > 1e-10; ++it) {
    if (loglik(c) > loglik(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  const double refined = 0.5 * (a + b);
  return std::exp(loglik(refined) >= loglik(lo + best * step) ? refined : lo + best * step);
}

}  // namespace

IVProblem linear_problem(double rate, Eigen::VectorXd x0, double t0, double t_end) {
  require_horizon(t0, t_end);
  IVProblem p;
  p.name = "linear";
  p.f = [rate](const Eigen::VectorXd& x, double) { return Eigen::VectorXd(rate * x); };
  p.exact = [rate, x0, t0](double t) { return Eigen::VectorXd(x0 * std::exp(rate * (t - t0))); };
  p.x0 = std::move(x0);
  p.t0 = t0;
  p.t_end = t_end;
  return p;
}

IVProblem logistic_problem(double rate, double capacity, Eigen::VectorXd x0, double t0, double t_end) {
  require_horizon(t0, t_end);
  if (!(capacity > 0.0)) throw InvalidArgument("logistic capacity must be positive");
  IVProblem p;
  p.name = "logistic";
  p.f = [rate, capacity](const Eigen::VectorXd& x, double) {
    return Eigen::VectorXd(rate * x.array() * (1.0 - x.array() / capacity));
  };
  p.exact = [rate, capacity, x0, t0](double t) {
    const double g = std::exp(rate * (t - t0));
    return Eigen::VectorXd(capacity * x0.array() * g / (capacity + x0.array() * (g - 1.0)));
  };
  p.x0 = std::move(x0);
  p.t0 = t0;
  p.t_end = t_end;
  return p;
}

IVProblem stiff_linear_problem(double lambda, Eigen::VectorXd x0, double t0, double t_end) {
  if (!(lambda < 0.0)) throw InvalidArgument("stiff-linear problem needs lambda < 0");
  IVProblem p = linear_problem(lambda, std::move(x0), t0, t_end);
  p.name = "stiff-linear";
  return p;
}

IVProblem lotka_volterra_problem(double alpha, double beta, double delta, double gamma, Eigen::VectorXd x0,
                                 double t0, double t_end) {
  require_horizon(t0, t_end);
  if (x0.size() != 2) throw DimensionMismatch("Lotka-Volterra needs a two-dimensional initial value");
  IVProblem p;
  p.name = "lotka-volterra";
  p.f = [=](const Eigen::VectorXd& x, double) {
    Eigen::VectorXd y(2);
    y[0] = alpha * x[0] - beta * x[0] * x[1];
    y[1] = delta * x[0] * x[1] - gamma * x[1];
    return y;
  };
  p.x0 = std::move(x0);
  p.t0 = t0;
  p.t_end = t_end;
  return p;
}

IVProblem named_problem(const std::string& name, const std::map<std::string, double>& params,
                        const Eigen::VectorXd& x0, double t0, double t_end) {
  if (name == "linear") {
    reject_unknown(params, {"rate"});
    return linear_problem(param(params, "rate", 1.0), x0, t0, t_end);
  }
  if (name == "logistic") {
    reject_unknown(params, {"rate", "capacity"});
    return logistic_problem(param(params, "rate", 1.0), param(params, "capacity", 1.0), x0, t0, t_end);
  }
  if (name == "stiff-linear") {
    reject_unknown(params, {"lambda"});
    return stiff_linear_problem(param(params, "lambda", -50.0), x0, t0, t_end);
  }
  if (name == "lotka-volterra") {
    reject_unknown(params, {"alpha", "beta", "delta", "gamma"});
    return lotka_volterra_problem(param(params, "alpha", 1.5), param(params, "beta", 1.0), param(params, "delta", 1.0),
                                  param(params, "gamma", 3.0), x0, t0, t_end);
  }
  throw InvalidArgument("unknown vector field '" + name + "'");
}

RKMethod RKMethod::euler() {
  RKMethod m;
  m.name = "euler";
  m.a = Eigen::MatrixXd::Zero(1, 1);
  m.b = Eigen::VectorXd::Ones(1);
  m.c = Eigen::VectorXd::Zero(1);
  m.order = 1;
  return m;
}

RKMethod RKMethod::midpoint() {
  RKMethod m;
  m.name = "midpoint";
  m.a = Eigen::MatrixXd::Zero(2, 2);
  m.a(1, 0) = 0.5;
  m.b = Eigen::Vector2d(0.0, 1.0);
  m.c = Eigen::Vector2d(0.0, 0.5);
  m.order = 2;
  return m;
}

RKMethod RKMethod::rk4() {
  RKMethod m;
  m.name = "rk4";
  m.a = Eigen::MatrixXd::Zero(4, 4);
  m.a(1, 0) = 0.5;
  m.a(2, 1) = 0.5;
  m.a(3, 2) = 1.0;
  m.b = Eigen::Vector4d(1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6);
  m.c = Eigen::Vector4d(0.0, 0.5, 0.5, 1.0);
  m.order = 4;
  return m;
}

RKMethod RKMethod::by_name(const std::string& name) {
  if (name == "euler") return euler();
  if (name == "midpoint") return midpoint();
  if (name == "rk4") return rk4();
  throw InvalidArgument("unknown Runge-Kutta method '" + name + "'");
}

int step_count(const IVProblem& problem, double h) {
  if (!(h > 0.0)) throw InvalidArgument("step size must be positive");
  const double span = problem.t_end - problem.t0;
  const double n = std::round(span / h);
  if (n < 1.0 || std::abs(n * h - span) > 1e-9 * std::max(1.0, span)) {
    throw InvalidArgument("step size does not divide the integration interval");
  }
  return static_cast<int>(n);
}

Trajectory rk_reference(const IVProblem& problem, const RKMethod& method, double h) {
  const int n = step_count(problem, h);
  const int s = method.stages();
  Trajectory out;
  out.t.reserve(static_cast<std::size_t>(n) + 1);
  out.x.reserve(static_cast<std::size_t>(n) + 1);
  Eigen::VectorXd x = problem.x0;
  out.t.push_back(problem.t0);
  out.x.push_back(x);
  std::vector<Eigen::VectorXd> k(static_cast<std::size_t>(s));
  for (int i = 0; i < n; ++i) {
    const double t = problem.t0 + i * h;
    for (int j = 0; j < s; ++j) {
      Eigen::VectorXd xj = x;
      for (int l = 0; l < j; ++l) {
        if (method.a(j, l) != 0.0) xj += h * method.a(j, l) * k[static_cast<std::size_t>(l)];
      }
      k[static_cast<std::size_t>(j)] = checked_eval(problem, xj, t + method.c[j] * h);
    }
    for (int j = 0; j < s; ++j) {
      if (method.b[j] != 0.0) x += h * method.b[j] * k[static_cast<std::size_t>(j)];
    }
    out.t.push_back(problem.t0 + (i + 1) * h);
    out.x.push_back(x);
  }
  return out;
}

Eigen::MatrixXd iwp_transition(int q, double h) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q + 1, q + 1);
  for (int i = 0; i <= q; ++i) {
    for (int j = i; j <= q; ++j) a(i, j) = std::pow(h, j - i) / factorial(j - i);
  }
  return a;
}

Eigen::MatrixXd iwp_noise(int q, double h) {
  Eigen::MatrixXd m(q + 1, q + 1);
  for (int i = 0; i <= q; ++i) {
    for (int j = 0; j <= q; ++j) {
      const int p = 2 * q + 1 - i - j;
      m(i, j) = std::pow(h, p) / (p * factorial(q - i) * factorial(q - j));
    }
  }
  return m;
}

FilterResult solve_ivp_filter(const IVProblem& problem, const FilterOptions& options) {
  if (options.q != 1 && options.q != 2) throw InvalidArgument("filter prior order must be 1 or 2");
  if (!(options.rho2 > 0.0)) throw InvalidArgument("diffusion scale must be positive");
  const int n = step_count(problem, options.h);
  const Eigen::Index d = problem.dim();
  const int q = options.q;
  const double h = options.h;
  const double run_rho2 = options.calibrate ? 1.0 : options.rho2;

  const Eigen::MatrixXd a = expand(iwp_transition(q, h), d);
  const Eigen::MatrixXd qn = run_rho2 * expand(iwp_noise(q, h), d);

  FilterResult res;
  Eigen::VectorXd m = Eigen::VectorXd::Zero((q + 1) * d);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero((q + 1) * d, (q + 1) * d);
  m.head(d) = problem.x0;
  m.segment(d, d) = checked_eval(problem, problem.x0, problem.t0);
  res.evaluations = 1;
  res.states.reserve(static_cast<std::size_t>(n) + 1);
  res.states.push_back({problem.t0, m, p, h, q, run_rho2});

  double quad = 0.0, logdet = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double t = problem.t0 + i * h;
    m = a * m;
    p = a * p * a.transpose() + qn;
    const Eigen::VectorXd y = checked_eval(problem, m.head(d), t);
    ++res.evaluations;
    const Eigen::VectorXd e = y - m.segment(d, d);
    const Eigen::MatrixXd s = p.block(d, d, d, d);
    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) throw CovarianceBreakdown("innovation covariance is not positive definite");
    quad += e.dot(llt.solve(e));
    logdet += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();

    if (q == 1) {
      // Drop the x/x' correlation before conditioning so the derivative
      // observation leaves the state estimate untouched.
      p.block(0, d, d, d).setZero();
      p.block(d, 0, d, d).setZero();
      p.block(d, d, d, d).setZero();
      m.segment(d, d) = y;
    } else {
      const Eigen::MatrixXd ph = p.middleCols(d, d);
      const Eigen::MatrixXd gain = llt.solve(ph.transpose()).transpose();
      m += gain * e;
      p -= gain * ph.transpose();
    }
    repair_psd(p, t);
    res.states.push_back({t, m, p, h, q, run_rho2});
  }

  const double count = static_cast<double>(n) * static_cast<double>(d);
  res.rho2 = options.calibrate ? fit_diffusion(quad, count) : options.rho2;
  if (options.calibrate) {
    for (FilterState& st : res.states) {
      st.cov *= res.rho2;
      st.rho2 = res.rho2;
    }
  }
  // Covariances scale linearly in rho2, so the likelihood at the final value
  // follows from the unit-scale sums.
  const double scale = options.calibrate ? res.rho2 : 1.0;
  res.log_likelihood = -0.5 * (count * std::log(scale) + logdet + quad / scale + count * std::log(2.0 * std::numbers::pi));

  res.trajectory.t.reserve(res.states.size());
  for (const FilterState& st : res.states) {
    res.trajectory.t.push_back(st.t);
    res.trajectory.x.push_back(st.mean.head(d));
    res.trajectory.std.push_back(st.cov.topLeftCorner(d, d).diagonal().cwiseMax(0.0).cwiseSqrt());
  }
  return res;
}

NamedSolver solver_by_name(const std::string& name) {
  if (name == "euler") return NamedSolver::Euler;
  if (name == "midpoint") return NamedSolver::Midpoint;
  if (name == "rk4") return NamedSolver::RK4;
  if (name == "filter1") return NamedSolver::Filter1;
  if (name == "filter2") return NamedSolver::Filter2;
  throw InvalidArgument("unknown ODE solver '" + name + "'");
}

std::string solver_name(NamedSolver s) {
  switch (s) {
    case NamedSolver::Euler: return "euler";
    case NamedSolver::Midpoint: return "midpoint";
    case NamedSolver::RK4: return "rk4";
    case NamedSolver::Filter1: return "filter1";
    case NamedSolver::Filter2: return "filter2";
  }
  return "unknown";
}

Eigen::VectorXd solve_to_end(NamedSolver solver, const IVProblem& problem, double h) {
  switch (solver) {
    case NamedSolver::Euler: return rk_reference(problem, RKMethod::euler(), h).x.back();
    case NamedSolver::Midpoint: return rk_reference(problem, RKMethod::midpoint(), h).x.back();
    case NamedSolver::RK4: return rk_reference(problem, RKMethod::rk4(), h).x.back();
    case NamedSolver::Filter1: return solve_ivp_filter(problem, {1, h, 1.0, false}).trajectory.x.back();
    case NamedSolver::Filter2: return solve_ivp_filter(problem, {2, h, 1.0, false}).trajectory.x.back();
  }
  throw InvalidArgument("unknown ODE solver");
}

OrderEstimate convergence_order_estimate(NamedSolver solver, const IVProblem& problem, const std::vector<double>& hs) {
  if (hs.size() < 4) throw InvalidArgument("order estimate needs at least four step sizes");
  if (!problem.exact) throw InvalidArgument("order estimate needs a closed-form solution");
  const double ratio = hs[1] / hs[0];
  for (std::size_t i = 1; i < hs.size(); ++i) {
    if (!(hs[i] > 0.0) || std::abs(hs[i] / hs[i - 1] - ratio) > 1e-9 * std::abs(ratio) || ratio == 1.0) {
      throw InvalidArgument("step sizes must form a geometric progression");
    }
  }
  OrderEstimate est;
  est.h = hs;
  const Eigen::VectorXd truth = (*problem.exact)(problem.t_end);
  for (double h : hs) est.error.push_back((solve_to_end(solver, problem, h) - truth).norm());
  est.slope = log_log_slope(est.h, est.error);
  return est;
}

}  // namespace pnum
