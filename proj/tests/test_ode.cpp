#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pnum/error.hpp"
#include "pnum/ode.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

using namespace pnum;
using Eigen::VectorXd;

namespace {

VectorXd vec1(double v) { return VectorXd::Constant(1, v); }

IVProblem zero_field(Eigen::Index d, double t_end) {
  IVProblem p;
  p.name = "zero";
  p.f = [d](const VectorXd&, double) { return VectorXd::Zero(d).eval(); };
  p.x0 = VectorXd::LinSpaced(d, 1.0, 2.0);
  p.t_end = t_end;
  return p;
}

// Independent explicit Euler loop.
std::vector<VectorXd> euler_oracle(const IVProblem& p, double h, int n) {
  std::vector<VectorXd> xs{p.x0};
  VectorXd x = p.x0;
  for (int i = 0; i < n; ++i) {
    x = x + h * p.f(x, p.t0 + i * h);
    xs.push_back(x);
  }
  return xs;
}

double min_eig_ratio(const Eigen::MatrixXd& m) {
  if (m.trace() <= 0.0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().minCoeff() / m.trace();
}

}  // namespace

TEST_CASE("rk_reference examples") {
  SUBCASE("zero field stays put") {
    for (const auto& m : {RKMethod::euler(), RKMethod::midpoint(), RKMethod::rk4()}) {
      const Trajectory tr = rk_reference(zero_field(3, 1.0), m, 0.1);
      for (const VectorXd& x : tr.x) CHECK(x == VectorXd::LinSpaced(3, 1.0, 2.0));
    }
  }
  SUBCASE("one Euler step on x' = x") {
    const Trajectory tr = rk_reference(linear_problem(1.0, vec1(1.0), 0.0, 0.1), RKMethod::euler(), 0.1);
    CHECK(tr.x.back()[0] == doctest::Approx(1.1).epsilon(1e-15));
  }
  SUBCASE("RK4 reaches e") {
    // On x' = x one RK4 step multiplies by the degree-4 Taylor polynomial of e^h.
    const double h = 0.1;
    const double growth = 1 + h + h * h / 2 + h * h * h / 6 + h * h * h * h / 24;
    const Trajectory coarse = rk_reference(linear_problem(1.0, vec1(1.0), 0.0, 1.0), RKMethod::rk4(), h);
    CHECK(coarse.x.back()[0] == doctest::Approx(std::pow(growth, 10)).epsilon(1e-14));
    CHECK(std::abs(coarse.x.back()[0] - std::exp(1.0)) < 2.1e-6);
    const Trajectory fine = rk_reference(linear_problem(1.0, vec1(1.0), 0.0, 1.0), RKMethod::rk4(), 0.05);
    CHECK(std::abs(fine.x.back()[0] - std::exp(1.0)) < 1e-6);
  }
  SUBCASE("tableaux are consistent") {
    for (const auto& m : {RKMethod::euler(), RKMethod::midpoint(), RKMethod::rk4()}) {
      CHECK((m.a.rowwise().sum() - m.c).norm() < 1e-15);
      CHECK(m.b.sum() == doctest::Approx(1.0));
    }
  }
  SUBCASE("errors") {
    IVProblem p = linear_problem(1.0, vec1(1.0), 0.0, 1.0);
    CHECK_THROWS_AS(rk_reference(p, RKMethod::euler(), 0.3), InvalidArgument);
    p.f = [](const VectorXd& x, double t) { return VectorXd(t > 0.5 ? x * NAN : x); };
    CHECK_THROWS_AS(rk_reference(p, RKMethod::rk4(), 0.1), NonFiniteField);
    CHECK_THROWS_AS(solve_ivp_filter(p, {1, 0.1, 1.0, false}), NonFiniteField);
  }
}

TEST_CASE("filter examples") {
  SUBCASE("zero field") {
    for (int q : {1, 2}) {
      const FilterResult r = solve_ivp_filter(zero_field(2, 1.0), {q, 0.05, 0.7, false});
      double prev = -1.0;
      for (const FilterState& st : r.states) {
        CHECK(st.mean.head(2) == VectorXd::LinSpaced(2, 1.0, 2.0));
        CHECK(st.mean.segment(2, 2).norm() == 0.0);
        CHECK(std::sqrt(st.cov(0, 0)) >= prev);
        prev = std::sqrt(st.cov(0, 0));
      }
      CHECK(prev > 0.0);
    }
  }
  SUBCASE("q = 1 reproduces Euler on x' = x") {
    const IVProblem p = linear_problem(1.0, vec1(1.0), 0.0, 1.0);
    const FilterResult r = solve_ivp_filter(p, {1, 0.1, 1.0, false});
    const auto ref = euler_oracle(p, 0.1, 10);
    REQUIRE(r.trajectory.x.size() == 11);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(r.trajectory.x[i][0] - ref[i][0]) <= 1e-12);
    CHECK(r.evaluations == 11);
  }
  SUBCASE("invalid order") { CHECK_THROWS_AS(solve_ivp_filter(zero_field(1, 1.0), {3, 0.1, 1.0, false}), InvalidArgument); }
}

TEST_CASE("filter mean matches Euler on seeded instances") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const bool logistic = k % 2 == 1;
    const double rate = 0.2 + 1.8 * u(rng);
    const double h = 0.01 + 0.09 * u(rng);
    const int n = 10 + static_cast<int>(40 * u(rng));
    VectorXd x0(2);
    x0 << 0.1 + u(rng), 0.1 + u(rng);
    const IVProblem p = logistic ? logistic_problem(rate, 2.0, x0, 0.0, n * h) : linear_problem(-rate, x0, 0.0, n * h);
    const FilterResult r = solve_ivp_filter(p, {1, h, 0.5 + u(rng), false});
    const auto ref = euler_oracle(p, h, n);
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const VectorXd diff = (r.trajectory.x[i] - ref[i]).cwiseAbs();
      const VectorXd tol = 1e-10 * (1.0 + ref[i].cwiseAbs().array()).matrix();
      worst = std::max(worst, (diff.array() / tol.array()).maxCoeff());
    }
    CHECK(worst <= 1.0);
  }
}

TEST_CASE("filter covariance properties") {
  SUBCASE("PSD at every step") {
    const IVProblem lv = lotka_volterra_problem(1.5, 1.0, 1.0, 3.0, VectorXd::Constant(2, 1.0), 0.0, 5.0);
    for (int q : {1, 2}) {
      const FilterResult r = solve_ivp_filter(lv, {q, 0.01, 1.0, false});
      for (const FilterState& st : r.states) CHECK(min_eig_ratio(st.cov) >= -1e-8);
    }
  }
  SUBCASE("diffusion scaling") {
    for (int q : {1, 2}) {
      const IVProblem p = zero_field(1, 2.0);
      const double v1 = solve_ivp_filter(p, {q, 0.1, 1.0, false}).states.back().cov(0, 0);
      const double v3 = solve_ivp_filter(p, {q, 0.1, 3.7, false}).states.back().cov(0, 0);
      CHECK(v3 / v1 == doctest::Approx(3.7).epsilon(1e-8));
    }
  }
  SUBCASE("calibration picks the likelihood maximizer") {
    const IVProblem p = logistic_problem(1.5, 1.0, vec1(0.1), 0.0, 4.0);
    const FilterResult cal = solve_ivp_filter(p, {1, 0.05, 1.0, true});
    for (double factor : {0.5, 2.0}) {
      const FilterResult other = solve_ivp_filter(p, {1, 0.05, cal.rho2 * factor, false});
      CHECK(other.log_likelihood < cal.log_likelihood);
    }
    const FilterResult fixed = solve_ivp_filter(p, {1, 0.05, cal.rho2, false});
    CHECK(fixed.log_likelihood == doctest::Approx(cal.log_likelihood).epsilon(1e-9));
    CHECK(fixed.states.back().cov(0, 0) == doctest::Approx(cal.states.back().cov(0, 0)).epsilon(1e-9));
  }
}

TEST_CASE("linear cost in the number of steps") {
  const IVProblem p = logistic_problem(1.0, 2.0, vec1(0.5), 0.0, 1.0);
  auto timed = [&](int n, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < reps; ++k) (void)solve_ivp_filter(p, {1, 1.0 / n, 1.0, false});
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
  };
  (void)timed(10000, 1);
  // Interleaved pairs with a median keep scheduler noise out of the ratio.
  std::vector<double> ratios;
  for (int r = 0; r < 21; ++r) ratios.push_back(timed(10000, 2) / timed(1000, 20));
  std::nth_element(ratios.begin(), ratios.begin() + 10, ratios.end());
  const double ratio = ratios[10];
  MESSAGE("runtime ratio 1e4 / 1e3 steps: " << ratio);
  CHECK(ratio >= 8.0);
  CHECK(ratio <= 12.0);
}

TEST_CASE("convergence order") {
  const IVProblem p = linear_problem(1.0, vec1(1.0), 0.0, 1.0);
  const std::vector<double> hs{0.1, 0.05, 0.025, 0.0125};
  const double euler = convergence_order_estimate(NamedSolver::Euler, p, hs).slope;
  const double rk4 = convergence_order_estimate(NamedSolver::RK4, p, hs).slope;
  const double mid = convergence_order_estimate(NamedSolver::Midpoint, p, hs).slope;
  const double f1 = convergence_order_estimate(NamedSolver::Filter1, p, hs).slope;
  const double f2 = convergence_order_estimate(NamedSolver::Filter2, p, hs).slope;
  MESSAGE("slopes euler " << euler << " midpoint " << mid << " rk4 " << rk4 << " filter1 " << f1 << " filter2 " << f2);
  CHECK(euler >= 0.8);
  CHECK(euler <= 1.2);
  CHECK(rk4 >= 3.6);
  CHECK(rk4 <= 4.4);
  CHECK(std::abs(f1 - euler) <= 0.1);
  CHECK(mid == doctest::Approx(2.0).epsilon(0.1));
  CHECK(f2 >= 1.6);
  CHECK_THROWS_AS(convergence_order_estimate(NamedSolver::Euler, p, {0.1, 0.05, 0.025}), InvalidArgument);
  CHECK_THROWS_AS(convergence_order_estimate(NamedSolver::Euler, zero_field(1, 1.0), hs), InvalidArgument);
  IVProblem flat = zero_field(1, 1.0);
  flat.exact = [x0 = flat.x0](double) { return x0; };
  CHECK_THROWS_AS(convergence_order_estimate(NamedSolver::RK4, flat, hs), ZeroError);
}

TEST_CASE("named problems") {
  const IVProblem lv = named_problem("lotka-volterra", {{"alpha", 1.0}}, VectorXd::Constant(2, 1.0), 0.0, 1.0);
  CHECK(lv.dim() == 2);
  CHECK_FALSE(lv.exact.has_value());
  CHECK_THROWS_AS(named_problem("linear", {{"speed", 1.0}}, vec1(1.0), 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(named_problem("vanderpol", {}, vec1(1.0), 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(named_problem("stiff-linear", {{"lambda", 1.0}}, vec1(1.0), 0.0, 1.0), InvalidArgument);
  const IVProblem lg = named_problem("logistic", {{"rate", 2.0}, {"capacity", 3.0}}, vec1(0.5), 0.0, 1.0);
  CHECK((*lg.exact)(0.0)[0] == doctest::Approx(0.5));
  const double eps = 1e-6;
  const double deriv = ((*lg.exact)(0.3 + eps)[0] - (*lg.exact)(0.3 - eps)[0]) / (2 * eps);
  CHECK(deriv == doctest::Approx(lg.f((*lg.exact)(0.3), 0.3)[0]).epsilon(1e-6));
}
