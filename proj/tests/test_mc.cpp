#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pnum/error.hpp"
#include "pnum/mc.hpp"

#include <algorithm>
#include <cmath>

using namespace pnum;

namespace {

double gauss(double x, double mu, double s) {
  return std::exp(-0.5 * (x - mu) * (x - mu) / (s * s)) / (s * std::sqrt(2.0 * M_PI));
}

// 1-D test problem: N(theta; 0.5, 0.4^2) under a uniform prior on [-3, 3].
constexpr double kMu = 0.5, kSigma = 0.4, kLo = -3.0, kHi = 3.0;

double oracle_z() { return oracle::integral([](double t) { return gauss(t, kMu, kSigma); }, kLo, kHi) / (kHi - kLo); }

double oracle_sd() {
  const double second = oracle::integral([](double t) { return std::pow(gauss(t, kMu, kSigma), 2); }, kLo, kHi) / (kHi - kLo);
  return std::sqrt(second - oracle_z() * oracle_z());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EvidenceProblem problem_1d() { return gaussian_evidence_problem(Box({kLo}, {kHi}), {kMu}, kSigma); }

}  // namespace

TEST_CASE("analytic evidence of the Gaussian problem") {
  CHECK(std::exp(*problem_1d().log_z) == doctest::Approx(oracle_z()).epsilon(1e-12));
  const EvidenceProblem p2 = gaussian_evidence_problem(Box({-1.0, -2.0}, {1.0, 2.0}), {0.3, -0.2}, 0.5);
  const double zx = oracle::integral([](double t) { return gauss(t, 0.3, 0.5); }, -1, 1) / 2;
  const double zy = oracle::integral([](double t) { return gauss(t, -0.2, 0.5); }, -2, 2) / 4;
  CHECK(*p2.log_z == doctest::Approx(std::log(zx * zy)).epsilon(1e-12));
}

TEST_CASE("smc_integrate") {
  SUBCASE("constant likelihood is exact") {
    for (std::int64_t n : {1, 7, 100}) {
      const SMCResult r = smc_integrate(constant_evidence_problem(Box({0.0, 0.0}, {1.0, 2.0}), 0.1), n, 3);
      // Every draw returns the same value, so the running mean must equal it bit for bit.
      CHECK(r.estimate == std::exp(std::log(0.1)));
    }
  }
  SUBCASE("RMSE at N = 4096 against the analytic standard error") {
    const double z = oracle_z();
    double se2 = 0.0;
    for (int s = 0; s < 100; ++s) se2 += std::pow(smc_integrate(problem_1d(), 4096, 1000 + s).estimate - z, 2);
    const double rmse = std::sqrt(se2 / 100);
    const double analytic = oracle_sd() / std::sqrt(4096.0);
    MESSAGE("rmse " << rmse << " analytic se " << analytic);
    CHECK(rmse <= 2.0 * analytic);
  }
  SUBCASE("RMSE decays as N^-1/2") {
    const double z = oracle_z();
    std::vector<double> ns, sq(11, 0.0);
    for (int s = 0; s < 100; ++s) {
      const SMCResult r = smc_integrate(problem_1d(), 1 << 14, 5000 + s);
      int j = 0;
      for (const ConvergenceRow& row : r.record.rows) {
        if (row.budget < 16) continue;
        sq[static_cast<std::size_t>(j++)] += std::pow(row.estimate - z, 2);
      }
    }
    std::vector<double> rmse;
    for (int k = 4; k <= 14; ++k) ns.push_back(std::ldexp(1.0, k));
    for (double v : sq) rmse.push_back(std::sqrt(v / 100));
    const double slope = log_log_slope(ns, rmse);
    MESSAGE("slope " << slope);
    CHECK(slope >= -0.6);
    CHECK(slope <= -0.4);
  }
  SUBCASE("unbiased over 1000 seeds") {
    const int n = 64;
    double sum = 0.0;
    for (int s = 0; s < 1000; ++s) sum += smc_integrate(problem_1d(), n, 90000 + s).estimate;
    const double se = oracle_sd() / std::sqrt(n * 1000.0);
    CHECK(std::abs(sum / 1000 - oracle_z()) <= 3 * se);
  }
  SUBCASE("record and determinism") {
    const SMCResult a = smc_integrate(problem_1d(), 100, 8);
    const SMCResult b = smc_integrate(problem_1d(), 100, 8);
    CHECK(a.estimate == b.estimate);
    std::vector<std::int64_t> budgets;
    for (const auto& row : a.record.rows) budgets.push_back(row.budget);
    CHECK(budgets == std::vector<std::int64_t>{1, 2, 4, 8, 16, 32, 64, 100});
    CHECK(a.record.budgets_increasing());
    CHECK(a.std_error > 0.0);
    CHECK(smc_integrate(problem_1d(), 100, 9).estimate != a.estimate);
    CHECK_THROWS_AS(smc_integrate(problem_1d(), 0, 1), InvalidArgument);
  }
}

TEST_CASE("ais_evidence") {
  const EvidenceProblem p2 = gaussian_evidence_problem(Box({-3.0, -3.0}, {3.0, 3.0}), {0.3, -0.2}, 1.0);
  SUBCASE("ladder") {
    const auto b = geometric_ladder(64);
    CHECK(b.size() == 65);
    CHECK(b.front() == 0.0);
    CHECK(b[1] == doctest::Approx(1e-4));
    CHECK(b.back() == 1.0);
    CHECK(std::is_sorted(b.begin(), b.end()));
  }
  SUBCASE("constant likelihood") {
    const AISResult r = ais_evidence(constant_evidence_problem(Box({0.0}, {1.0}), 2.5), 16, 8, 2, 1);
    CHECK(r.log_z == doctest::Approx(std::log(2.5)).epsilon(1e-14));
    CHECK_FALSE(r.degenerate);
  }
  SUBCASE("2-D Gaussian within 0.1 nats") {
    std::vector<double> errs;
    for (int s = 0; s < 20; ++s) errs.push_back(std::abs(ais_evidence(p2, 64, 32, 5, 700 + s).log_z - *p2.log_z));
    MESSAGE("median |error| " << median(errs));
    CHECK(median(errs) < 0.1);
  }
  SUBCASE("more temperatures help") {
    std::vector<double> e8, e64;
    for (int s = 0; s < 20; ++s) {
      e8.push_back(std::abs(ais_evidence(p2, 8, 32, 5, 40 + s).log_z - *p2.log_z));
      e64.push_back(std::abs(ais_evidence(p2, 64, 32, 5, 40 + s).log_z - *p2.log_z));
    }
    MESSAGE("median |error| T=8 " << median(e8) << " T=64 " << median(e64));
    CHECK(median(e64) < median(e8));
  }
  SUBCASE("determinism and record") {
    const AISResult a = ais_evidence(p2, 16, 12, 3, 5);
    const AISResult b = ais_evidence(p2, 16, 12, 3, 5);
    CHECK(a.log_weights == b.log_weights);
    CHECK(a.log_z == b.log_z);
    CHECK(a.record.rows.size() == 5);  // 1, 2, 4, 8, 12 chains
    CHECK(a.record.budgets_increasing());
    CHECK(a.record.rows.back().estimate == a.log_z);
  }
  SUBCASE("degenerate weights are flagged") {
    const EvidenceProblem sharp = gaussian_evidence_problem(Box({-3.0}, {3.0}), {0.0}, 1e-3);
    const AISResult r = ais_evidence(sharp, 1, 16, 1, 3);
    CHECK(r.degenerate);
    CHECK(std::isfinite(r.log_z));
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS(ais_evidence(p2, 0, 4, 1, 1), InvalidArgument);
    CHECK_THROWS_AS(ais_evidence(p2, 4, 4, 0, 1), InvalidArgument);
  }
}
