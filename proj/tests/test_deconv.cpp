#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pnum/deconv.hpp"
#include "pnum/error.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

using namespace pnum;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DeconvConfig config(int size, double drift, double noise = 0.0) {
  DeconvConfig c;
  c.size = size;
  c.drift = drift;
  c.noise = noise;
  return c;
}

// Direct convolution sum, written independently of the matrix builder.
VectorXd convolve(const VectorXd& taps, const VectorXd& v) {
  const int r = static_cast<int>(taps.size() / 2);
  VectorXd out = VectorXd::Zero(v.size());
  for (int i = 0; i < v.size(); ++i) {
    for (int j = 0; j < v.size(); ++j) {
      if (std::abs(i - j) <= r) out[i] += taps[i - j + r] * v[j];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("blur and convolution building blocks") {
  const VectorXd taps = blur_taps({0.3, 1.5}, 4);
  CHECK(taps.size() == 9);
  CHECK(taps.sum() == doctest::Approx(1.0));
  const MatrixXd x = convolution_matrix(taps, 20);
  VectorXd v = VectorXd::LinSpaced(20, -1.0, 2.0).array().sin();
  CHECK((x * v - convolve(taps, v)).norm() < 1e-14);
  const MatrixXd a = normal_operator(x, 1e-3);
  const double eps = 1e-3 * (x.transpose() * x).trace() / 20;
  CHECK((a - x.transpose() * x - eps * MatrixXd::Identity(20, 20)).norm() < 1e-14);
  CHECK_THROWS_AS(blur_taps({0.0, -1.0}, 3), InvalidArgument);
}

TEST_CASE("generate_sequence") {
  SUBCASE("zero drift repeats the operator") {
    const DeconvSequence s = generate_sequence(config(32, 0.0), 1);
    for (std::size_t t = 1; t < s.matrices.size(); ++t) CHECK((s.matrices[t] - s.matrices[0]).norm() == 0.0);
  }
  SUBCASE("drift bound holds") {
    const DeconvSequence s = generate_sequence(config(32, 0.02), 2);
    REQUIRE(s.problems.size() == 20);
    double largest = 0.0;
    for (std::size_t t = 1; t < s.matrices.size(); ++t) {
      const double d = (s.matrices[t] - s.matrices[t - 1]).norm() / s.matrices[t - 1].norm();
      CHECK(d <= 0.02 + 1e-12);
      largest = std::max(largest, d);
    }
    CHECK(largest > 0.01);
  }
  SUBCASE("noise-free right-hand sides are solved by the reference") {
    const DeconvSequence s = generate_sequence(config(32, 0.02), 3);
    for (std::size_t t = 0; t < s.problems.size(); ++t) {
      CHECK((s.problems[t].op(s.reference) - s.problems[t].rhs).norm() <= 1e-14 * s.problems[t].rhs.norm());
    }
    const DeconvSequence noisy = generate_sequence(config(32, 0.02, 0.1), 3);
    CHECK((noisy.problems[0].op(noisy.reference) - noisy.problems[0].rhs).norm() > 1e-6);
  }
  SUBCASE("operators are SPD") {
    const DeconvSequence s = generate_sequence(config(48, 0.05, 0.01), 4);
    for (const MatrixXd& a : s.matrices) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
  }
  SUBCASE("invalid configurations") {
    CHECK_THROWS_AS(generate_sequence(config(32, 0.2), 1), InvalidArgument);
    DeconvConfig c = config(32, 0.02);
    c.length = 1;
    CHECK_THROWS_AS(generate_sequence(c, 1), InvalidArgument);
  }
  SUBCASE("seeded") {
    const DeconvSequence a = generate_sequence(config(32, 0.02, 0.1), 9);
    const DeconvSequence b = generate_sequence(config(32, 0.02, 0.1), 9);
    CHECK(a.problems.back().rhs == b.problems.back().rhs);
  }
}

TEST_CASE("run_recycling_benchmark") {
  const double tol = 1e-8;
  SUBCASE("zero drift") {
    const DeconvSequence s = generate_sequence(config(64, 0.0), 11);
    const RecyclingReport r = run_recycling_benchmark(s.problems, -1, tol);
    CHECK(r.total_matvecs("warm") <= r.total_matvecs("cold"));
    const auto its = r.iterations("warm");
    for (std::size_t t = 1; t < its.size(); ++t) CHECK(its[t] <= 2);
  }
  SUBCASE("drift 0.02, twenty problems") {
    const DeconvSequence s = generate_sequence(config(64, 0.02), 12);
    const RecyclingReport r = run_recycling_benchmark(s.problems, -1, tol);
    const double warm = r.mean_initial_residual("warm", 5), cold = r.mean_initial_residual("cold", 5);
    MESSAGE("initial residual warm/cold " << warm / cold << ", matvecs warm " << r.total_matvecs("warm") << " cold "
                                          << r.total_matvecs("cold"));
    CHECK(warm * 3.0 <= cold);
    CHECK(r.total_matvecs("warm") < r.total_matvecs("cold"));
  }
  SUBCASE("rank zero is cold start") {
    const DeconvSequence s = generate_sequence(config(48, 0.02), 13);
    const RecyclingReport r = run_recycling_benchmark(s.problems, 0, tol);
    CHECK(r.iterations("warm") == r.iterations("cold"));
  }
  SUBCASE("recycling never costs more than 5% extra") {
    for (int seed = 0; seed < 8; ++seed) {
      for (double drift : {0.0, 0.01, 0.03, 0.05}) {
        const DeconvSequence s = generate_sequence(config(40, drift, seed % 2 ? 0.05 : 0.0), 100 + seed);
        const RecyclingReport r = run_recycling_benchmark(s.problems, -1, tol);
        CHECK(r.total_matvecs("warm") <= 1.05 * r.total_matvecs("cold"));
      }
    }
  }
  SUBCASE("csv layout") {
    const DeconvSequence s = generate_sequence(config(16, 0.02), 14);
    const RecyclingReport r = run_recycling_benchmark(s.problems, 8, tol);
    std::ostringstream out;
    r.write_csv(out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "variant,problem_index,iterations,initial_residual,final_residual,matvecs");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 40);
  }
}
