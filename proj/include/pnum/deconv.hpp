#pragma once

#include "pnum/linalg.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace pnum {

/// Synthetic 1-D deconvolution sequence: a fixed signal blurred by Gaussian
/// kernels whose centre and width follow a seeded random walk.
struct DeconvConfig {
  int size = 64;             // signal length N
  int length = 20;           // number of systems in the sequence
  double drift = 0.02;       // bound on |A_{t+1} - A_t|_F / |A_t|_F
  double noise = 0.0;        // std of white noise added to the blurred signal
  double blur_width = 2.0;   // initial kernel standard deviation in samples
  int kernel_radius = 6;     // kernel support is [-radius, radius]
  double epsilon_factor = 1e-3;  // epsilon = factor * trace(X^T X) / N
};

struct BlurParams {
  double center = 0.0;
  double width = 2.0;
};

struct DeconvSequence {
  std::vector<LinearProblem> problems;
  std::vector<Eigen::MatrixXd> matrices;  // A_t, kept for inspection
  std::vector<BlurParams> kernels;
  Eigen::VectorXd reference;              // ground-truth signal x
};

/// Normalized Gaussian blur taps at offsets -radius..radius.
Eigen::VectorXd blur_taps(const BlurParams& p, int radius);
/// Zero-boundary convolution matrix (X v)_i = sum_k f_k v_{i-k}.
Eigen::MatrixXd convolution_matrix(const Eigen::VectorXd& taps, int size);
/// A = X^T X + epsilon I with epsilon = factor * trace(X^T X) / N.
Eigen::MatrixXd normal_operator(const Eigen::MatrixXd& x, double epsilon_factor);

/// rhs_t = A_t x + X_t^T n_t, so a noise level of zero makes x the exact solution.
DeconvSequence generate_sequence(const DeconvConfig& config, std::uint64_t seed);

struct RecyclingRow {
  std::string variant;  // "cold" or "warm"
  int problem_index = 0;
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  std::int64_t matvecs = 0;
};

struct RecyclingReport {
  std::vector<RecyclingRow> rows;

  std::int64_t total_matvecs(const std::string& variant) const;
  /// Mean initial residual over problems with index >= first (1-based).
  double mean_initial_residual(const std::string& variant, int first) const;
  std::vector<int> iterations(const std::string& variant) const;
  void write_csv(std::ostream& out) const;
};

/// Runs the sequence cold (every solve from x = 0 and H0 = I) and warm
/// (belief recycling with the given rank) and tabulates both.
RecyclingReport run_recycling_benchmark(const std::vector<LinearProblem>& sequence, int rank, double tol);

}  // namespace pnum
