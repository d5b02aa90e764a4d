#pragma once

#include "pnum/kernel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace pnum {

/// Cholesky factor of a jittered Gram matrix.
///
/// Jitter starts at 1e-10 * mean(diag) and is escalated by 10x up to
/// 1e-6 * mean(diag); beyond that SingularGram is thrown. Solves apply two
/// steps of iterative refinement against the unjittered matrix, which
/// removes the jitter bias on well-conditioned directions.
class GramFactor {
 public:
  explicit GramFactor(Eigen::MatrixXd gram);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  /// log det of the jittered matrix.
  double log_det() const;
  double jitter() const { return jitter_; }
  Eigen::Index size() const { return gram_.rows(); }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::MatrixXd& lower() const { return lower_; }

 private:
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd lower_;
  double jitter_ = 0.0;
};

/// Noise-free GP posterior over a one-dimensional function.
class GPPosterior {
 public:
  GPPosterior(Kernel kernel, std::vector<double> nodes, std::vector<double> values);

  double mean(double x) const;
  double variance(double x) const;

  const Kernel& kernel() const { return kernel_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const GramFactor& factor() const { return factor_; }

 private:
  Kernel kernel_;
  std::vector<double> nodes_;
  std::vector<double> values_;
  GramFactor factor_;
  Eigen::VectorXd weights_;
};

/// Throws DuplicateNode when two nodes are closer than 1e-12 of the domain
/// width, OutOfDomain for nodes outside it.
void check_nodes(const Kernel& kernel, std::span<const double> nodes);

GPPosterior gp_condition(const Kernel& kernel, std::span<const double> nodes,
                         std::span<const double> values);

/// Gaussian log marginal likelihood of noise-free data under a zero-mean GP.
double log_marginal_likelihood(const Kernel& kernel, std::span<const double> nodes,
                               std::span<const double> values);

struct ParamBounds {
  double p0_min = 1e-3;
  double p0_max = 1e3;
  double p1_min = 1e-2;
  double p1_max = 1e2;
};

struct FitOptions {
  int grid_points = 16;
  int max_sweeps = 50;
  double rel_tol = 1e-4;
  bool local_search = true;
};

struct FitResult {
  Kernel kernel;
  double log_likelihood;
  double grid_log_likelihood;  ///< best value seen on the grid alone
  bool degenerate = false;     ///< values identical; scale unidentifiable
};

/// Maximises the log marginal likelihood over a log-spaced grid, then
/// refines by coordinate-wise golden-section search in log-parameter space.
/// `family_template` supplies the family and domain.
FitResult fit_hyperparameters(const Kernel& family_template, std::span<const double> nodes,
                              std::span<const double> values, const ParamBounds& bounds = {},
                              const FitOptions& options = {});

/// Draws zero-mean Gaussian paths with a fixed Gram matrix. The Cholesky
/// factor is computed once so repeated draws on a fine grid stay cheap.
class PathSampler {
 public:
  PathSampler(const Kernel& kernel, std::span<const double> grid);

  std::vector<double> draw(std::uint64_t seed) const;
  const std::vector<double>& grid() const { return grid_; }

 private:
  std::vector<double> grid_;
  GramFactor factor_;
};

std::vector<double> sample_path(const Kernel& kernel, std::span<const double> grid,
                                std::uint64_t seed);

/// Standard normal draws from a seeded 64-bit Mersenne twister.
Eigen::VectorXd standard_normal(Eigen::Index n, std::uint64_t seed);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& symmetric);

}  // namespace pnum
