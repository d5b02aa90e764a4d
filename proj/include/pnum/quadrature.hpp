#pragma once

#include "pnum/gp.hpp"
#include "pnum/kernel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace pnum {

/// Posterior over an integral F = int f(x) dx.
struct QuadratureEstimate {
  double mean = 0.0;
  double variance = 0.0;
  int n_evals = 0;
  bool clamped = false;  ///< variance was slightly negative and set to zero

  double stddev() const;
};

/// Composite trapezoid rule on sorted nodes. Throws UnsortedNodes.
double trapezoid(std::span<const double> nodes, std::span<const double> values);

/// Closed-form kernel mean embeddings on the kernel's domain:
/// at(x) = int k(t, x) dt and total = int int k(t, t') dt dt'.
class KernelEmbeddings {
 public:
  explicit KernelEmbeddings(Kernel kernel);

  double at(double x) const;
  double total() const { return total_; }
  const Kernel& kernel() const { return kernel_; }

 private:
  Kernel kernel_;
  double total_;
};

KernelEmbeddings kernel_embeddings(const Kernel& kernel);

/// Accumulated Bayesian-quadrature data for a fixed kernel.
class BQState {
 public:
  explicit BQState(Kernel kernel);
  BQState(Kernel kernel, std::span<const double> nodes, std::span<const double> values);

  /// Appends one evaluation and refactorises the Gram matrix.
  void add(double x, double y);

  const Kernel& kernel() const { return embeddings_.kernel(); }
  const KernelEmbeddings& embeddings() const { return embeddings_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  /// z_i = int k(t, x_i) dt, one entry per node.
  const Eigen::VectorXd& z() const { return z_; }
  double prior_variance() const { return embeddings_.total(); }

  /// Posterior variance of F if `x` were added; independent of f(x).
  double variance_if_added(double x) const;

 private:
  friend QuadratureEstimate bq_posterior(const BQState& state);

  void refactor();

  KernelEmbeddings embeddings_;
  std::vector<double> nodes_;
  std::vector<double> values_;
  Eigen::VectorXd z_;
  std::optional<GramFactor> factor_;
};

QuadratureEstimate bq_posterior(const BQState& state);

/// Convenience: condition on (nodes, values) and integrate.
QuadratureEstimate bq_integrate(const Kernel& kernel, std::span<const double> nodes,
                                std::span<const double> values);

/// N equidistant nodes including both endpoints; N >= 2.
std::vector<double> select_nodes_grid(const Domain& domain, int n);

/// The candidate minimising the posterior integral variance after adding it.
/// Variances within 1e-12 of the prior variance count as ties, resolved to
/// the smallest abscissa. Throws NoCandidates.
double select_node_active(const BQState& state, std::span<const double> candidates);

/// Default scan: 512 equidistant points minus those already in the state.
double select_node_active(const BQState& state);

}  // namespace pnum
