#pragma once

#include "pnum/quadrature.hpp"
#include "pnum/record.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace pnum {

/// Axis-aligned box [lo_d, hi_d]^D, D <= 4.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  Box() = default;
  Box(std::vector<double> lo, std::vector<double> hi);
  explicit Box(const Domain& d) : Box({d.lo}, {d.hi}) {}

  std::size_t dim() const { return lo.size(); }
  double volume() const;
  double width(std::size_t d) const { return hi[d] - lo[d]; }
};

/// Tensor-product exponentiated quadratic kernel on a box:
/// k(x, x') = theta^2 prod_d exp(-(x_d - x'_d)^2 / lambda_d^2).
struct ProductKernel {
  double theta = 1.0;
  std::vector<double> lambda;

  double operator()(std::span<const double> x, std::span<const double> xp) const;
  Eigen::MatrixXd gram(const std::vector<std::vector<double>>& pts) const;
};

using Integrand = std::function<double(std::span<const double>)>;

struct WarpedOptions {
  int candidates = 512;       ///< per-iteration scan size (equidistant in 1-D)
  double offset_fraction = 0.8;  ///< alpha_w = fraction * min observed f
  int quadrature_panels = 16;    ///< Gauss-Legendre panels per dimension
  int quadrature_order = 8;
  double oracle = 0.0;        ///< true integral for the record, if known
  bool has_oracle = false;
  bool record_log_error = false;  ///< record |log mean - log oracle| instead
};

struct WarpedResult {
  QuadratureEstimate estimate;
  ConvergenceRecord record;
  std::vector<std::vector<double>> nodes;
  double offset = 0.0;
  ProductKernel kernel;
};

/// Square-root warped active Bayesian quadrature for strictly positive
/// integrands. f = alpha + g^2 / 2 with a GP on g; the moments of f follow
/// from linearising around the posterior mean of g. Nodes are chosen by
/// maximising the linearised predictive variance of f over a scan.
/// Throws NonPositiveEvaluation when f(x) <= 0.
WarpedResult warped_bq_integrate(const Integrand& f, const Box& box, int budget, std::uint64_t seed,
                                 const WarpedOptions& options = {});

WarpedResult warped_bq_integrate(const std::function<double(double)>& f, const Domain& domain, int budget,
                                 std::uint64_t seed, const WarpedOptions& options = {});

/// Composite Gauss-Legendre rule on [lo, hi].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_legendre(double lo, double hi, int panels, int order);

}  // namespace pnum
