#pragma once

#include <Eigen/Dense>

#include <span>

namespace pnum {

/// Closed interval [lo, hi] with lo < hi.
struct Domain {
  double lo = 0.0;
  double hi = 1.0;

  Domain() = default;
  Domain(double lo, double hi);

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

enum class KernelFamily { LinearSpline, ExpQuadratic };

/// Stationary covariance function on a bounded interval.
///
/// LinearSpline: k(x, x') = c (1 + b - b |x - x'| / 3).
/// ExpQuadratic: k(x, x') = theta^2 exp(-(x - x')^2 / lambda^2).
///
/// The spline form is positive semi-definite only while the interval width
/// does not exceed 6 (1 + b) / b, which the constructor enforces.
class Kernel {
 public:
  static Kernel linear_spline(double c, double b, Domain domain);
  static Kernel exp_quadratic(double theta, double lambda, Domain domain);

  KernelFamily family() const { return family_; }
  const Domain& domain() const { return domain_; }

  // LinearSpline parameters.
  double scale() const { return p0_; }
  double slope() const { return p1_; }
  // ExpQuadratic parameters.
  double output_scale() const { return p0_; }
  double length_scale() const { return p1_; }

  /// Throws OutOfDomain for arguments outside the interval and
  /// InvalidArgument for NaN.
  double operator()(double x, double xp) const;

  /// Covariance without the domain check; callers guarantee membership.
  double eval_unchecked(double x, double xp) const;

  double prior_variance() const { return eval_unchecked(domain_.lo, domain_.lo); }

  Eigen::MatrixXd gram(std::span<const double> nodes) const;
  Eigen::VectorXd cross(double x, std::span<const double> nodes) const;

  /// Same family and parameters on a different interval.
  Kernel with_params(double p0, double p1) const;

 private:
  Kernel(KernelFamily family, double p0, double p1, Domain domain);

  KernelFamily family_;
  double p0_;
  double p1_;
  Domain domain_;
};

double kernel_eval(const Kernel& kernel, double x, double xp);

}  // namespace pnum
