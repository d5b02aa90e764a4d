#include "pnum/kernel.hpp"

#include "pnum/error.hpp"

#include <cmath>
#include <string>

namespace pnum {

Domain::Domain(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
    throw InvalidArgument("domain requires finite lo < hi");
  }
}

Kernel::Kernel(KernelFamily family, double p0, double p1, Domain domain)
    : family_(family), p0_(p0), p1_(p1), domain_(domain) {
  if (!(p0 > 0.0 && p1 > 0.0 && std::isfinite(p0) && std::isfinite(p1))) {
    throw InvalidArgument("kernel parameters must be positive and finite");
  }
  if (family == KernelFamily::LinearSpline && domain.width() > 6.0 * (1.0 + p1) / p1 * (1.0 + 1e-12)) {
    throw InvalidArgument("linear spline kernel is indefinite on a domain of width " +
                          std::to_string(domain.width()) + " with slope " + std::to_string(p1));
  }
}

Kernel Kernel::linear_spline(double c, double b, Domain domain) {
  return Kernel(KernelFamily::LinearSpline, c, b, domain);
}

Kernel Kernel::exp_quadratic(double theta, double lambda, Domain domain) {
  return Kernel(KernelFamily::ExpQuadratic, theta, lambda, domain);
}

Kernel Kernel::with_params(double p0, double p1) const { return Kernel(family_, p0, p1, domain_); }

double Kernel::eval_unchecked(double x, double xp) const {
  const double r = x - xp;
  switch (family_) {
    case KernelFamily::LinearSpline:
      return p0_ * (1.0 + p1_ - p1_ * std::abs(r) / 3.0);
    case KernelFamily::ExpQuadratic:
      return p0_ * p0_ * std::exp(-(r * r) / (p1_ * p1_));
  }
  return 0.0;
}

double Kernel::operator()(double x, double xp) const {
  if (std::isnan(x) || std::isnan(xp)) throw InvalidArgument("kernel argument is NaN");
  if (!domain_.contains(x) || !domain_.contains(xp)) {
    throw OutOfDomain("kernel argument outside [" + std::to_string(domain_.lo) + ", " +
                      std::to_string(domain_.hi) + "]");
  }
  return eval_unchecked(x, xp);
}

Eigen::MatrixXd Kernel::gram(std::span<const double> nodes) const {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = (*this)(nodes[i], nodes[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      k(i, j) = k(j, i) = eval_unchecked(nodes[i], nodes[j]);
    }
  }
  return k;
}

Eigen::VectorXd Kernel::cross(double x, std::span<const double> nodes) const {
  Eigen::VectorXd k(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) k[static_cast<Eigen::Index>(i)] = (*this)(x, nodes[i]);
  return k;
}

double kernel_eval(const Kernel& kernel, double x, double xp) { return kernel(x, xp); }

}  // namespace pnum
