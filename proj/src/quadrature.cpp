#include "pnum/quadrature.hpp"

#include "pnum/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pnum {

namespace {

constexpr double kClampThreshold = 1e-8;
constexpr double kTieTolerance = 1e-12;
constexpr int kDefaultCandidates = 512;

double spline_embedding(const Kernel& k, double x) {
  const Domain& d = k.domain();
  const double c = k.scale(), b = k.slope(), w = d.width();
  const double left = x - d.lo, right = d.hi - x;
  return c * (1.0 + b) * w - c * b / 3.0 * 0.5 * (left * left + right * right);
}

double spline_total(const Kernel& k) {
  const double c = k.scale(), b = k.slope(), w = k.domain().width();
  // int int |t - t'| over a square of side w is w^3 / 3.
  return c * (1.0 + b) * w * w - c * b / 3.0 * (w * w * w / 3.0);
}

double eq_embedding(const Kernel& k, double x) {
  const Domain& d = k.domain();
  const double th = k.output_scale(), l = k.length_scale();
  return th * th * l * std::sqrt(std::numbers::pi) / 2.0 * (std::erf((d.hi - x) / l) - std::erf((d.lo - x) / l));
}

double eq_total(const Kernel& k) {
  const double th = k.output_scale(), l = k.length_scale(), w = k.domain().width();
  const double r = w / l;
  return th * th * (l * std::sqrt(std::numbers::pi) * w * std::erf(r) + l * l * std::expm1(-r * r));
}

}  // namespace

double QuadratureEstimate::stddev() const { return std::sqrt(std::max(variance, 0.0)); }

double trapezoid(std::span<const double> nodes, std::span<const double> values) {
  if (nodes.size() != values.size()) throw DimensionMismatch("trapezoid: nodes and values differ in length");
  if (nodes.size() < 2) throw InvalidArgument("trapezoid needs at least two nodes");
  double sum = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (!(nodes[i] > nodes[i - 1])) throw UnsortedNodes("trapezoid nodes must be strictly increasing");
    sum += 0.5 * (values[i] + values[i - 1]) * (nodes[i] - nodes[i - 1]);
  }
  return sum;
}

KernelEmbeddings::KernelEmbeddings(Kernel kernel)
    : kernel_(std::move(kernel)),
      total_(kernel_.family() == KernelFamily::LinearSpline ? spline_total(kernel_) : eq_total(kernel_)) {}

double KernelEmbeddings::at(double x) const {
  if (!kernel_.domain().contains(x)) throw OutOfDomain("embedding evaluated outside the domain");
  return kernel_.family() == KernelFamily::LinearSpline ? spline_embedding(kernel_, x) : eq_embedding(kernel_, x);
}

KernelEmbeddings kernel_embeddings(const Kernel& kernel) { return KernelEmbeddings(kernel); }

BQState::BQState(Kernel kernel) : embeddings_(std::move(kernel)), z_(0) {}

BQState::BQState(Kernel kernel, std::span<const double> nodes, std::span<const double> values)
    : embeddings_(std::move(kernel)), nodes_(nodes.begin(), nodes.end()), values_(values.begin(), values.end()) {
  if (nodes.size() != values.size()) throw DimensionMismatch("BQState: nodes and values differ in length");
  check_nodes(embeddings_.kernel(), nodes_);
  refactor();
}

void BQState::add(double x, double y) {
  nodes_.push_back(x);
  values_.push_back(y);
  try {
    check_nodes(embeddings_.kernel(), nodes_);
    refactor();
  } catch (...) {
    nodes_.pop_back();
    values_.pop_back();
    throw;
  }
}

void BQState::refactor() {
  z_.resize(static_cast<Eigen::Index>(nodes_.size()));
  for (std::size_t i = 0; i < nodes_.size(); ++i) z_[static_cast<Eigen::Index>(i)] = embeddings_.at(nodes_[i]);
  if (nodes_.empty()) {
    factor_.reset();
  } else {
    factor_.emplace(embeddings_.kernel().gram(nodes_));
  }
}

double BQState::variance_if_added(double x) const {
  const Kernel& k = kernel();
  const double kxx = k(x, x);
  const double zx = embeddings_.at(x);
  if (nodes_.empty()) return embeddings_.total() - zx * zx / kxx;
  const Eigen::VectorXd kx = k.cross(x, nodes_);
  const Eigen::VectorXd kinv_kx = factor_->solve(kx);
  const double current = embeddings_.total() - z_.dot(factor_->solve(z_));
  const double schur = kxx - kx.dot(kinv_kx);
  if (schur <= 1e-14 * kxx) return current;
  const double u = zx - z_.dot(kinv_kx);
  return current - u * u / schur;
}

QuadratureEstimate bq_posterior(const BQState& state) {
  QuadratureEstimate est;
  est.n_evals = static_cast<int>(state.nodes_.size());
  const double prior = state.embeddings_.total();
  if (state.nodes_.empty()) {
    est.variance = prior;
    return est;
  }
  const Eigen::Map<const Eigen::VectorXd> y(state.values_.data(), static_cast<Eigen::Index>(state.values_.size()));
  est.mean = state.z_.dot(state.factor_->solve(Eigen::VectorXd(y)));
  double var = prior - state.z_.dot(state.factor_->solve(state.z_));
  if (var < 0.0) {
    if (var < -kClampThreshold * prior) throw NumericalError("integral posterior variance is negative beyond tolerance");
    var = 0.0;
    est.clamped = true;
  }
  est.variance = var;
  return est;
}

QuadratureEstimate bq_integrate(const Kernel& kernel, std::span<const double> nodes, std::span<const double> values) {
  return bq_posterior(BQState(kernel, nodes, values));
}

std::vector<double> select_nodes_grid(const Domain& domain, int n) {
  if (n < 2) throw InvalidArgument("grid needs at least two nodes");
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = domain.lo + domain.width() * i / (n - 1);
  x.back() = domain.hi;
  return x;
}

double select_node_active(const BQState& state, std::span<const double> candidates) {
  if (candidates.empty()) throw NoCandidates("active selection needs at least one candidate");
  std::vector<double> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  const double tie = kTieTolerance * state.prior_variance();
  double best_x = sorted.front();
  double best_v = state.variance_if_added(best_x);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double v = state.variance_if_added(sorted[i]);
    if (v < best_v - tie) {
      best_v = v;
      best_x = sorted[i];
    }
  }
  return best_x;
}

double select_node_active(const BQState& state) {
  const Domain& d = state.kernel().domain();
  const double tol = 1e-12 * d.width();
  std::vector<double> candidates;
  for (double x : select_nodes_grid(d, kDefaultCandidates)) {
    const bool taken = std::any_of(state.nodes().begin(), state.nodes().end(),
                                   [&](double n) { return std::abs(n - x) <= tol; });
    if (!taken) candidates.push_back(x);
  }
  return select_node_active(state, candidates);
}

}  // namespace pnum
