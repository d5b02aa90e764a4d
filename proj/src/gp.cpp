#include "pnum/gp.hpp"

#include "pnum/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace pnum {

namespace {

constexpr double kInitialJitter = 1e-10;
constexpr double kMaxJitter = 1e-6;
constexpr int kRefinementSteps = 2;

}  // namespace

GramFactor::GramFactor(Eigen::MatrixXd gram) : gram_(std::move(gram)) {
  const Eigen::Index n = gram_.rows();
  if (n == 0 || gram_.cols() != n) throw DimensionMismatch("Gram matrix must be square and non-empty");
  const double mean_diag = gram_.diagonal().mean();
  if (!(mean_diag > 0.0) || !gram_.allFinite()) throw SingularGram("Gram matrix has non-positive diagonal");
  for (double rel = kInitialJitter; rel <= kMaxJitter * 1.0000001; rel *= 10.0) {
    Eigen::MatrixXd jittered = gram_;
    jittered.diagonal().array() += rel * mean_diag;
    Eigen::LLT<Eigen::MatrixXd> llt(jittered);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
      lower_ = llt.matrixL();
      jitter_ = rel * mean_diag;
      return;
    }
  }
  throw SingularGram("Gram factorisation failed at maximum jitter");
}

Eigen::MatrixXd GramFactor::solve(const Eigen::MatrixXd& rhs) const {
  auto base = [&](const Eigen::MatrixXd& r) {
    Eigen::MatrixXd y = lower_.triangularView<Eigen::Lower>().solve(r);
    return Eigen::MatrixXd(lower_.transpose().triangularView<Eigen::Upper>().solve(y));
  };
  Eigen::MatrixXd x = base(rhs);
  for (int step = 0; step < kRefinementSteps; ++step) x += base(rhs - gram_ * x);
  return x;
}

Eigen::VectorXd GramFactor::solve(const Eigen::VectorXd& rhs) const {
  return solve(Eigen::MatrixXd(rhs)).col(0);
}

double GramFactor::log_det() const { return 2.0 * lower_.diagonal().array().log().sum(); }

void check_nodes(const Kernel& kernel, std::span<const double> nodes) {
  const double tol = 1e-12 * kernel.domain().width();
  std::vector<double> sorted(nodes.begin(), nodes.end());
  for (double x : sorted) {
    if (std::isnan(x)) throw InvalidArgument("node is NaN");
    if (!kernel.domain().contains(x)) throw OutOfDomain("node outside kernel domain");
  }
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] - sorted[i - 1] <= tol) throw DuplicateNode("duplicate node at " + std::to_string(sorted[i]));
  }
}

GPPosterior::GPPosterior(Kernel kernel, std::vector<double> nodes, std::vector<double> values)
    : kernel_(std::move(kernel)),
      nodes_(std::move(nodes)),
      values_(std::move(values)),
      factor_(kernel_.gram(nodes_)) {
  weights_ = factor_.solve(Eigen::Map<const Eigen::VectorXd>(values_.data(), static_cast<Eigen::Index>(values_.size())).eval());
}

double GPPosterior::mean(double x) const { return kernel_.cross(x, nodes_).dot(weights_); }

double GPPosterior::variance(double x) const {
  const Eigen::VectorXd k = kernel_.cross(x, nodes_);
  return kernel_(x, x) - k.dot(factor_.solve(k));
}

GPPosterior gp_condition(const Kernel& kernel, std::span<const double> nodes, std::span<const double> values) {
  if (nodes.empty() || nodes.size() != values.size()) {
    throw DimensionMismatch("gp_condition needs equally many (>= 1) nodes and values");
  }
  check_nodes(kernel, nodes);
  return GPPosterior(kernel, {nodes.begin(), nodes.end()}, {values.begin(), values.end()});
}

double log_marginal_likelihood(const Kernel& kernel, std::span<const double> nodes, std::span<const double> values) {
  const GramFactor factor(kernel.gram(nodes));
  const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
  const Eigen::VectorXd alpha = factor.lower().triangularView<Eigen::Lower>().solve(y);
  const double n = static_cast<double>(values.size());
  return -0.5 * alpha.squaredNorm() - 0.5 * factor.log_det() - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

namespace {

double safe_lml(const Kernel& family, double p0, double p1, std::span<const double> nodes,
                std::span<const double> values) {
  try {
    return log_marginal_likelihood(family.with_params(p0, p1), nodes, values);
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

// Maximises g on [a, b] (log-parameter), returns the argmax.
template <class F>
double golden_max(F&& g, double a, double b, int iterations = 40) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double gc = g(c);
  double gd = g(d);
  for (int i = 0; i < iterations; ++i) {
    if (gc >= gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - inv_phi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + inv_phi * (b - a);
      gd = g(d);
    }
  }
  return gc >= gd ? c : d;
}

}  // namespace

FitResult fit_hyperparameters(const Kernel& family_template, std::span<const double> nodes,
                              std::span<const double> values, const ParamBounds& bounds,
                              const FitOptions& options) {
  if (nodes.size() < 3 || nodes.size() != values.size()) {
    throw InvalidArgument("fit_hyperparameters needs at least 3 nodes with matching values");
  }
  if (!(bounds.p0_min > 0 && bounds.p0_min < bounds.p0_max && bounds.p1_min > 0 && bounds.p1_min < bounds.p1_max)) {
    throw InvalidArgument("parameter bounds must be positive and ordered");
  }
  check_nodes(family_template, nodes);

  double p1_max = bounds.p1_max;
  if (family_template.family() == KernelFamily::LinearSpline) {
    const double w = family_template.domain().width();
    if (w > 6.0) p1_max = std::min(p1_max, 6.0 / (w - 6.0));
    if (p1_max <= bounds.p1_min) throw InvalidArgument("slope bounds admit no valid spline kernel on this domain");
  }

  const bool degenerate =
      std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
  if (degenerate) {
    const Kernel k = family_template.with_params(bounds.p0_min, std::sqrt(bounds.p1_min * p1_max));
    const double ll = safe_lml(k, k.output_scale(), k.length_scale(), nodes, values);
    return FitResult{k, ll, ll, true};
  }

  const double l0a = std::log(bounds.p0_min), l0b = std::log(bounds.p0_max);
  const double l1a = std::log(bounds.p1_min), l1b = std::log(p1_max);
  const int g = std::max(options.grid_points, 2);
  double best0 = l0a, best1 = l1a;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < g; ++i) {
    const double a0 = l0a + (l0b - l0a) * i / (g - 1);
    for (int j = 0; j < g; ++j) {
      const double a1 = l1a + (l1b - l1a) * j / (g - 1);
      const double ll = safe_lml(family_template, std::exp(a0), std::exp(a1), nodes, values);
      if (ll > best) {
        best = ll;
        best0 = a0;
        best1 = a1;
      }
    }
  }
  const double grid_best = best;

  if (options.local_search) {
    const double step0 = (l0b - l0a) / (g - 1);
    const double step1 = (l1b - l1a) / (g - 1);
    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
      const double prev0 = best0, prev1 = best1;
      auto g0 = [&](double a) { return safe_lml(family_template, std::exp(a), std::exp(best1), nodes, values); };
      double c0 = golden_max(g0, std::max(l0a, best0 - step0), std::min(l0b, best0 + step0));
      if (double v = g0(c0); v > best) {
        best = v;
        best0 = c0;
      }
      auto g1 = [&](double a) { return safe_lml(family_template, std::exp(best0), std::exp(a), nodes, values); };
      double c1 = golden_max(g1, std::max(l1a, best1 - step1), std::min(l1b, best1 + step1));
      if (double v = g1(c1); v > best) {
        best = v;
        best1 = c1;
      }
      const double change = std::max(std::abs(std::exp(best0 - prev0) - 1.0), std::abs(std::exp(best1 - prev1) - 1.0));
      if (change < options.rel_tol) break;
    }
  }
  return FitResult{family_template.with_params(std::exp(best0), std::exp(best1)), best, grid_best, false};
}

Eigen::VectorXd standard_normal(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

PathSampler::PathSampler(const Kernel& kernel, std::span<const double> grid)
    : grid_(grid.begin(), grid.end()), factor_([&] {
        if (grid.empty()) throw InvalidArgument("sample grid is empty");
        if (!std::is_sorted(grid.begin(), grid.end())) throw UnsortedNodes("sample grid must be sorted");
        check_nodes(kernel, grid);
        return kernel.gram(grid);
      }()) {}

std::vector<double> PathSampler::draw(std::uint64_t seed) const {
  const Eigen::VectorXd f = factor_.lower() * standard_normal(factor_.size(), seed);
  return {f.data(), f.data() + f.size()};
}

std::vector<double> sample_path(const Kernel& kernel, std::span<const double> grid, std::uint64_t seed) {
  return PathSampler(kernel, grid).draw(seed);
}

double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace pnum
