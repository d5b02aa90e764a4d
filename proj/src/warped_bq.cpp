#include "pnum/warped_bq.hpp"

#include "pnum/error.hpp"
#include "pnum/gp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

namespace pnum {

Box::Box(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.empty() || lo.size() != hi.size()) throw InvalidArgument("box bounds must be non-empty and equally sized");
  for (std::size_t d = 0; d < lo.size(); ++d) {
    if (!(lo[d] < hi[d])) throw InvalidArgument("box requires lo < hi in every dimension");
  }
}

double Box::volume() const {
  double v = 1.0;
  for (std::size_t d = 0; d < dim(); ++d) v *= width(d);
  return v;
}

double ProductKernel::operator()(std::span<const double> x, std::span<const double> xp) const {
  double s = 0.0;
  for (std::size_t d = 0; d < lambda.size(); ++d) {
    const double r = (x[d] - xp[d]) / lambda[d];
    s += r * r;
  }
  return theta * theta * std::exp(-s);
}

Eigen::MatrixXd ProductKernel::gram(const std::vector<std::vector<double>>& pts) const {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = (*this)(pts[i], pts[j]);
  }
  return k;
}

QuadratureRule gauss_legendre(double lo, double hi, int panels, int order) {
  if (panels < 1 || order < 1) throw InvalidArgument("Gauss-Legendre rule needs positive panels and order");
  // Golub-Welsch on the Jacobi matrix of the Legendre polynomials.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    const double beta = i / std::sqrt(4.0 * i * i - 1.0);
    jacobi(i, i - 1) = jacobi(i - 1, i) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * h;
    for (int i = 0; i < order; ++i) {
      const double v0 = es.eigenvectors()(0, i);
      rule.nodes.push_back(a + 0.5 * h * (es.eigenvalues()[i] + 1.0));
      rule.weights.push_back(h * v0 * v0);  // 2 v0^2 on [-1, 1], scaled by h / 2
    }
  }
  return rule;
}

namespace {

using Points = std::vector<std::vector<double>>;

struct WarpModel {
  double offset = 0.0;
  ProductKernel kernel;
  Eigen::VectorXd weights;  // K^{-1} g
  std::optional<GramFactor> factor;
};

// Profile log marginal likelihood of g for relative length scale rho; the
// output scale is replaced by its closed-form maximiser.
double profile_lml(const Points& pts, const Eigen::VectorXd& g, const Box& box, double rho, double* theta_sq) {
  ProductKernel unit{1.0, {}};
  for (std::size_t d = 0; d < box.dim(); ++d) unit.lambda.push_back(rho * box.width(d));
  try {
    const GramFactor f(unit.gram(pts));
    const double n = static_cast<double>(g.size());
    const double quad = g.dot(f.solve(g));
    const double s = std::max(quad / n, 1e-300);
    if (theta_sq) *theta_sq = s;
    return -0.5 * n * std::log(s) - 0.5 * f.log_det();
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

WarpModel fit_model(const Points& pts, const std::vector<double>& fvals, const Box& box, double offset_fraction) {
  WarpModel model;
  model.offset = offset_fraction * *std::min_element(fvals.begin(), fvals.end());
  const auto n = static_cast<Eigen::Index>(fvals.size());
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) g[i] = std::sqrt(2.0 * (fvals[static_cast<std::size_t>(i)] - model.offset));

  const double la = std::log(0.02), lb = std::log(2.0);
  const int grid = 16;
  double best_l = la;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double l = la + (lb - la) * i / (grid - 1);
    const double v = profile_lml(pts, g, box, std::exp(l), nullptr);
    if (v > best) {
      best = v;
      best_l = l;
    }
  }
  // golden-section refinement within one grid cell either side
  const double step = (lb - la) / (grid - 1);
  double a = std::max(la, best_l - step), b = std::min(lb, best_l + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 30; ++it) {
    const double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    if (profile_lml(pts, g, box, std::exp(c), nullptr) >= profile_lml(pts, g, box, std::exp(d), nullptr)) {
      b = d;
    } else {
      a = c;
    }
  }
  const double mid = 0.5 * (a + b);
  if (profile_lml(pts, g, box, std::exp(mid), nullptr) > best) best_l = mid;

  double theta_sq = 1.0;
  profile_lml(pts, g, box, std::exp(best_l), &theta_sq);
  model.kernel.theta = std::sqrt(theta_sq);
  for (std::size_t d = 0; d < box.dim(); ++d) model.kernel.lambda.push_back(std::exp(best_l) * box.width(d));
  model.factor.emplace(model.kernel.gram(pts));
  model.weights = model.factor->solve(g);
  return model;
}

QuadratureEstimate integrate_model(const WarpModel& model, const Points& pts, const Box& box, const WarpedOptions& opt) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd a_prod = Eigen::MatrixXd::Ones(n, n);
  Eigen::MatrixXd b_prod = Eigen::MatrixXd::Ones(n, n);
  for (std::size_t d = 0; d < box.dim(); ++d) {
    const QuadratureRule rule = gauss_legendre(box.lo[d], box.hi[d], opt.quadrature_panels, opt.quadrature_order);
    const auto q = static_cast<Eigen::Index>(rule.nodes.size());
    const double l = model.kernel.lambda[d];
    Eigen::MatrixXd phi(q, n);
    for (Eigen::Index r = 0; r < q; ++r) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = (rule.nodes[static_cast<std::size_t>(r)] - pts[static_cast<std::size_t>(i)][d]) / l;
        phi(r, i) = std::exp(-t * t);
      }
    }
    const Eigen::Map<const Eigen::VectorXd> w(rule.weights.data(), q);
    Eigen::MatrixXd kq(q, q);
    for (Eigen::Index r = 0; r < q; ++r) {
      for (Eigen::Index s = 0; s <= r; ++s) {
        const double t = (rule.nodes[static_cast<std::size_t>(r)] - rule.nodes[static_cast<std::size_t>(s)]) / l;
        kq(r, s) = kq(s, r) = std::exp(-t * t);
      }
    }
    const Eigen::MatrixXd wphi = w.asDiagonal() * phi;
    a_prod.array() *= (phi.transpose() * wphi).array();
    b_prod.array() *= (wphi.transpose() * kq * wphi).array();
  }
  const double s = model.kernel.theta * model.kernel.theta;
  const Eigen::VectorXd& w = model.weights;
  QuadratureEstimate est;
  est.n_evals = static_cast<int>(n);
  est.mean = model.offset * box.volume() + 0.5 * s * s * w.dot(a_prod * w);
  const Eigen::VectorXd v = s * s * (a_prod * w);
  double var = s * s * s * w.dot(b_prod * w) - v.dot(model.factor->solve(v));
  if (var < 0.0) {
    var = 0.0;
    est.clamped = true;
  }
  est.variance = var;
  return est;
}

double acquisition(const WarpModel& model, const Points& pts, std::span<const double> x) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) k[i] = model.kernel(x, pts[static_cast<std::size_t>(i)]);
  const double mean = k.dot(model.weights);
  const double var = std::max(model.kernel.theta * model.kernel.theta - k.dot(model.factor->solve(k)), 0.0);
  return mean * mean * var;
}

}  // namespace

WarpedResult warped_bq_integrate(const Integrand& f, const Box& box, int budget, std::uint64_t seed,
                                 const WarpedOptions& options) {
  if (box.dim() == 0 || box.dim() > 4) throw InvalidArgument("warped quadrature supports 1 to 4 dimensions");
  if (budget < 3) throw InvalidArgument("warped quadrature needs a budget of at least 3");
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform_point = [&] {
    std::vector<double> x(box.dim());
    for (std::size_t d = 0; d < box.dim(); ++d) x[d] = box.lo[d] + box.width(d) * unit(rng);
    return x;
  };

  WarpedResult result;
  Points pts;
  std::vector<double> fvals;
  auto evaluate = [&](std::vector<double> x) {
    const double y = f(x);
    if (!(y > 0.0) || !std::isfinite(y)) {
      throw NonPositiveEvaluation("integrand returned " + std::to_string(y) + " in warped quadrature");
    }
    pts.push_back(std::move(x));
    fvals.push_back(y);
  };

  std::vector<double> center(box.dim());
  for (std::size_t d = 0; d < box.dim(); ++d) center[d] = 0.5 * (box.lo[d] + box.hi[d]);
  evaluate(center);
  while (pts.size() < 3) evaluate(uniform_point());

  auto record = [&](const WarpModel& model) {
    const QuadratureEstimate est = integrate_model(model, pts, box, options);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    ConvergenceRow row{"warped_bq", static_cast<std::int64_t>(pts.size()), ms, est.mean, 0.0, est.stddev(), seed};
    if (options.record_log_error) {
      row.estimate = std::log(est.mean);
      row.spread = est.stddev() / est.mean;
    }
    if (options.has_oracle) {
      row.abs_error = options.record_log_error ? std::abs(std::log(est.mean) - std::log(options.oracle))
                                               : std::abs(est.mean - options.oracle);
    }
    result.record.add(row);
    return est;
  };

  WarpModel model = fit_model(pts, fvals, box, options.offset_fraction);
  result.estimate = record(model);
  while (static_cast<int>(pts.size()) < budget) {
    std::vector<double> best_x;
    double best_a = -1.0;
    if (box.dim() == 1) {
      const std::vector<double> grid = select_nodes_grid(Domain(box.lo[0], box.hi[0]), options.candidates);
      for (double c : grid) {
        const bool taken = std::any_of(pts.begin(), pts.end(),
                                       [&](const auto& p) { return std::abs(p[0] - c) <= 1e-12 * box.width(0); });
        if (taken) continue;
        const double a = acquisition(model, pts, std::span<const double>(&c, 1));
        if (a > best_a) {
          best_a = a;
          best_x = {c};
        }
      }
    } else {
      for (int c = 0; c < options.candidates; ++c) {
        std::vector<double> x = uniform_point();
        const double a = acquisition(model, pts, x);
        if (a > best_a) {
          best_a = a;
          best_x = std::move(x);
        }
      }
    }
    if (best_x.empty()) throw NoCandidates("no unused candidate left for warped quadrature");
    evaluate(std::move(best_x));
    model = fit_model(pts, fvals, box, options.offset_fraction);
    result.estimate = record(model);
  }
  result.nodes = pts;
  result.offset = model.offset;
  result.kernel = model.kernel;
  return result;
}

WarpedResult warped_bq_integrate(const std::function<double(double)>& f, const Domain& domain, int budget,
                                 std::uint64_t seed, const WarpedOptions& options) {
  return warped_bq_integrate([&](std::span<const double> x) { return f(x[0]); }, Box(domain), budget, seed, options);
}

}  // namespace pnum
