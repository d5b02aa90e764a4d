#include "pnum/linalg.hpp"

#include "pnum/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

namespace pnum {

namespace {

constexpr int kProbeCount = 20;
constexpr std::uint64_t kProbeSeed = 0x5eedULL;

Eigen::VectorXd gaussian_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

// Eigendecomposition of B diag(e) B^T restricted to range(B); returns the
// `rank` components largest in magnitude (all when rank < 0).
std::pair<Eigen::MatrixXd, Eigen::VectorXd> compress(const Eigen::MatrixXd& b, const Eigen::MatrixXd& core,
                                                     int rank) {
  const Eigen::Index n = b.rows();
  const Eigen::Index k = std::min(n, b.cols());
  if (b.cols() == 0) return {Eigen::MatrixXd(n, 0), Eigen::VectorXd(0)};
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(b);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Eigen::MatrixXd small = r * core * r.transpose();
  small = 0.5 * (small + small.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
    return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[c]);
  });
  const Eigen::Index keep = rank < 0 ? k : std::min<Eigen::Index>(k, rank);
  Eigen::MatrixXd u(n, keep);
  Eigen::VectorXd e(keep);
  for (Eigen::Index j = 0; j < keep; ++j) {
    const Eigen::Index idx = order[static_cast<std::size_t>(j)];
    u.col(j) = q * es.eigenvectors().col(idx);
    e[j] = es.eigenvalues()[idx];
  }
  return {u, e};
}

}  // namespace

LinearOperator::LinearOperator(Eigen::Index dim, Apply apply, bool skip_probe)
    : dim_(dim), apply_(std::move(apply)) {
  if (dim <= 0) throw InvalidArgument("operator dimension must be positive");
  if (skip_probe) return;
  std::mt19937_64 rng(kProbeSeed);
  for (int i = 0; i < kProbeCount; ++i) {
    Eigen::VectorXd v = gaussian_vector(dim, rng);
    v.normalize();
    const Eigen::VectorXd av = apply_(v);
    if (av.size() != dim) throw DimensionMismatch("operator returned a vector of the wrong size");
    if (!(v.dot(av) > 0.0)) throw InvalidArgument("operator failed the positive-definiteness probe");
  }
}

LinearOperator LinearOperator::dense(Eigen::MatrixXd matrix, bool skip_probe) {
  if (matrix.rows() != matrix.cols()) throw DimensionMismatch("dense operator must be square");
  if ((matrix - matrix.transpose()).norm() > 1e-12 * std::max(1.0, matrix.norm())) {
    throw InvalidArgument("dense operator is not symmetric");
  }
  auto shared = std::make_shared<const Eigen::MatrixXd>(matrix);
  LinearOperator op(matrix.rows(), [shared](const Eigen::VectorXd& v) { return Eigen::VectorXd(*shared * v); },
                    skip_probe);
  op.matrix_ = std::move(matrix);
  return op;
}

Eigen::VectorXd LinearOperator::operator()(const Eigen::VectorXd& v) const {
  if (v.size() != dim_) throw DimensionMismatch("operator applied to a vector of the wrong size");
  return apply_(v);
}

Eigen::MatrixXd LinearOperator::to_dense() const {
  if (matrix_) return *matrix_;
  Eigen::MatrixXd m(dim_, dim_);
  for (Eigen::Index j = 0; j < dim_; ++j) m.col(j) = apply_(Eigen::VectorXd::Unit(dim_, j));
  return m;
}

MatrixBelief::MatrixBelief(Eigen::Index dim, double scale)
    : dim_(dim), scale_(scale), prior_u_(dim, 0), prior_e_(0), steps_(dim, 0), observed_(dim, 0), u_(dim, 0), e_(0) {
  if (dim < 0) throw InvalidArgument("belief dimension must be non-negative");
  if (!(scale > 0.0)) throw InvalidArgument("belief scale must be positive");
}

MatrixBelief MatrixBelief::identity(Eigen::Index dim, double scale) { return MatrixBelief(dim, scale); }

MatrixBelief MatrixBelief::low_rank_prior(Eigen::MatrixXd u0, Eigen::VectorXd e0, double scale) {
  if (u0.cols() != e0.size()) throw DimensionMismatch("prior factor and diagonal disagree");
  MatrixBelief b(u0.rows(), scale);
  b.prior_u_ = std::move(u0);
  b.prior_e_ = std::move(e0);
  return b;
}

void MatrixBelief::set_scale(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("belief scale must be positive");
  scale_ = sigma;
}

Eigen::VectorXd MatrixBelief::apply_prior(const Eigen::VectorXd& v) const {
  if (v.size() != dim_) throw DimensionMismatch("belief applied to a vector of the wrong size");
  if (prior_u_.cols() == 0) return v;
  return v + prior_u_ * (prior_e_.asDiagonal() * (prior_u_.transpose() * v));
}

void MatrixBelief::fold_update_into_prior() {
  Eigen::MatrixXd u(dim_, prior_u_.cols() + u_.cols());
  u << prior_u_, u_;
  Eigen::VectorXd e(prior_e_.size() + e_.size());
  e << prior_e_, e_;
  prior_u_ = std::move(u);
  prior_e_ = std::move(e);
  steps_.resize(dim_, 0);
  observed_.resize(dim_, 0);
  u_.resize(dim_, 0);
  e_.resize(0);
  frozen_ = false;
}

void MatrixBelief::absorb(const Eigen::VectorXd& s, const Eigen::VectorXd& y, bool refresh_factors) {
  if (s.size() != dim_ || y.size() != dim_) throw DimensionMismatch("observation has the wrong size");
  if (frozen_) fold_update_into_prior();
  steps_.conservativeResize(Eigen::NoChange, steps_.cols() + 1);
  observed_.conservativeResize(Eigen::NoChange, observed_.cols() + 1);
  steps_.rightCols(1) = s;
  observed_.rightCols(1) = y;
  if (refresh_factors) refresh();
}

namespace {

// Recombines the observation pairs into S' = S R, Y' = Y R with S'^T Y' = I.
// The posterior mean depends only on span(S) (with Y = A S), so this leaves it
// unchanged while dropping numerically dependent directions.
struct ConjugatePairs {
  Eigen::MatrixXd s;
  Eigen::MatrixXd y;
};

ConjugatePairs conjugate_pairs(const Eigen::MatrixXd& s, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd g = s.transpose() * y;
  g = 0.5 * (g + g.transpose()).eval();
  const Eigen::VectorXd diag = g.diagonal();
  if (!(diag.minCoeff() > 0.0)) throw Breakdown("observation with non-positive curvature s'y");
  const Eigen::VectorXd inv_sqrt = diag.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd gn = inv_sqrt.asDiagonal() * g * inv_sqrt.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gn);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double cutoff = 1e-12 * lam.maxCoeff();
  Eigen::Index keep = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) keep += lam[i] > cutoff ? 1 : 0;
  if (keep == 0) throw Breakdown("observation Gram matrix S^T Y is singular");
  // Eigenvalues come in ascending order, so the kept ones are the last.
  const Eigen::MatrixXd r = inv_sqrt.asDiagonal() * es.eigenvectors().rightCols(keep) *
                            lam.tail(keep).cwiseSqrt().cwiseInverse().asDiagonal();
  return {s * r, y * r};
}

}  // namespace

void MatrixBelief::refresh() {
  const Eigen::Index m = steps_.cols();
  if (m == 0 || frozen_) return;
  const ConjugatePairs cp = conjugate_pairs(steps_, observed_);
  const Eigen::Index k = cp.s.cols();
  Eigen::MatrixXd delta = cp.s;
  for (Eigen::Index j = 0; j < k; ++j) delta.col(j) -= apply_prior(cp.y.col(j));
  Eigen::MatrixXd y_delta = cp.y.transpose() * delta;
  y_delta = 0.5 * (y_delta + y_delta.transpose()).eval();
  Eigen::MatrixXd basis(dim_, 2 * k);
  basis << cp.s, delta;
  Eigen::MatrixXd core = Eigen::MatrixXd::Zero(2 * k, 2 * k);
  core.topLeftCorner(k, k) = -y_delta;
  core.topRightCorner(k, k) = Eigen::MatrixXd::Identity(k, k);
  core.bottomLeftCorner(k, k) = Eigen::MatrixXd::Identity(k, k);
  auto [u, e] = compress(basis, core, -1);
  // Keep exactly 2M columns; zero padding covers dropped or excess directions.
  u_ = Eigen::MatrixXd::Zero(dim_, 2 * m);
  e_ = Eigen::VectorXd::Zero(2 * m);
  u_.leftCols(u.cols()) = u;
  e_.head(e.size()) = e;
}

Eigen::VectorXd MatrixBelief::apply_from_observations(const Eigen::VectorXd& v) const {
  if (frozen_) return apply_prior(v) + u_ * (e_.asDiagonal() * (u_.transpose() * v));
  if (steps_.cols() == 0) return apply_prior(v);
  // Oblique projection of v off span(Y), prior applied, then conjugation
  // against S, plus the exact inverse on the observed part.
  const ConjugatePairs cp = conjugate_pairs(steps_, observed_);
  const Eigen::VectorXd a = cp.s.transpose() * v;
  const Eigen::VectorXd rp = v - cp.y * a;
  const Eigen::VectorXd z = apply_prior(rp);
  const Eigen::VectorXd c = cp.s.transpose() * rp - cp.y.transpose() * z;
  return z + cp.s * (a + c);
}

Eigen::VectorXd posterior_mean_apply(const MatrixBelief& belief, const Eigen::VectorXd& v) {
  if (v.size() != belief.dim()) throw DimensionMismatch("posterior_mean_apply: dimension mismatch");
  return belief.apply_prior(v) + belief.u() * (belief.e().asDiagonal() * (belief.u().transpose() * v));
}

MatrixBelief truncate_belief(const MatrixBelief& belief, int rank) {
  if (rank < 0) throw InvalidArgument("truncation rank must be non-negative");
  if (rank >= belief.u().cols()) return belief;
  MatrixBelief out = belief;
  auto [u, e] = compress(belief.u(), Eigen::MatrixXd(belief.e().asDiagonal()), rank);
  out.u_ = std::move(u);
  out.e_ = std::move(e);
  out.steps_.resize(belief.dim(), 0);
  out.observed_.resize(belief.dim(), 0);
  out.frozen_ = true;
  return out;
}

MatrixBelief posterior_as_prior(const MatrixBelief& belief, int rank) {
  Eigen::MatrixXd u(belief.dim(), belief.prior_u().cols() + belief.u().cols());
  u << belief.prior_u(), belief.u();
  Eigen::VectorXd e(belief.prior_e().size() + belief.e().size());
  e << belief.prior_e(), belief.e();
  auto [cu, ce] = compress(u, Eigen::MatrixXd(e.asDiagonal()), rank);
  return MatrixBelief::low_rank_prior(std::move(cu), std::move(ce), belief.scale());
}

namespace {

int default_max_iterations(const SolveOptions& o, Eigen::Index n) {
  return o.max_iterations >= 0 ? o.max_iterations : static_cast<int>(2 * n);
}

}  // namespace

SolveReport classic_cg(const LinearOperator& a, const Eigen::VectorXd& b, const SolveOptions& options) {
  if (b.size() != a.dim()) throw DimensionMismatch("classic_cg: rhs has the wrong size");
  if (!(options.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  SolveReport rep;
  rep.belief = MatrixBelief::identity(a.dim());
  Eigen::VectorXd x = options.x0.value_or(Eigen::VectorXd::Zero(a.dim()));
  Eigen::VectorXd r = b;
  if (options.x0 && !options.x0->isZero(0.0)) {
    r -= a(x);
    ++rep.matvecs;
  }
  const double target = options.tol * b.norm();
  const int max_it = default_max_iterations(options, a.dim());
  rep.residual_norms.push_back(r.norm());
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  while (rep.residual_norms.back() > target && rep.iterations < max_it) {
    const Eigen::VectorXd q = a(p);
    ++rep.matvecs;
    const double pap = p.dot(q);
    if (!(pap > 0.0)) throw Breakdown("conjugate gradients met <p, A p> <= 0");
    const double alpha = rr / pap;
    x += alpha * p;
    r -= alpha * q;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    ++rep.iterations;
    rep.iterates.push_back(x);
    rep.residual_norms.push_back(std::sqrt(rr));
  }
  rep.solution = std::move(x);
  rep.converged = rep.residual_norms.back() <= target;
  return rep;
}

SolveReport solve_probabilistic(const LinearOperator& a, const Eigen::VectorXd& b, MatrixBelief belief,
                                const SolveOptions& options) {
  if (belief.dim() != a.dim()) throw BeliefDimensionMismatch("belief dimension does not match the operator");
  if (b.size() != a.dim()) throw DimensionMismatch("rhs has the wrong size");
  if (!(options.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  SolveReport rep;
  Eigen::VectorXd x = options.x0.value_or(Eigen::VectorXd::Zero(a.dim()));
  Eigen::VectorXd r = -b;  // residual A x - b
  if (options.x0 && !options.x0->isZero(0.0)) {
    r += a(x);
    ++rep.matvecs;
  }
  const double target = options.tol * b.norm();
  const int max_it = default_max_iterations(options, a.dim());
  rep.residual_norms.push_back(r.norm());
  while (rep.residual_norms.back() > target && rep.iterations < max_it) {
    const Eigen::VectorXd d = -belief.apply_from_observations(r);
    const Eigen::VectorXd q = a(d);
    ++rep.matvecs;
    const double dad = d.dot(q);
    if (!(dad > 0.0)) throw Breakdown("matrix-belief solver met <d, A d> <= 0");
    const double alpha = -d.dot(r) / dad;
    const Eigen::VectorXd s = alpha * d;
    const Eigen::VectorXd y = alpha * q;
    x += s;
    r += y;
    belief.absorb(s, y, false);
    ++rep.iterations;
    rep.iterates.push_back(x);
    rep.residual_norms.push_back(r.norm());
  }
  belief.refresh();
  rep.solution = std::move(x);
  rep.belief = std::move(belief);
  rep.converged = rep.residual_norms.back() <= target;
  return rep;
}

double calibrate_scale(SolveReport& report) {
  const Eigen::MatrixXd& s = report.belief.steps();
  const Eigen::MatrixXd& y = report.belief.observed();
  if (s.cols() == 0) throw InsufficientTrace("scale calibration needs at least one observation");
  double log_sum = 0.0;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    const double q = s.col(j).dot(y.col(j)) / s.col(j).squaredNorm();
    if (!(q > 0.0)) throw NumericalError("non-positive Rayleigh quotient in trace");
    log_sum += std::log(q);
  }
  const double sigma = std::exp(log_sum / static_cast<double>(s.cols()));
  report.belief.set_scale(sigma);
  report.calibrated_scale = sigma;
  return sigma;
}

std::vector<SolveReport> warm_start_sequence(const std::vector<LinearProblem>& problems, int rank, double tol,
                                             int max_iterations) {
  std::vector<SolveReport> out;
  for (std::size_t t = 0; t < problems.size(); ++t) {
    const LinearProblem& p = problems[t];
    SolveOptions opts;
    opts.tol = tol;
    opts.max_iterations = max_iterations;
    MatrixBelief prior = MatrixBelief::identity(p.op.dim());
    if (t > 0) {
      if (p.op.dim() != problems[0].op.dim()) throw DimensionMismatch("sequence problems differ in dimension");
      if (rank < 0) rank = std::min(64, 2 * out.front().iterations);
      if (rank > 0) {
        prior = posterior_as_prior(out.back().belief, rank);
        opts.x0 = prior.apply_prior(p.rhs);
      }
    }
    out.push_back(solve_probabilistic(p.op, p.rhs, std::move(prior), opts));
  }
  return out;
}

std::vector<SolveReport> cold_start_sequence(const std::vector<LinearProblem>& problems, double tol,
                                             int max_iterations) {
  std::vector<SolveReport> out;
  for (const LinearProblem& p : problems) {
    SolveOptions opts;
    opts.tol = tol;
    opts.max_iterations = max_iterations;
    out.push_back(solve_probabilistic(p.op, p.rhs, MatrixBelief::identity(p.op.dim()), opts));
  }
  return out;
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open matrix file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidArgument(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidArgument("matrix file " + path + " is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

Eigen::MatrixXd read_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open matrix file " + path);
  std::int64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || rows <= 0 || cols <= 0) throw InvalidArgument("bad matrix header in " + path);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!in) throw InvalidArgument("truncated matrix file " + path);
  return m;
}

void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write matrix file " + path);
  const std::int64_t rows = m.rows(), cols = m.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
}

Eigen::MatrixXd random_spd_matrix(Eigen::Index n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd g(n, n);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd ev(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ev[i] = n > 1 ? lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1)) : lo;
  }
  Eigen::MatrixXd a = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

}  // namespace pnum
