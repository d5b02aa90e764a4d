#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pnum {

/// Black-box symmetric positive definite operator v -> A v.
class LinearOperator {
 public:
  using Apply = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  /// Probes <v, A v> > 0 on 20 seeded random unit vectors unless
  /// `skip_probe` is set; throws InvalidArgument on failure.
  LinearOperator(Eigen::Index dim, Apply apply, bool skip_probe = false);

  static LinearOperator dense(Eigen::MatrixXd matrix, bool skip_probe = false);

  Eigen::Index dim() const { return dim_; }
  Eigen::VectorXd operator()(const Eigen::VectorXd& v) const;
  /// Dense matrix if the operator was built from one.
  const std::optional<Eigen::MatrixXd>& matrix() const { return matrix_; }

  /// Materialises the operator by applying it to unit vectors.
  Eigen::MatrixXd to_dense() const;

 private:
  Eigen::Index dim_;
  Apply apply_;
  std::optional<Eigen::MatrixXd> matrix_;
};

/// Gaussian belief over the inverse H = A^{-1}, represented by its
/// sufficient statistics.
///
/// The prior mean is H0 = I + U0 E0 U0^T. After absorbing observations
/// (s_i, y_i = A s_i) the posterior mean is H0 + U E U^T with U of 2M
/// columns and E diagonal. The matching covariance family only enters
/// through the scalar scale sigma (W Y = sigma S), which does not change
/// the mean.
class MatrixBelief {
 public:
  static MatrixBelief identity(Eigen::Index dim, double scale = 1.0);
  /// Prior mean I + U0 diag(E0) U0^T.
  static MatrixBelief low_rank_prior(Eigen::MatrixXd u0, Eigen::VectorXd e0, double scale = 1.0);

  Eigen::Index dim() const { return dim_; }
  int observations() const { return static_cast<int>(steps_.cols()); }
  double scale() const { return scale_; }
  void set_scale(double sigma);

  const Eigen::MatrixXd& prior_u() const { return prior_u_; }
  const Eigen::VectorXd& prior_e() const { return prior_e_; }
  const Eigen::MatrixXd& u() const { return u_; }
  const Eigen::VectorXd& e() const { return e_; }
  const Eigen::MatrixXd& steps() const { return steps_; }
  const Eigen::MatrixXd& observed() const { return observed_; }

  Eigen::VectorXd apply_prior(const Eigen::VectorXd& v) const;

  /// Conditions on y = A s (Dirac likelihood, s = H y). With
  /// `refresh_factors` false the U, E factors go stale until refresh().
  void absorb(const Eigen::VectorXd& s, const Eigen::VectorXd& y, bool refresh_factors = true);
  void refresh();

  /// Posterior mean applied from the raw observations, O(N M + M^3).
  Eigen::VectorXd apply_from_observations(const Eigen::VectorXd& v) const;

 private:
  friend MatrixBelief truncate_belief(const MatrixBelief& belief, int rank);

  MatrixBelief(Eigen::Index dim, double scale);
  void fold_update_into_prior();

  Eigen::Index dim_;
  double scale_;
  Eigen::MatrixXd prior_u_;
  Eigen::VectorXd prior_e_;
  Eigen::MatrixXd steps_;     // S
  Eigen::MatrixXd observed_;  // Y
  Eigen::MatrixXd u_;
  Eigen::VectorXd e_;
  bool frozen_ = false;  // U, E no longer derivable from S, Y (truncated)
};

/// H0 v + U (E (U^T v)). Throws DimensionMismatch.
Eigen::VectorXd posterior_mean_apply(const MatrixBelief& belief, const Eigen::VectorXd& v);

/// Keeps the `rank` eigencomponents of U E U^T largest in magnitude; the
/// prior mean is untouched. rank >= columns of U returns the belief as is.
MatrixBelief truncate_belief(const MatrixBelief& belief, int rank);

/// Posterior mean I + (prior and update low-rank parts) truncated to
/// `rank`, returned as the prior of a fresh belief with no observations.
MatrixBelief posterior_as_prior(const MatrixBelief& belief, int rank);

struct SolveReport {
  Eigen::VectorXd solution;
  int iterations = 0;
  int matvecs = 0;
  std::vector<double> residual_norms;  ///< index 0 is the initial residual
  std::vector<Eigen::VectorXd> iterates;  ///< x_1 .. x_k
  MatrixBelief belief = MatrixBelief::identity(0);
  bool converged = false;
  std::optional<double> calibrated_scale;

  double initial_residual() const { return residual_norms.front(); }
  double final_residual() const { return residual_norms.back(); }
};

struct SolveOptions {
  double tol = 1e-10;  ///< relative to ||b||
  int max_iterations = -1;  ///< defaults to 2 N
  std::optional<Eigen::VectorXd> x0;
};

/// Hestenes-Stiefel conjugate gradients. Throws Breakdown when
/// <p, A p> <= 0.
SolveReport classic_cg(const LinearOperator& a, const Eigen::VectorXd& b, const SolveOptions& options = {});

/// Matrix-belief solver: steps along d = -H_i r_i with exact line search
/// and absorbs every (s_i, y_i) pair. With H0 = I the iterates coincide
/// with classic_cg. Throws Breakdown, BeliefDimensionMismatch.
SolveReport solve_probabilistic(const LinearOperator& a, const Eigen::VectorXd& b, MatrixBelief belief,
                                const SolveOptions& options = {});

/// Geometric mean of the Rayleigh quotients <s_i, y_i> / <s_i, s_i>; stored
/// in the report and on its belief. Throws InsufficientTrace with no
/// observations.
double calibrate_scale(SolveReport& report);

struct LinearProblem {
  LinearOperator op;
  Eigen::VectorXd rhs;
};

/// Solves in order, seeding problem t+1 with the rank-truncated posterior
/// mean of problem t (prior mean and x0 = H0 b). rank < 0 picks
/// 2 x (iterations of the first solve), capped at 64.
std::vector<SolveReport> warm_start_sequence(const std::vector<LinearProblem>& problems, int rank, double tol,
                                             int max_iterations = -1);

/// Independent cold solves (x0 = 0, H0 = I) for comparison.
std::vector<SolveReport> cold_start_sequence(const std::vector<LinearProblem>& problems, double tol,
                                             int max_iterations = -1);

/// Dense matrix I/O. CSV: one row per line, comma separated. Binary:
/// little-endian int64 rows, int64 cols, then row-major float64 entries.
Eigen::MatrixXd read_matrix_csv(const std::string& path);
Eigen::MatrixXd read_matrix_binary(const std::string& path);
void write_matrix_binary(const std::string& path, const Eigen::MatrixXd& m);

/// Seeded random SPD matrix with eigenvalues log-spaced in [lo, hi].
Eigen::MatrixXd random_spd_matrix(Eigen::Index n, std::uint64_t seed, double lo = 1.0, double hi = 10.0);

}  // namespace pnum
