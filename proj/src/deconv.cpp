#include "pnum/deconv.hpp"

#include "pnum/error.hpp"

#include <cmath>
#include <random>

namespace pnum {

namespace {

Eigen::VectorXd reference_signal(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  // A few smooth bumps on top of a piecewise-constant level.
  for (int b = 0; b < 4; ++b) {
    const double c = n * u(rng), w = 1.0 + 0.1 * n * u(rng), a = 0.5 + u(rng);
    for (int i = 0; i < n; ++i) x[i] += a * std::exp(-0.5 * (i - c) * (i - c) / (w * w));
  }
  const int step_at = static_cast<int>(n * (0.25 + 0.5 * u(rng)));
  x.tail(n - step_at).array() += 0.5;
  return x;
}

double relative_drift(const Eigen::MatrixXd& next, const Eigen::MatrixXd& prev) {
  return (next - prev).norm() / prev.norm();
}

}  // namespace

Eigen::VectorXd blur_taps(const BlurParams& p, int radius) {
  if (radius < 0) throw InvalidArgument("kernel radius must be non-negative");
  if (!(p.width > 0.0)) throw InvalidArgument("blur width must be positive");
  Eigen::VectorXd f(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) {
    const double z = (k - p.center) / p.width;
    f[k + radius] = std::exp(-0.5 * z * z);
  }
  const double s = f.sum();
  if (!(s > 0.0)) throw NumericalError("blur kernel vanished on its support");
  return f / s;
}

Eigen::MatrixXd convolution_matrix(const Eigen::VectorXd& taps, int size) {
  const int radius = static_cast<int>(taps.size() / 2);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(size, size);
  for (int i = 0; i < size; ++i) {
    for (int k = -radius; k <= radius; ++k) {
      const int j = i - k;
      if (j >= 0 && j < size) x(i, j) = taps[k + radius];
    }
  }
  return x;
}

Eigen::MatrixXd normal_operator(const Eigen::MatrixXd& x, double epsilon_factor) {
  if (!(epsilon_factor > 0.0)) throw InvalidArgument("regularization factor must be positive");
  Eigen::MatrixXd a = x.transpose() * x;
  const double eps = epsilon_factor * a.trace() / static_cast<double>(a.rows());
  a.diagonal().array() += eps;
  return 0.5 * (a + a.transpose());
}

DeconvSequence generate_sequence(const DeconvConfig& cfg, std::uint64_t seed) {
  if (cfg.size < 2) throw InvalidArgument("signal length must be at least 2");
  if (cfg.length < 2) throw InvalidArgument("sequence length must be at least 2");
  if (cfg.drift < 0.0 || cfg.drift > 0.1) throw InvalidArgument("drift magnitude must lie in [0, 0.1]");
  if (cfg.noise < 0.0) throw InvalidArgument("noise level must be non-negative");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  DeconvSequence seq;
  seq.reference = reference_signal(cfg.size, rng);

  BlurParams params{0.0, cfg.blur_width};
  auto operator_for = [&](const BlurParams& p, Eigen::MatrixXd& xmat) {
    xmat = convolution_matrix(blur_taps(p, cfg.kernel_radius), cfg.size);
    return normal_operator(xmat, cfg.epsilon_factor);
  };

  Eigen::MatrixXd xmat;
  Eigen::MatrixXd a = operator_for(params, xmat);
  for (int t = 0; t < cfg.length; ++t) {
    if (t > 0) {
      // Random-walk proposal in (centre, log width), shrunk by bisection to
      // the largest step whose operator change stays within the drift bound.
      const double dc = normal(rng), dw = 0.5 * normal(rng);
      auto propose = [&](double s) {
        return BlurParams{params.center + s * dc, params.width * std::exp(s * dw)};
      };
      Eigen::MatrixXd xs;
      double lo = 0.0, hi = 1.0;
      if (relative_drift(operator_for(propose(hi), xs), a) > cfg.drift) {
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (relative_drift(operator_for(propose(mid), xs), a) <= cfg.drift ? lo : hi) = mid;
        }
      } else {
        lo = hi;
      }
      params = propose(lo);
      a = operator_for(params, xmat);
    }
    Eigen::VectorXd rhs = a * seq.reference;
    if (cfg.noise > 0.0) {
      Eigen::VectorXd n(cfg.size);
      for (int i = 0; i < cfg.size; ++i) n[i] = cfg.noise * normal(rng);
      rhs += xmat.transpose() * n;
    }
    seq.kernels.push_back(params);
    seq.matrices.push_back(a);
    seq.problems.push_back({LinearOperator::dense(a), std::move(rhs)});
  }
  return seq;
}

std::int64_t RecyclingReport::total_matvecs(const std::string& variant) const {
  std::int64_t s = 0;
  for (const RecyclingRow& r : rows) {
    if (r.variant == variant) s += r.matvecs;
  }
  return s;
}

double RecyclingReport::mean_initial_residual(const std::string& variant, int first) const {
  double s = 0.0;
  int n = 0;
  for (const RecyclingRow& r : rows) {
    if (r.variant == variant && r.problem_index >= first) {
      s += r.initial_residual;
      ++n;
    }
  }
  if (n == 0) throw InvalidArgument("no problems in the requested range");
  return s / n;
}

std::vector<int> RecyclingReport::iterations(const std::string& variant) const {
  std::vector<int> out;
  for (const RecyclingRow& r : rows) {
    if (r.variant == variant) out.push_back(r.iterations);
  }
  return out;
}

void RecyclingReport::write_csv(std::ostream& out) const {
  out << "variant,problem_index,iterations,initial_residual,final_residual,matvecs\n";
  const auto old = out.precision(17);
  for (const RecyclingRow& r : rows) {
    out << r.variant << ',' << r.problem_index << ',' << r.iterations << ',' << r.initial_residual << ','
        << r.final_residual << ',' << r.matvecs << '\n';
  }
  out.precision(old);
}

RecyclingReport run_recycling_benchmark(const std::vector<LinearProblem>& sequence, int rank, double tol) {
  if (sequence.empty()) throw InvalidArgument("empty problem sequence");
  RecyclingReport rep;
  auto tabulate = [&](const std::string& variant, const std::vector<SolveReport>& solves) {
    for (std::size_t t = 0; t < solves.size(); ++t) {
      const SolveReport& s = solves[t];
      rep.rows.push_back({variant, static_cast<int>(t) + 1, s.iterations, s.initial_residual(), s.final_residual(),
                          static_cast<std::int64_t>(s.matvecs)});
    }
  };
  tabulate("cold", cold_start_sequence(sequence, tol));
  tabulate("warm", warm_start_sequence(sequence, rank, tol));
  return rep;
}

}  // namespace pnum
