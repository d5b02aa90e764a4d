#include "pnum/mc.hpp"

#include "pnum/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace pnum {

namespace {

double log_normal_cdf_diff(double lo, double hi, double mu, double sigma) {
  const double a = (lo - mu) / (sigma * std::numbers::sqrt2);
  const double b = (hi - mu) / (sigma * std::numbers::sqrt2);
  // 0.5 (erf(b) - erf(a)), computed on the side where it does not cancel.
  const double diff = (a >= 0.0) ? 0.5 * (std::erfc(a) - std::erfc(b))
                      : (b <= 0.0) ? 0.5 * (std::erfc(-b) - std::erfc(-a))
                                   : 0.5 * (std::erf(b) - std::erf(a));
  return std::log(diff);
}

bool is_power_of_two(std::int64_t k) { return k > 0 && (k & (k - 1)) == 0; }

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::mt19937_64 chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0xa15u};
  return std::mt19937_64(seq);
}

}  // namespace

double EvidenceProblem::log_prior_density() const { return -std::log(box.volume()); }

std::vector<double> EvidenceProblem::sample_prior(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> theta(box.dim());
  for (std::size_t d = 0; d < box.dim(); ++d) theta[d] = box.lo[d] + box.width(d) * u(rng);
  return theta;
}

bool EvidenceProblem::in_support(std::span<const double> theta) const {
  for (std::size_t d = 0; d < box.dim(); ++d) {
    if (theta[d] < box.lo[d] || theta[d] > box.hi[d]) return false;
  }
  return true;
}

EvidenceProblem gaussian_evidence_problem(const Box& box, std::vector<double> mu, double sigma, double scale) {
  if (mu.size() != box.dim()) throw DimensionMismatch("Gaussian centre and box dimensions differ");
  if (!(sigma > 0.0) || !(scale > 0.0)) throw InvalidArgument("Gaussian width and scale must be positive");
  EvidenceProblem p;
  p.name = "gaussian";
  p.box = box;
  const double log_norm = std::log(scale) - 0.5 * static_cast<double>(mu.size()) * std::log(2.0 * std::numbers::pi * sigma * sigma);
  p.log_likelihood = [mu, sigma, log_norm](std::span<const double> theta) {
    double q = 0.0;
    for (std::size_t d = 0; d < mu.size(); ++d) q += (theta[d] - mu[d]) * (theta[d] - mu[d]);
    return log_norm - 0.5 * q / (sigma * sigma);
  };
  double log_z = std::log(scale) - std::log(box.volume());
  for (std::size_t d = 0; d < box.dim(); ++d) log_z += log_normal_cdf_diff(box.lo[d], box.hi[d], mu[d], sigma);
  p.log_z = log_z;
  return p;
}

EvidenceProblem constant_evidence_problem(const Box& box, double c) {
  if (!(c > 0.0)) throw InvalidArgument("constant likelihood must be positive");
  EvidenceProblem p;
  p.name = "constant";
  p.box = box;
  const double lc = std::log(c);
  p.log_likelihood = [lc](std::span<const double>) { return lc; };
  p.log_z = lc;
  return p;
}

double log_mean_exp(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("log_mean_exp of an empty set");
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s / static_cast<double>(v.size()));
}

namespace {

// Running mean of draw(rng) * scale, recorded at powers of two and at N.
SMCResult smc_core(const std::function<double(std::mt19937_64&)>& draw, double scale, std::int64_t n,
                   std::uint64_t seed, bool has_truth, double truth) {
  if (n < 1) throw InvalidArgument("Monte Carlo needs at least one sample");
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  SMCResult res;
  double mean = 0.0, m2 = 0.0;
  for (std::int64_t k = 1; k <= n; ++k) {
    const double v = draw(rng);
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (v - mean);
    if (is_power_of_two(k) || k == n) {
      const double se = k > 1 ? scale * std::sqrt(m2 / static_cast<double>(k - 1) / static_cast<double>(k)) : 0.0;
      const double est = scale * mean;
      res.record.add({"smc", k, elapsed_ms(start), est, has_truth ? std::abs(est - truth) : 0.0, se, seed});
    }
  }
  res.estimate = scale * mean;
  res.samples = n;
  res.std_error = res.record.rows.back().spread;
  return res;
}

}  // namespace

SMCResult smc_integrate(const EvidenceProblem& problem, std::int64_t n, std::uint64_t seed) {
  return smc_core([&](std::mt19937_64& rng) { return std::exp(problem.log_likelihood(problem.sample_prior(rng))); },
                  1.0, n, seed, problem.log_z.has_value(), problem.log_z ? std::exp(*problem.log_z) : 0.0);
}

SMCResult smc_integrate(const Integrand& f, const Box& box, std::int64_t n, std::uint64_t seed,
                        std::optional<double> oracle) {
  if (box.dim() == 0) throw InvalidArgument("Monte Carlo needs a non-empty box");
  std::vector<double> x(box.dim());
  return smc_core(
      [&](std::mt19937_64& rng) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t d = 0; d < box.dim(); ++d) x[d] = box.lo[d] + box.width(d) * u(rng);
        return f(x);
      },
      box.volume(), n, seed, oracle.has_value(), oracle.value_or(0.0));
}

std::vector<double> geometric_ladder(int n_temps) {
  if (n_temps < 1) throw InvalidArgument("annealing needs at least one temperature");
  std::vector<double> b{0.0};
  if (n_temps == 1) {
    b.push_back(1.0);
    return b;
  }
  for (int k = 1; k <= n_temps; ++k) {
    b.push_back(std::pow(10.0, -4.0 * (1.0 - static_cast<double>(k - 1) / static_cast<double>(n_temps - 1))));
  }
  b.back() = 1.0;
  return b;
}

AISResult ais_evidence(const EvidenceProblem& problem, int n_temps, int n_chains, int mh_steps, std::uint64_t seed) {
  if (n_chains < 1) throw InvalidArgument("annealing needs at least one chain");
  if (mh_steps < 1) throw InvalidArgument("annealing needs at least one Metropolis step per temperature");
  const auto start = std::chrono::steady_clock::now();
  AISResult res;
  res.betas = geometric_ladder(n_temps);
  const std::size_t dim = problem.box.dim();
  std::vector<double> step(dim);
  for (std::size_t d = 0; d < dim; ++d) step[d] = 0.5 * problem.box.width(d) / std::sqrt(static_cast<double>(n_temps));

  res.log_weights.reserve(static_cast<std::size_t>(n_chains));
  for (int c = 0; c < n_chains; ++c) {
    std::mt19937_64 rng = chain_rng(seed, c);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> theta = problem.sample_prior(rng);
    double ll = problem.log_likelihood(theta);
    ++res.evaluations;
    double logw = 0.0;
    std::vector<double> prop(dim);
    for (std::size_t k = 1; k < res.betas.size(); ++k) {
      const double beta = res.betas[k];
      logw += (beta - res.betas[k - 1]) * ll;
      if (k + 1 == res.betas.size()) break;  // no moves needed after the final weight
      for (int s = 0; s < mh_steps; ++s) {
        for (std::size_t d = 0; d < dim; ++d) prop[d] = theta[d] + step[d] * normal(rng);
        const double u = unif(rng);
        if (!problem.in_support(prop)) continue;
        const double llp = problem.log_likelihood(prop);
        ++res.evaluations;
        if (std::log(u) < beta * (llp - ll)) {
          theta = prop;
          ll = llp;
        }
      }
    }
    res.log_weights.push_back(logw);
    const auto done = static_cast<std::int64_t>(c + 1);
    if (is_power_of_two(done) || c + 1 == n_chains) {
      const std::span<const double> w(res.log_weights);
      const double est = log_mean_exp(w);
      // Delta-method standard error of log Z from the weight spread.
      double spread = 0.0;
      if (done > 1) {
        double s2 = 0.0;
        for (double x : w) s2 += std::expm1(x - est) * std::expm1(x - est);
        spread = std::sqrt(s2 / static_cast<double>(done - 1) / static_cast<double>(done));
      }
      res.record.add({"ais", res.evaluations, elapsed_ms(start), est,
                      problem.log_z ? std::abs(est - *problem.log_z) : 0.0, spread, seed});
    }
  }
  res.log_z = log_mean_exp(res.log_weights);
  double s1 = 0.0, s2 = 0.0;
  for (double x : res.log_weights) {
    const double w = std::exp(x - res.log_z);
    s1 += w;
    s2 += w * w;
  }
  res.ess = s1 * s1 / s2;
  res.degenerate = res.ess < 2.0;
  return res;
}

}  // namespace pnum
