#pragma once

#include "pnum/record.hpp"
#include "pnum/warped_bq.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pnum {

using LogLikelihood = std::function<double(std::span<const double>)>;

/// Evidence integral Z = integral of L(theta) p(theta) over a box with a
/// uniform prior p = 1 / volume.
struct EvidenceProblem {
  std::string name;
  Box box;
  LogLikelihood log_likelihood;
  std::optional<double> log_z;

  double log_prior_density() const;
  std::vector<double> sample_prior(std::mt19937_64& rng) const;
  bool in_support(std::span<const double> theta) const;
};

/// L(theta) = scale * prod_d N(theta_d; mu_d, sigma^2). Z is known in closed form.
EvidenceProblem gaussian_evidence_problem(const Box& box, std::vector<double> mu, double sigma, double scale = 1.0);
/// L(theta) = c everywhere, so Z = c.
EvidenceProblem constant_evidence_problem(const Box& box, double c);

struct SMCResult {
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
  ConvergenceRecord record;  // running estimate at every power of two and at N
};

/// Simple Monte Carlo: mean of the likelihood over N prior draws.
SMCResult smc_integrate(const EvidenceProblem& problem, std::int64_t n, std::uint64_t seed);
/// Plain Monte Carlo for an integral over a box: volume * mean of f at N
/// uniform draws. `oracle` fills the abs_error column when given.
SMCResult smc_integrate(const Integrand& f, const Box& box, std::int64_t n, std::uint64_t seed,
                        std::optional<double> oracle = std::nullopt);

struct AISResult {
  double log_z = 0.0;
  double ess = 0.0;
  bool degenerate = false;  // effective sample size of the final weights below 2
  std::vector<double> log_weights;
  std::vector<double> betas;
  std::int64_t evaluations = 0;
  ConvergenceRecord record;  // running log Z after each power-of-two chain count
};

/// Inverse-temperature ladder: beta_0 = 0, then n_temps values geometric
/// from 1e-4 up to 1.
std::vector<double> geometric_ladder(int n_temps);

/// Annealed importance sampling with random-walk Metropolis moves. Chains use
/// seeds derived from `seed` and the chain index.
AISResult ais_evidence(const EvidenceProblem& problem, int n_temps, int n_chains, int mh_steps, std::uint64_t seed);

/// log(mean(exp(v))) without overflow.
double log_mean_exp(std::span<const double> v);

}  // namespace pnum
