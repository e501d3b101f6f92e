#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "maxent/distributions.hpp"
#include "maxent/variational.hpp"

namespace maxent {

// ---------------------------------------------------------------------------
// Rejection ABC

struct AbcOptions {
  std::size_t n_simulations = 10000;
  double acceptance_quantile = 0.01;

  void validate() const;
};

struct AbcResult {
  std::vector<ParameterSample> accepted;  // uniform weights
  std::vector<double> distances;          // Euclidean distance of each accepted draw
  double threshold = 0.0;                 // largest accepted distance
};

/// Draws n_simulations from the prior and keeps the acceptance_quantile fraction
/// closest (Euclidean) to the targets. Ties at the cutoff are broken by draw index.
AbcResult rejection_abc(const Prior& prior, const ObservableFn& observables, std::span<const double> targets,
                        const AbcOptions& options, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Derivative-free least squares

struct NelderMeadOptions {
  std::size_t max_iterations = 500;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  double x_tolerance = 1e-9;
  double f_tolerance = 1e-14;
};

struct NelderMeadResult {
  std::vector<double> minimizer;
  double minimum = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool collapsed = false;  // simplex lost dimension before converging
};

/// Minimizes f from x0. Objective values that are not finite are treated as +infinity.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::span<const double> x0, const NelderMeadOptions& options = {});

struct LeastSquaresResult {
  std::vector<double> params;
  double residual = 0.0;  // sum of squared deviations at params
  std::size_t iterations = 0;
  bool converged = false;
  bool restarted = false;
  bool flagged = false;  // collapse persisted after the restart
};

/// Point estimate minimizing sum_k (g_k(theta) - target_k)^2. Parameter vectors for
/// which the observable function throws are scored +infinity.
LeastSquaresResult least_squares_fit(const ObservableFn& observables, std::span<const double> targets,
                                     std::span<const double> initial_params,
                                     const NelderMeadOptions& options = {});

// ---------------------------------------------------------------------------
// Analytic posteriors for the scalar Gaussian toy (variances throughout).

struct GaussianPosterior {
  double mean = 0.0;
  double variance = 0.0;

  double log_density(double r) const;
  double entropy() const;
};

/// Product of the Gaussian likelihood N(r_bar, noise_var) and prior N(prior_mean, prior_var).
GaussianPosterior bayes_toy_posterior(double prior_mean, double prior_var, double observation,
                                      double noise_var);

/// The exponential tilt of N(prior_mean, prior_var) whose mean is the observation: N(r_bar, prior_var).
GaussianPosterior maxent_toy_posterior(double prior_mean, double prior_var, double observation);

/// Largest noise variance (capped at prior_var) for which the Bayesian posterior
/// mean lies within `match_tolerance` of the observation.
double bayes_matching_noise_variance(double prior_mean, double prior_var, double observation,
                                     double match_tolerance);

}  // namespace maxent
