#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "maxent/distributions.hpp"
#include "maxent/maxent_core.hpp"

namespace maxent {

/// Maps one parameter draw to its observable vector g[f(theta)].
using ObservableFn = std::function<std::vector<double>(std::span<const double>)>;

/// Sampling distribution for the current round. Always in the prior's family.
struct SamplerState {
  Prior sampler;
  std::size_t iteration = 0;
  std::vector<double> ess_history;
  double learning_rate = 1.0;  // last step size actually applied
};

/// One cross-entropy descent step on the sampler's mean and variance parameters:
/// params += eta * sum_i w_i d ln P_sampler(theta_i) / d params.
/// A step that would make a variance non-positive is retried with eta halved.
SamplerState variational_step(const SamplerState& state, const Ensemble& ensemble,
                              const LagrangeState& lagrange, double eta);

/// log w_i + ln P_prior(theta_i) - ln P_sampler(theta_i), renormalized.
/// Draws outside the prior's support get -infinity.
std::vector<double> importance_correction(std::span<const double> log_weights, const Prior& prior,
                                          const Prior& sampler, std::span<const ParameterSample> samples);

/// Evaluates the observable function over all draws (OpenMP across samples).
Matrix evaluate_observables(std::span<const ParameterSample> samples, const ObservableFn& fn);

struct VariationalOptions {
  std::size_t rounds = 10;
  std::size_t ensemble_size = 10000;
  double ess_floor_fraction = 0.05;
  double learning_rate = 1.0;
  std::uint64_t seed = 0;
  OptimizerOptions solver;
};

struct RoundDiagnostics {
  std::size_t round = 0;
  double ess = 0.0;
  double max_abs_residual = 0.0;
  bool solver_converged = false;
  std::vector<double> sampler_parameters;
  std::vector<double> lambda;
};

struct VariationalResult {
  LagrangeState state;  // weights are expressed against the true prior
  SamplerState sampler;  // distribution the final ensemble was drawn from
  Ensemble ensemble;
  std::vector<RoundDiagnostics> rounds;
  bool converged = false;
};

/// Alternates sample -> evaluate -> importance-correct -> solve_lambda -> variational_step.
/// Stops once residuals meet the solver tolerance and ESS exceeds the floor.
VariationalResult variational_fit(const Prior& prior, const ObservableFn& observables,
                                  std::span<const Restraint> restraints, const VariationalOptions& options);

/// One JSON object per round.
void write_round_log(std::ostream& out, std::span<const RoundDiagnostics> rounds);

}  // namespace maxent
