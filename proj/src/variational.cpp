#include "maxent/variational.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <json.hpp>

#include "maxent/kernels.hpp"
#include "maxent/random.hpp"

namespace maxent {

SamplerState variational_step(const SamplerState& state, const Ensemble& ensemble,
                              const LagrangeState& lagrange, double eta) {
  if (ensemble.samples.size() != lagrange.log_weights.size())
    throw std::invalid_argument("variational_step: ensemble and weights disagree on M");
  if (!(eta >= 0.0)) throw std::invalid_argument("variational_step: learning rate must be >= 0");

  const std::size_t d = dimension(state.sampler);
  const auto params = family_parameters(state.sampler);
  std::vector<double> w(lagrange.log_weights.size());
  kernels::exponentiate(lagrange.log_weights, w);

  // Gradient of the weighted log-likelihood of the draws under the sampler.
  Matrix per_sample(ensemble.samples.size(), 2 * d);
  kernels::parallel_for(ensemble.samples.size(), [&](std::size_t i) {
    if (w[i] == 0.0) return;
    const auto g = grad_log_density_wrt_parameters(state.sampler, ensemble.samples[i]);
    std::copy(g.begin(), g.end(), per_sample.row(i).begin());
  });
  const auto grad = kernels::weighted_column_means(per_sample, w);

  SamplerState next = state;
  next.iteration = state.iteration + 1;
  double step = eta;
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<double> candidate(params);
    for (std::size_t j = 0; j < candidate.size(); ++j) candidate[j] += step * grad[j];
    bool ok = true;
    for (std::size_t j = 0; j < candidate.size(); ++j) ok = ok && std::isfinite(candidate[j]);
    for (std::size_t j = d; j < 2 * d; ++j) ok = ok && candidate[j] > 0.0;
    if (ok) {
      next.sampler = with_family_parameters(state.sampler, candidate);
      next.learning_rate = step;
      return next;
    }
    step *= 0.5;
  }
  // Every halving failed: keep the sampler where it is.
  next.learning_rate = 0.0;
  return next;
}

std::vector<double> importance_correction(std::span<const double> log_weights, const Prior& prior,
                                          const Prior& sampler, std::span<const ParameterSample> samples) {
  if (log_weights.size() != samples.size())
    throw std::invalid_argument("importance_correction: weights and samples disagree on M");
  std::vector<double> out(samples.size());
  kernels::parallel_for(samples.size(), [&](std::size_t i) {
    const double lp = log_density(prior, samples[i]);
    const double ls = log_density(sampler, samples[i]);
    if (!std::isfinite(lp) || !std::isfinite(ls) || !std::isfinite(log_weights[i]))
      out[i] = -std::numeric_limits<double>::infinity();
    else
      out[i] = log_weights[i] + lp - ls;
  });
  kernels::normalize_log_weights(out);
  return out;
}

Matrix evaluate_observables(std::span<const ParameterSample> samples, const ObservableFn& fn) {
  if (samples.empty()) throw std::invalid_argument("evaluate_observables: no samples");
  const auto first = fn(samples[0]);
  Matrix g(samples.size(), first.size());
  std::copy(first.begin(), first.end(), g.row(0).begin());
  kernels::parallel_for(samples.size() - 1, [&](std::size_t k) {
    const std::size_t i = k + 1;
    const auto values = fn(samples[i]);
    if (values.size() != first.size())
      throw std::runtime_error("observable function returned inconsistent lengths");
    std::copy(values.begin(), values.end(), g.row(i).begin());
  });
  return g;
}

VariationalResult variational_fit(const Prior& prior, const ObservableFn& observables,
                                  std::span<const Restraint> restraints, const VariationalOptions& options) {
  if (options.rounds < 1) throw std::invalid_argument("variational_fit: rounds must be >= 1");
  if (options.ensemble_size < 2) throw std::invalid_argument("variational_fit: ensemble_size must be >= 2");
  const double ess_floor = options.ess_floor_fraction * static_cast<double>(options.ensemble_size);

  VariationalResult result{.state = {}, .sampler = SamplerState{prior, 0, {}, options.learning_rate},
                           .ensemble = {}, .rounds = {}, .converged = false};
  const auto prior_params = family_parameters(prior);

  for (std::size_t round = 0; round < options.rounds; ++round) {
    const Prior& sampler = result.sampler.sampler;
    Ensemble ensemble;
    ensemble.samples =
        sample(sampler, stream_seed(options.seed, "variational-round-" + std::to_string(round)), options.ensemble_size);
    ensemble.observables = evaluate_observables(ensemble.samples, observables);
    // Draws from the prior itself need no correction.
    if (family_parameters(sampler) != prior_params) {
      const std::vector<double> uniform(ensemble.samples.size(), 0.0);
      ensemble.base_log_weights = importance_correction(uniform, prior, sampler, ensemble.samples);
    }

    auto state = solve_lambda(ensemble, restraints, options.solver);
    const double ess = effective_sample_size(state.log_weights);
    result.sampler.ess_history.push_back(ess);
    result.rounds.push_back({round, ess, state.max_abs_residual(), state.converged,
                             family_parameters(sampler), state.lambda});

    const bool done = state.converged && ess > ess_floor;
    const bool last = round + 1 == options.rounds;
    if (done || last) {
      result.converged = done;
      result.state = std::move(state);
      result.ensemble = std::move(ensemble);
      break;
    }
    const double eta = result.sampler.learning_rate > 0.0 ? result.sampler.learning_rate : options.learning_rate;
    result.sampler = variational_step(result.sampler, ensemble, state, eta);
  }
  return result;
}

void write_round_log(std::ostream& out, std::span<const RoundDiagnostics> rounds) {
  for (const auto& r : rounds) {
    nlohmann::ordered_json j;
    j["round"] = r.round;
    j["ess"] = r.ess;
    j["max_abs_residual"] = r.max_abs_residual;
    j["solver_converged"] = r.solver_converged;
    j["sampler_parameters"] = r.sampler_parameters;
    j["lambda"] = r.lambda;
    out << j.dump() << '\n';
  }
}

}  // namespace maxent
