#include "maxent/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "maxent/kernels.hpp"

namespace maxent {

void AbcOptions::validate() const {
  if (n_simulations < 1) throw std::invalid_argument("abc: n_simulations must be >= 1");
  if (!(acceptance_quantile > 0.0 && acceptance_quantile <= 1.0))
    throw std::invalid_argument("abc: acceptance_quantile must lie in (0, 1]");
  if (acceptance_quantile * static_cast<double>(n_simulations) < 1.0)
    throw std::invalid_argument("abc: acceptance_quantile * n_simulations must be >= 1");
}

AbcResult rejection_abc(const Prior& prior, const ObservableFn& observables, std::span<const double> targets,
                        const AbcOptions& options, std::uint64_t seed) {
  options.validate();
  const auto draws = sample(prior, seed, options.n_simulations);
  std::vector<double> distance(draws.size());
  kernels::parallel_for(draws.size(), [&](std::size_t i) {
    const auto g = observables(draws[i]);
    if (g.size() != targets.size()) throw std::invalid_argument("abc: observable/target length mismatch");
    double d2 = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) d2 += (g[k] - targets[k]) * (g[k] - targets[k]);
    distance[i] = std::isfinite(d2) ? std::sqrt(d2) : std::numeric_limits<double>::infinity();
  });

  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(options.acceptance_quantile * static_cast<double>(draws.size()) + 1e-9)));
  std::vector<std::size_t> order(draws.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return distance[a] < distance[b]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());

  AbcResult out;
  for (std::size_t i : order) {
    out.accepted.push_back(draws[i]);
    out.distances.push_back(distance[i]);
    out.threshold = std::max(out.threshold, distance[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Vertex {
  std::vector<double> x;
  double f;
};

double safe_eval(const std::function<double(std::span<const double>)>& f, std::span<const double> x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::span<const double> x0, const NelderMeadOptions& options) {
  const std::size_t n = x0.size();
  if (n == 0) throw std::invalid_argument("nelder_mead: empty starting point");

  std::vector<Vertex> simplex;
  simplex.push_back({std::vector<double>(x0.begin(), x0.end()), safe_eval(f, x0)});
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> x(x0.begin(), x0.end());
    x[j] = x[j] != 0.0 ? 1.05 * x[j] : 2.5e-4;
    const double fx = safe_eval(f, x);
    simplex.push_back({std::move(x), fx});
  }

  NelderMeadResult res;
  auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
  std::vector<double> centroid(n), trial(n), trial2(n);

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    std::stable_sort(simplex.begin(), simplex.end(), by_value);

    double x_spread = 0.0;
    for (std::size_t v = 1; v <= n; ++v)
      for (std::size_t j = 0; j < n; ++j)
        x_spread = std::max(x_spread, std::abs(simplex[v].x[j] - simplex[0].x[j]));
    const double f_spread = simplex[n].f - simplex[0].f;
    if (std::isfinite(f_spread) && f_spread <= options.f_tolerance &&
        x_spread <= options.x_tolerance) {
      res.converged = true;
      break;
    }
    if (x_spread == 0.0) {
      res.collapsed = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[v].x[j] / static_cast<double>(n);
    const Vertex& worst = simplex[n];

    for (std::size_t j = 0; j < n; ++j) trial[j] = centroid[j] + options.reflection * (centroid[j] - worst.x[j]);
    const double f_reflect = safe_eval(f, trial);

    if (f_reflect < simplex[0].f) {
      for (std::size_t j = 0; j < n; ++j) trial2[j] = centroid[j] + options.expansion * (trial[j] - centroid[j]);
      const double f_expand = safe_eval(f, trial2);
      if (f_expand < f_reflect)
        simplex[n] = {trial2, f_expand};
      else
        simplex[n] = {trial, f_reflect};
      continue;
    }
    if (f_reflect < simplex[n - 1].f) {
      simplex[n] = {trial, f_reflect};
      continue;
    }
    // Contraction, outside if the reflection improved on the worst point.
    const bool outside = f_reflect < worst.f;
    const auto& toward = outside ? trial : worst.x;
    for (std::size_t j = 0; j < n; ++j) trial2[j] = centroid[j] + options.contraction * (toward[j] - centroid[j]);
    const double f_contract = safe_eval(f, trial2);
    if (f_contract < std::min(f_reflect, worst.f)) {
      simplex[n] = {trial2, f_contract};
      continue;
    }
    for (std::size_t v = 1; v <= n; ++v) {
      for (std::size_t j = 0; j < n; ++j)
        simplex[v].x[j] = simplex[0].x[j] + options.shrink * (simplex[v].x[j] - simplex[0].x[j]);
      simplex[v].f = safe_eval(f, simplex[v].x);
    }
  }
  std::stable_sort(simplex.begin(), simplex.end(), by_value);
  res.minimizer = simplex[0].x;
  res.minimum = simplex[0].f;
  return res;
}

LeastSquaresResult least_squares_fit(const ObservableFn& observables, std::span<const double> targets,
                                     std::span<const double> initial_params, const NelderMeadOptions& options) {
  const std::vector<double> goal(targets.begin(), targets.end());
  auto objective = [&](std::span<const double> theta) {
    std::vector<double> g;
    try {
      g = observables(theta);
    } catch (const std::invalid_argument&) {
      return std::numeric_limits<double>::infinity();
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::infinity();
    }
    if (g.size() != goal.size()) throw std::invalid_argument("least_squares_fit: observable/target length mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) s += (g[k] - goal[k]) * (g[k] - goal[k]);
    return s;
  };

  auto nm = nelder_mead(objective, initial_params, options);
  LeastSquaresResult out;
  if (nm.collapsed) {
    // Restart once from a perturbed copy of the initial point.
    std::vector<double> x0(initial_params.begin(), initial_params.end());
    for (std::size_t j = 0; j < x0.size(); ++j) x0[j] += (j % 2 == 0 ? 1.0 : -1.0) * 0.1 * std::max(1e-3, std::abs(x0[j]));
    nm = nelder_mead(objective, x0, options);
    out.restarted = true;
    out.flagged = nm.collapsed;
  }
  out.params = nm.minimizer;
  out.residual = nm.minimum;
  out.iterations = nm.iterations;
  out.converged = nm.converged;
  return out;
}

// ---------------------------------------------------------------------------

double GaussianPosterior::log_density(double r) const {
  const double d = r - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - 0.5 * d * d / variance;
}

double GaussianPosterior::entropy() const {
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

GaussianPosterior bayes_toy_posterior(double prior_mean, double prior_var, double observation, double noise_var) {
  if (!(prior_var > 0.0) || !(noise_var > 0.0))
    throw std::invalid_argument("bayes_toy_posterior: variances must be > 0");
  const double var = 1.0 / (1.0 / noise_var + 1.0 / prior_var);
  return {var * (observation / noise_var + prior_mean / prior_var), var};
}

GaussianPosterior maxent_toy_posterior(double /*prior_mean*/, double prior_var, double observation) {
  if (!(prior_var > 0.0)) throw std::invalid_argument("maxent_toy_posterior: variance must be > 0");
  return {observation, prior_var};
}

double bayes_matching_noise_variance(double prior_mean, double prior_var, double observation,
                                     double match_tolerance) {
  if (!(prior_var > 0.0) || !(match_tolerance > 0.0))
    throw std::invalid_argument("bayes_matching_noise_variance: prior_var and match_tolerance must be > 0");
  // |posterior mean - r_bar| = |r_bar - r_hat| * s / (theta + s) <= tol
  const double gap = std::abs(observation - prior_mean);
  if (gap <= match_tolerance) return prior_var;
  return std::min(prior_var, match_tolerance * prior_var / (gap - match_tolerance));
}

}  // namespace maxent
