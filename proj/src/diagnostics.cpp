#include "maxent/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "maxent/kernels.hpp"
#include "maxent/maxent_core.hpp"

namespace maxent {

namespace {

std::vector<double> normalized_weights(std::span<const double> log_weights) {
  std::vector<double> lw(log_weights.begin(), log_weights.end());
  kernels::normalize_log_weights(lw);
  std::vector<double> w(lw.size());
  kernels::exponentiate(lw, w);
  return w;
}

double quantile_sorted(std::span<const double> values, std::span<const double> w,
                       std::span<const std::size_t> order, double q) {
  // Tolerance absorbs rounding in the running sum, e.g. 50 * 0.01 vs 0.5.
  const double target = q - 1e-12;
  double cumulative = 0.0;
  for (std::size_t idx : order) {
    cumulative += w[idx];
    if (cumulative >= target && w[idx] > 0.0) return values[idx];
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (w[*it] > 0.0) return values[*it];
  return values[order.back()];
}

std::vector<std::size_t> sort_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return order;
}

}  // namespace

double weighted_quantile(std::span<const double> values, std::span<const double> log_weights, double q) {
  if (values.empty()) throw std::invalid_argument("weighted_quantile: no values");
  if (values.size() != log_weights.size()) throw std::invalid_argument("weighted_quantile: size mismatch");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("weighted_quantile: q must lie in [0, 1]");
  const auto w = normalized_weights(log_weights);
  const auto order = sort_order(values);
  // q = 0 is the smallest value carrying weight.
  return quantile_sorted(values, w, order, q);
}

double weight_entropy(std::span<const double> log_weights) {
  const auto w = normalized_weights(log_weights);
  const double log_m = std::log(static_cast<double>(w.size()));
  double h = 0.0;
  for (double wi : w)
    if (wi > 0.0) h -= wi * (std::log(wi) + log_m);
  return h;
}

double cross_entropy_estimate(std::span<const ParameterSample> samples, std::span<const double> log_weights,
                              const Prior& prior) {
  if (samples.size() != log_weights.size()) throw std::invalid_argument("cross_entropy_estimate: size mismatch");
  const auto w = normalized_weights(log_weights);
  double h = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double lp = log_density(prior, samples[i]);
    if (!std::isfinite(lp)) return std::numeric_limits<double>::infinity();
    h -= w[i] * lp;
  }
  return h;
}

double posterior_entropy_estimate(std::span<const ParameterSample> samples, std::span<const double> log_weights,
                                  const Prior& sampler) {
  return cross_entropy_estimate(samples, log_weights, sampler) + weight_entropy(log_weights);
}

TrajectoryBand weighted_trajectory_band(const Matrix& trajectories, std::span<const double> log_weights,
                                        double q_low, double q_high) {
  if (trajectories.rows() != log_weights.size())
    throw std::invalid_argument("weighted_trajectory_band: trajectories and weights disagree on M");
  if (trajectories.rows() == 0) throw std::invalid_argument("weighted_trajectory_band: empty ensemble");
  const auto w = normalized_weights(log_weights);
  const std::size_t t_count = trajectories.cols();
  TrajectoryBand band{std::vector<double>(t_count), std::vector<double>(t_count), std::vector<double>(t_count)};
  kernels::parallel_for(t_count, [&](std::size_t t) {
    const auto column = trajectories.column(t);
    band.mean[t] = kernels::serial::weighted_sum(column, w);
    const auto order = sort_order(column);
    band.low[t] = quantile_sorted(column, w, order, q_low);
    band.high[t] = quantile_sorted(column, w, order, q_high);
  });
  return band;
}

double silverman_bandwidth(std::span<const double> samples, std::span<const double> log_weights) {
  const auto w = normalized_weights(log_weights);
  const double mean = kernels::serial::weighted_sum(samples, w);
  double var = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) var += w[i] * (samples[i] - mean) * (samples[i] - mean);
  const double sd = std::sqrt(var);
  const double iqr = weighted_quantile(samples, log_weights, 0.75) - weighted_quantile(samples, log_weights, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = 1.0;
  const double ess = 1.0 / kernels::serial::sum_of_squares(w);
  return 0.9 * spread * std::pow(ess, -0.2);
}

std::vector<double> kde_1d(std::span<const double> samples, std::span<const double> log_weights,
                           double bandwidth, std::span<const double> grid) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kde_1d: bandwidth must be > 0");
  if (samples.size() != log_weights.size()) throw std::invalid_argument("kde_1d: size mismatch");
  const auto w = normalized_weights(log_weights);
  const double norm = 1.0 / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> density(grid.size());
  kernels::parallel_for(grid.size(), [&](std::size_t gi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (w[i] == 0.0) continue;
      const double z = (grid[gi] - samples[i]) / bandwidth;
      acc += w[i] * std::exp(-0.5 * z * z);
    }
    density[gi] = acc * norm;
  });
  return density;
}

double trapezoid(std::span<const double> grid, std::span<const double> values) {
  if (grid.size() != values.size()) throw std::invalid_argument("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) s += 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
  return s;
}

}  // namespace maxent
