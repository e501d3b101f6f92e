#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "maxent/distributions.hpp"
#include "maxent/matrix.hpp"

namespace maxent {

/// Smallest value v with cumulative normalized weight of {values <= v} >= q.
double weighted_quantile(std::span<const double> values, std::span<const double> log_weights, double q);

/// -sum w_i ln(M w_i): zero for uniform weights, negative otherwise.
double weight_entropy(std::span<const double> log_weights);

/// -sum w_i ln P(theta_i). Returns +infinity if any weighted sample is outside the support.
double cross_entropy_estimate(std::span<const ParameterSample> samples, std::span<const double> log_weights,
                              const Prior& prior);

/// Differential entropy of the reweighted distribution, for draws taken from `sampler`:
/// the density at theta_i is approximately M w_i P_sampler(theta_i), so
/// h = -sum w_i [ln(M w_i) + ln P_sampler(theta_i)].
double posterior_entropy_estimate(std::span<const ParameterSample> samples, std::span<const double> log_weights,
                                  const Prior& sampler);

struct TrajectoryBand {
  std::vector<double> mean;
  std::vector<double> low;
  std::vector<double> high;
};

inline constexpr double kBandLow = 1.0 / 6.0;
inline constexpr double kBandHigh = 5.0 / 6.0;

/// Per-column weighted mean and quantiles of an M x T matrix.
TrajectoryBand weighted_trajectory_band(const Matrix& trajectories, std::span<const double> log_weights,
                                        double q_low = kBandLow, double q_high = kBandHigh);

/// Silverman's rule with the effective sample size standing in for M.
double silverman_bandwidth(std::span<const double> samples, std::span<const double> log_weights);

/// Weighted Gaussian kernel density evaluated on `grid`.
std::vector<double> kde_1d(std::span<const double> samples, std::span<const double> log_weights,
                           double bandwidth, std::span<const double> grid);

/// Trapezoid rule over a monotone grid.
double trapezoid(std::span<const double> grid, std::span<const double> values);

}  // namespace maxent
