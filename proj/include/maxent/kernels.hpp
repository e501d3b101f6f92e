#pragma once

// Data-parallel inner loops of the reweighting solver.
//
// maxent::kernels       OpenMP implementations used by the library.
// maxent::kernels::serial  plain loops kept as the reference for tests and the benchmark.
//
// Reductions in the OpenMP path split the sample axis into fixed chunks of
// kReductionChunk rows, reduce each chunk sequentially, then add the chunk
// partials in order on one thread. The result therefore does not depend on the
// number of threads or the schedule.

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include "maxent/matrix.hpp"

namespace maxent::kernels {

inline constexpr std::size_t kReductionChunk = 1024;

/// out_i = base_i - sum_k lambda_k * g(i, k). `base` may be empty (treated as zero).
void tilt_log_weights(const Matrix& g, std::span<const double> lambda, std::span<const double> base,
                      std::span<double> out);

double log_sum_exp(std::span<const double> x);

/// Shift in place so that log_sum_exp(log_w) == 0.
void normalize_log_weights(std::span<double> log_w);

/// w_i = exp(log_w_i)
void exponentiate(std::span<const double> log_w, std::span<double> w);

double weighted_sum(std::span<const double> values, std::span<const double> w);

/// sum_i w_i * g(i, k) for every column k.
std::vector<double> weighted_column_means(const Matrix& g, std::span<const double> w);

/// h_i = sum_k r_k * g(i, k)
void row_combination(const Matrix& g, std::span<const double> r, std::span<double> h);

/// Cov_w(h, g_k) for every column k; `means` are the weighted column means of g.
std::vector<double> weighted_cross_covariance(const Matrix& g, std::span<const double> h,
                                              std::span<const double> w,
                                              std::span<const double> means);

/// Full weighted covariance of the columns of g.
Matrix weighted_covariance(const Matrix& g, std::span<const double> w, std::span<const double> means);

double sum_of_squares(std::span<const double> w);

namespace serial {

void tilt_log_weights(const Matrix& g, std::span<const double> lambda, std::span<const double> base,
                      std::span<double> out);
double log_sum_exp(std::span<const double> x);
void normalize_log_weights(std::span<double> log_w);
void exponentiate(std::span<const double> log_w, std::span<double> w);
double weighted_sum(std::span<const double> values, std::span<const double> w);
std::vector<double> weighted_column_means(const Matrix& g, std::span<const double> w);
void row_combination(const Matrix& g, std::span<const double> r, std::span<double> h);
std::vector<double> weighted_cross_covariance(const Matrix& g, std::span<const double> h,
                                              std::span<const double> w,
                                              std::span<const double> means);
Matrix weighted_covariance(const Matrix& g, std::span<const double> w, std::span<const double> means);
double sum_of_squares(std::span<const double> w);

}  // namespace serial

/// Runs body(i) for i in [0, n) across OpenMP threads. Each index is written by
/// exactly one thread, so output order is deterministic. The first exception
/// thrown by any iteration is rethrown on the calling thread.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const auto count = static_cast<long long>(n);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(maxent_parallel_for_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace maxent::kernels
