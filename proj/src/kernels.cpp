#include "maxent/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace maxent::kernels {

namespace {

std::size_t chunk_count(std::size_t n) { return (n + kReductionChunk - 1) / kReductionChunk; }

// Sums f(i) over [0, n) with the fixed-chunk scheme described in the header.
template <class F>
double chunked_sum(std::size_t n, F&& f) {
  const std::size_t chunks = chunk_count(n);
  std::vector<double> partial(chunks, 0.0);
  const auto count = static_cast<long long>(chunks);
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < count; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t end = std::min(n, begin + kReductionChunk);
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += f(i);
    partial[static_cast<std::size_t>(c)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

// Vector-valued version: acc(i, row) adds sample i's contribution into row[0..width).
template <class F>
std::vector<double> chunked_vector_sum(std::size_t n, std::size_t width, F&& acc) {
  const std::size_t chunks = chunk_count(n);
  std::vector<double> partial(chunks * width, 0.0);
  const auto count = static_cast<long long>(chunks);
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < count; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t end = std::min(n, begin + kReductionChunk);
    double* row = partial.data() + static_cast<std::size_t>(c) * width;
    for (std::size_t i = begin; i < end; ++i) acc(i, row);
  }
  std::vector<double> total(width, 0.0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t k = 0; k < width; ++k) total[k] += partial[c * width + k];
  return total;
}

void check_rows(const Matrix& g, std::size_t n, const char* who) {
  if (g.rows() != n) throw std::invalid_argument(std::string(who) + ": row count mismatch");
}

}  // namespace

void tilt_log_weights(const Matrix& g, std::span<const double> lambda, std::span<const double> base,
                      std::span<double> out) {
  check_rows(g, out.size(), "tilt_log_weights");
  if (lambda.size() != g.cols()) throw std::invalid_argument("tilt_log_weights: lambda size mismatch");
  if (!base.empty() && base.size() != out.size())
    throw std::invalid_argument("tilt_log_weights: base size mismatch");
  const std::size_t cols = g.cols();
  parallel_for(out.size(), [&](std::size_t i) {
    const auto row = g.row(i);
    double acc = base.empty() ? 0.0 : base[i];
    for (std::size_t k = 0; k < cols; ++k) acc -= lambda[k] * row[k];
    out[i] = acc;
  });
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  return mx + std::log(chunked_sum(x.size(), [&](std::size_t i) { return std::exp(x[i] - mx); }));
}

void normalize_log_weights(std::span<double> log_w) {
  const double lse = log_sum_exp(log_w);
  if (!std::isfinite(lse)) throw std::domain_error("normalize_log_weights: weights have no finite mass");
  for (double& v : log_w) v -= lse;
}

void exponentiate(std::span<const double> log_w, std::span<double> w) {
  if (log_w.size() != w.size()) throw std::invalid_argument("exponentiate: size mismatch");
  parallel_for(w.size(), [&](std::size_t i) { w[i] = std::exp(log_w[i]); });
}

double weighted_sum(std::span<const double> values, std::span<const double> w) {
  if (values.size() != w.size()) throw std::invalid_argument("weighted_sum: size mismatch");
  return chunked_sum(values.size(), [&](std::size_t i) { return w[i] == 0.0 ? 0.0 : w[i] * values[i]; });
}

std::vector<double> weighted_column_means(const Matrix& g, std::span<const double> w) {
  check_rows(g, w.size(), "weighted_column_means");
  const std::size_t cols = g.cols();
  return chunked_vector_sum(g.rows(), cols, [&](std::size_t i, double* acc) {
    const auto row = g.row(i);
    for (std::size_t k = 0; k < cols; ++k) acc[k] += w[i] * row[k];
  });
}

void row_combination(const Matrix& g, std::span<const double> r, std::span<double> h) {
  check_rows(g, h.size(), "row_combination");
  if (r.size() != g.cols()) throw std::invalid_argument("row_combination: coefficient size mismatch");
  const std::size_t cols = g.cols();
  parallel_for(h.size(), [&](std::size_t i) {
    const auto row = g.row(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < cols; ++k) acc += r[k] * row[k];
    h[i] = acc;
  });
}

std::vector<double> weighted_cross_covariance(const Matrix& g, std::span<const double> h,
                                              std::span<const double> w,
                                              std::span<const double> means) {
  check_rows(g, w.size(), "weighted_cross_covariance");
  if (h.size() != w.size() || means.size() != g.cols())
    throw std::invalid_argument("weighted_cross_covariance: size mismatch");
  const double h_mean = weighted_sum(h, w);
  const std::size_t cols = g.cols();
  return chunked_vector_sum(g.rows(), cols, [&](std::size_t i, double* acc) {
    const auto row = g.row(i);
    const double dh = w[i] * (h[i] - h_mean);
    for (std::size_t k = 0; k < cols; ++k) acc[k] += dh * (row[k] - means[k]);
  });
}

Matrix weighted_covariance(const Matrix& g, std::span<const double> w, std::span<const double> means) {
  check_rows(g, w.size(), "weighted_covariance");
  const std::size_t cols = g.cols();
  const auto flat = chunked_vector_sum(g.rows(), cols * cols, [&](std::size_t i, double* acc) {
    const auto row = g.row(i);
    for (std::size_t a = 0; a < cols; ++a) {
      const double da = w[i] * (row[a] - means[a]);
      for (std::size_t b = 0; b < cols; ++b) acc[a * cols + b] += da * (row[b] - means[b]);
    }
  });
  Matrix cov(cols, cols);
  std::copy(flat.begin(), flat.end(), cov.data().begin());
  return cov;
}

double sum_of_squares(std::span<const double> w) {
  return chunked_sum(w.size(), [&](std::size_t i) { return w[i] * w[i]; });
}

}  // namespace maxent::kernels
