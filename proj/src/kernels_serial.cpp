#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "maxent/kernels.hpp"

namespace maxent::kernels::serial {

void tilt_log_weights(const Matrix& g, std::span<const double> lambda, std::span<const double> base,
                      std::span<double> out) {
  if (g.rows() != out.size() || lambda.size() != g.cols() || (!base.empty() && base.size() != out.size()))
    throw std::invalid_argument("serial::tilt_log_weights: size mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = base.empty() ? 0.0 : base[i];
    for (std::size_t k = 0; k < g.cols(); ++k) acc -= lambda[k] * g(i, k);
    out[i] = acc;
  }
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

void normalize_log_weights(std::span<double> log_w) {
  const double lse = log_sum_exp(log_w);
  if (!std::isfinite(lse)) throw std::domain_error("serial::normalize_log_weights: no finite mass");
  for (double& v : log_w) v -= lse;
}

void exponentiate(std::span<const double> log_w, std::span<double> w) {
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i]);
}

double weighted_sum(std::span<const double> values, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (w[i] != 0.0) s += w[i] * values[i];
  return s;
}

std::vector<double> weighted_column_means(const Matrix& g, std::span<const double> w) {
  std::vector<double> m(g.cols(), 0.0);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t k = 0; k < g.cols(); ++k) m[k] += w[i] * g(i, k);
  return m;
}

void row_combination(const Matrix& g, std::span<const double> r, std::span<double> h) {
  for (std::size_t i = 0; i < g.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < g.cols(); ++k) acc += r[k] * g(i, k);
    h[i] = acc;
  }
}

std::vector<double> weighted_cross_covariance(const Matrix& g, std::span<const double> h,
                                              std::span<const double> w,
                                              std::span<const double> means) {
  const double h_mean = weighted_sum(h, w);
  std::vector<double> c(g.cols(), 0.0);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t k = 0; k < g.cols(); ++k) c[k] += w[i] * (h[i] - h_mean) * (g(i, k) - means[k]);
  return c;
}

Matrix weighted_covariance(const Matrix& g, std::span<const double> w, std::span<const double> means) {
  Matrix cov(g.cols(), g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t a = 0; a < g.cols(); ++a)
      for (std::size_t b = 0; b < g.cols(); ++b)
        cov(a, b) += w[i] * (g(i, a) - means[a]) * (g(i, b) - means[b]);
  return cov;
}

double sum_of_squares(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return s;
}

}  // namespace maxent::kernels::serial
