#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include <omp.h>

#include "maxent/kernels.hpp"
#include "oracles.hpp"

using namespace maxent;

namespace {

// Bitwise within one reduction chunk; above that the chunked sum reassociates the
// serial loop, so agreement is to rounding.
bool same(double a, double b, std::size_t m) {
  if (m <= kernels::kReductionChunk) return a == b;
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
}

bool same(const std::vector<double>& a, const std::vector<double>& b, std::size_t m) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same(a[i], b[i], m)) return false;
  return true;
}

bool same(const Matrix& a, const Matrix& b, std::size_t m) {
  return a.rows() == b.rows() && same(std::vector<double>(a.data().begin(), a.data().end()),
                                      std::vector<double>(b.data().begin(), b.data().end()), m);
}

std::vector<double> random_log_weights(oracle::Gen& gen, std::size_t m) {
  auto lw = gen.vector(m, 3.0);
  kernels::serial::normalize_log_weights(lw);
  return lw;
}

}  // namespace

TEST_CASE("OpenMP kernels agree with the serial reference") {
  oracle::Gen gen(21);
  // Sizes straddle the reduction chunk so both the single- and multi-chunk paths run.
  for (std::size_t m : {1u, 7u, 1023u, 1024u, 1025u, 5000u}) {
    const std::size_t n = gen.index(1, 6);
    const auto g = gen.matrix(m, n, 4.0);
    const auto lambda = gen.vector(n, 0.3);
    const auto base = gen.vector(m, 0.5);

    std::vector<double> a(m), b(m);
    kernels::tilt_log_weights(g, lambda, base, a);
    kernels::serial::tilt_log_weights(g, lambda, base, b);
    CHECK(a == b);
    kernels::tilt_log_weights(g, lambda, {}, a);
    kernels::serial::tilt_log_weights(g, lambda, {}, b);
    CHECK(a == b);

    CHECK(same(kernels::log_sum_exp(a), kernels::serial::log_sum_exp(a), m));
    kernels::normalize_log_weights(a);
    kernels::serial::normalize_log_weights(b);
    CHECK(same(a, b, m));

    // Same input for the remaining kernels so only their own arithmetic is compared.
    std::vector<double> wa(m), wb(m);
    kernels::exponentiate(a, wa);
    kernels::serial::exponentiate(a, wb);
    CHECK(wa == wb);

    const auto v = gen.vector(m);
    CHECK(same(kernels::weighted_sum(v, wa), kernels::serial::weighted_sum(v, wb), m));
    const auto ma = kernels::weighted_column_means(g, wa);
    CHECK(same(ma, kernels::serial::weighted_column_means(g, wb), m));

    const auto r = gen.vector(n);
    std::vector<double> ha(m), hb(m);
    kernels::row_combination(g, r, ha);
    kernels::serial::row_combination(g, r, hb);
    CHECK(ha == hb);

    CHECK(same(kernels::weighted_cross_covariance(g, ha, wa, ma), kernels::serial::weighted_cross_covariance(g, hb, wb, ma), m));
    CHECK(same(kernels::weighted_covariance(g, wa, ma), kernels::serial::weighted_covariance(g, wb, ma), m));
    CHECK(same(kernels::sum_of_squares(wa), kernels::serial::sum_of_squares(wb), m));
  }
}

TEST_CASE("reductions do not depend on the thread count") {
  oracle::Gen gen(22);
  const auto g = gen.matrix(20000, 3);
  const auto lw = random_log_weights(gen, 20000);
  std::vector<double> w(lw.size());
  kernels::exponentiate(lw, w);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = kernels::weighted_column_means(g, w);
  const double lse1 = kernels::log_sum_exp(lw);
  omp_set_num_threads(4);
  const auto four = kernels::weighted_column_means(g, w);
  const double lse4 = kernels::log_sum_exp(lw);
  omp_set_num_threads(saved);
  CHECK(one == four);
  CHECK(lse1 == lse4);
}

TEST_CASE("log_sum_exp is stable and handles -infinity") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(kernels::log_sum_exp(std::vector<double>{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(kernels::log_sum_exp(std::vector<double>{-1000.0, -1000.0}) == doctest::Approx(-1000.0 + std::log(2.0)));
  CHECK(kernels::log_sum_exp(std::vector<double>{-inf, 0.0}) == 0.0);
  CHECK(kernels::log_sum_exp(std::vector<double>{-inf, -inf}) == -inf);
}

TEST_CASE("normalized log weights sum to one") {
  oracle::Gen gen(23);
  for (int t = 0; t < 20; ++t) {
    auto lw = gen.vector(gen.index(1, 3000), 50.0);
    kernels::normalize_log_weights(lw);
    std::vector<double> w(lw.size());
    kernels::exponentiate(lw, w);
    double s = 0.0;
    for (double x : w) s += x;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("weighted covariance matches a direct two-pass computation") {
  oracle::Gen gen(24);
  const auto g = gen.matrix(300, 3);
  const auto lw = random_log_weights(gen, 300);
  std::vector<double> w(300);
  kernels::exponentiate(lw, w);
  const auto mean = kernels::weighted_column_means(g, w);
  const auto cov = kernels::weighted_covariance(g, w, mean);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < 300; ++i) s += w[i] * (g(i, a) - mean[a]) * (g(i, b) - mean[b]);
      CHECK(cov(a, b) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("parallel_for rethrows exceptions from iterations") {
  CHECK_THROWS_AS(kernels::parallel_for(100,
                                        [](std::size_t i) {
                                          if (i == 37) throw std::runtime_error("boom");
                                        }),
                  std::runtime_error);
}
