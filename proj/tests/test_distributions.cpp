#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "maxent/distributions.hpp"
#include "oracles.hpp"

using namespace maxent;

namespace {

double sample_mean(const std::vector<ParameterSample>& s, std::size_t d) {
  double m = 0.0;
  for (const auto& x : s) m += x[d];
  return m / static_cast<double>(s.size());
}

double sample_var(const std::vector<ParameterSample>& s, std::size_t d) {
  const double m = sample_mean(s, d);
  double v = 0.0;
  for (const auto& x : s) v += (x[d] - m) * (x[d] - m);
  return v / static_cast<double>(s.size() - 1);
}

// ln P0 for the quadrature oracle.
double log_error_density(const ErrorPrior& e, double eps) {
  if (e.kind == ErrorPrior::Kind::Gaussian)
    return -0.5 * eps * eps / (e.scale * e.scale) - std::log(e.scale * std::sqrt(2.0 * std::numbers::pi));
  return -std::abs(eps) / e.scale - std::log(2.0 * e.scale);
}

// exp(-lambda eps) P0(eps), combined in the exponent so far tails do not overflow.
double tilted_density(const ErrorPrior& e, double lambda, double eps) {
  return std::exp(-lambda * eps + log_error_density(e, eps));
}

// Integration limits wide enough for the tilted density exp(-lambda eps) P0(eps).
std::vector<double> knots(const ErrorPrior& e, double lambda) {
  if (e.kind == ErrorPrior::Kind::Gaussian) {
    const double c = -lambda * e.scale * e.scale;
    return {c - 14.0 * e.scale, c, c + 14.0 * e.scale};
  }
  const double left_rate = (1.0 - lambda * e.scale) / e.scale;
  const double right_rate = (1.0 + lambda * e.scale) / e.scale;
  return {-40.0 / left_rate, 0.0, 40.0 / right_rate};
}

// Relative tolerance: a coarse pass sets the scale of the integral.
template <class F>
double integrate_relative(const F& f, const std::vector<double>& k) {
  const double scale = std::abs(oracle::integrate_pieces(f, k, 1e-6)) + 1e-300;
  return oracle::integrate_pieces(f, k, 1e-13 * scale);
}

double quadrature_log_normalizer(const ErrorPrior& e, double lambda) {
  return std::log(
      integrate_relative([&](double eps) { return tilted_density(e, lambda, eps); }, knots(e, lambda)));
}

double quadrature_tilted_mean(const ErrorPrior& e, double lambda) {
  const auto k = knots(e, lambda);
  const double z = integrate_relative([&](double x) { return tilted_density(e, lambda, x); }, k);
  // The first moment can be near zero, so its tolerance is set by z times the range.
  const double m = oracle::integrate_pieces([&](double x) { return x * tilted_density(e, lambda, x); },
                                            k, 1e-13 * z * (k.back() - k.front()));
  return m / z;
}

}  // namespace

TEST_CASE("gaussian sampling matches its moments") {
  const Prior p = DiagonalGaussianPrior({0.0}, {1.0});
  const auto s = sample(p, 42, 100000);
  CHECK(s.size() == 100000);
  CHECK(std::abs(sample_mean(s, 0)) < 0.02);
  CHECK(std::abs(sample_var(s, 0) - 1.0) < 0.02);
}

TEST_CASE("gravity prior draws are centred on the stated means") {
  const Prior p = DiagonalGaussianPrior({85, 40, 70, 12, -30}, std::vector<double>(5, 50.0));
  const auto s = sample(p, 3, 2048);
  const double centre[] = {85, 40, 70, 12, -30};
  for (std::size_t d = 0; d < 5; ++d) CHECK(std::abs(sample_mean(s, d) - centre[d]) < 1.0);
}

TEST_CASE("sampling is deterministic in the seed") {
  const Prior p = TruncatedNormalPrior({1.0, 0.0}, {2.0, 0.5}, {0.5, -1.0});
  CHECK(sample(p, 9, 500) == sample(p, 9, 500));
  CHECK(sample(p, 9, 500) != sample(p, 10, 500));
}

TEST_CASE("truncated draws respect the bound") {
  const Prior p = TruncatedNormalPrior({2.0}, {1.0}, {0.0});
  const auto s = sample(p, 1, 100000);
  std::size_t below = 0;
  for (const auto& x : s) below += x[0] < 0.0;
  CHECK(below == 0);

  // Far-tail truncation (bound 30 sd above the mean) still yields valid draws.
  const Prior tail = TruncatedNormalPrior({0.0}, {1.0}, {30.0});
  for (const auto& x : sample(tail, 2, 1000)) CHECK(x[0] >= 30.0);
}

TEST_CASE("truncated normal draws match the truncated mean") {
  // E[X | X >= a] for a standard normal = phi(a) / (1 - Phi(a)).
  const double a = 0.7;
  const double expect = std::exp(-0.5 * a * a) / std::sqrt(2 * std::numbers::pi) / (0.5 * std::erfc(a / std::sqrt(2.0)));
  const Prior p = TruncatedNormalPrior({0.0}, {1.0}, {a});
  CHECK(std::abs(sample_mean(sample(p, 5, 200000), 0) - expect) < 0.01);
}

TEST_CASE("log density closed forms") {
  CHECK(log_density(DiagonalGaussianPrior({0}, {1}), std::vector<double>{0.0}) ==
        doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-14));
  CHECK(log_density(DiagonalGaussianPrior({1, 1}, {2, 2}), std::vector<double>{1, 1}) ==
        doctest::Approx(-std::log(2 * std::numbers::pi * 2)).epsilon(1e-14));
  const Prior t = TruncatedNormalPrior({0}, {1}, {0});
  CHECK(log_density(t, std::vector<double>{-1.0}) == -std::numeric_limits<double>::infinity());
  CHECK_FALSE(in_support(t, std::vector<double>{-1.0}));
  CHECK_THROWS_AS(log_density(t, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("truncated normal density integrates to one") {
  struct Case {
    double mean, var, lower;
  };
  for (const auto& c : {Case{0, 1, 0}, Case{2, 1, 0}, Case{0.001, 0.8, 0}, Case{10, 5, 1}, Case{-3, 0.5, 1}}) {
    const Prior p = TruncatedNormalPrior({c.mean}, {c.var}, {c.lower});
    const double sd = std::sqrt(c.var);
    const double hi = std::max(c.lower, c.mean) + 40.0 * sd;
    const double z = oracle::integrate(
        [&](double x) { return std::exp(log_density(p, std::vector<double>{x})); }, c.lower, hi, 1e-12);
    CHECK(z == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("grad_log_density examples") {
  CHECK(grad_log_density(DiagonalGaussianPrior({0}, {1}), std::vector<double>{2.0})[0] == doctest::Approx(-2.0));
  for (double g : grad_log_density(DiagonalGaussianPrior({85, 40, 70, 12, -30}, std::vector<double>(5, 50.0)),
                                   std::vector<double>{85, 40, 70, 12, -30}))
    CHECK(g == 0.0);
  const Prior t = TruncatedNormalPrior({0}, {1}, {0});
  CHECK_THROWS_AS(grad_log_density(t, std::vector<double>{0.0}), std::domain_error);
  CHECK_THROWS_AS(grad_log_density(t, std::vector<double>{-0.5}), std::domain_error);
}

TEST_CASE("grad_log_density matches finite differences on random points") {
  oracle::Gen gen(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = gen.index(1, 4);
    std::vector<double> mean(d), var(d), lower(d), theta(d);
    for (std::size_t k = 0; k < d; ++k) {
      mean[k] = gen.uniform(-5, 5);
      var[k] = gen.uniform(0.2, 10);
      lower[k] = mean[k] + gen.uniform(-3, 1);
      theta[k] = lower[k] + gen.uniform(0.1, 4);
    }
    const Prior p = trial % 2 ? Prior(DiagonalGaussianPrior(mean, var)) : Prior(TruncatedNormalPrior(mean, var, lower));
    const auto g = grad_log_density(p, theta);
    for (std::size_t k = 0; k < d; ++k) {
      auto f = [&](double x) {
        auto t = theta;
        t[k] = x;
        return log_density(p, t);
      };
      const double fd = oracle::central_difference(f, theta[k], 1e-5);
      CHECK(std::abs(g[k] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("parameter gradient matches finite differences, including the truncation normalizer") {
  oracle::Gen gen(12);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> mean{gen.uniform(-2, 3)}, var{gen.uniform(0.3, 4)}, lower{gen.uniform(-2, 2)};
    const double theta = std::max(lower[0], mean[0]) + gen.uniform(0.05, 2);
    const Prior p = trial % 2 ? Prior(DiagonalGaussianPrior(mean, var)) : Prior(TruncatedNormalPrior(mean, var, lower));
    const auto g = grad_log_density_wrt_parameters(p, std::vector<double>{theta});
    const auto params = family_parameters(p);
    REQUIRE(g.size() == 2);
    for (std::size_t j = 0; j < 2; ++j) {
      auto f = [&](double x) {
        auto q = params;
        q[j] = x;
        return log_density(with_family_parameters(p, q), std::vector<double>{theta});
      };
      const double fd = oracle::central_difference(f, params[j], 1e-6);
      CHECK(std::abs(g[j] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("family parameters round trip") {
  const Prior p = TruncatedNormalPrior({1, 2}, {3, 4}, {0, 0});
  CHECK(family_parameters(p) == std::vector<double>{1, 2, 3, 4});
  const auto q = with_family_parameters(p, std::vector<double>{5, 6, 7, 8});
  CHECK(std::get<TruncatedNormalPrior>(q).lower_bound == std::vector<double>{0, 0});
  CHECK(family_parameters(q) == std::vector<double>{5, 6, 7, 8});
  CHECK_THROWS(with_family_parameters(p, std::vector<double>{1, 2, -3, 4}));
}

TEST_CASE("gaussian entropy") {
  CHECK(gaussian_entropy(std::vector<double>{1.0}) == doctest::Approx(0.5 * (1 + std::log(2 * std::numbers::pi))));
}

TEST_CASE("invalid priors are rejected") {
  CHECK_THROWS_AS(DiagonalGaussianPrior({0}, {0}), std::invalid_argument);
  CHECK_THROWS_AS(DiagonalGaussianPrior({0, 1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(TruncatedNormalPrior({0}, {1}, {0, 1}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Error priors

TEST_CASE("tilt integral examples") {
  for (const auto& e : {ErrorPrior::delta(), ErrorPrior::gaussian(2.0), ErrorPrior::laplace(0.3)}) {
    CHECK(tilt_log_normalizer(e, 0.0) == 0.0);
    CHECK(tilted_mean(e, 0.0) == 0.0);
  }
  CHECK(tilt_log_normalizer(ErrorPrior::gaussian(1.0), 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(quadrature_log_normalizer(ErrorPrior::gaussian(1.0), 1.0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(tilt_log_normalizer(ErrorPrior::laplace(0.05), 1.0) == doctest::Approx(-std::log(1 - 0.0025)).epsilon(1e-14));
  CHECK(std::abs(quadrature_log_normalizer(ErrorPrior::laplace(0.05), 1.0) - 0.0025031) < 1e-7);
  CHECK(tilted_mean(ErrorPrior::gaussian(2.0), 0.5) == doctest::Approx(-2.0));
  CHECK(quadrature_tilted_mean(ErrorPrior::gaussian(2.0), 0.5) == doctest::Approx(-2.0).epsilon(1e-8));
  CHECK(tilted_mean(ErrorPrior::laplace(0.01), 10.0) == doctest::Approx(-2.0202020202e-3).epsilon(1e-9));
  CHECK(quadrature_tilted_mean(ErrorPrior::laplace(0.01), 10.0) == doctest::Approx(-2.0202e-3).epsilon(1e-4));
  CHECK(tilted_mean_derivative(ErrorPrior::delta(), 3.0) == 0.0);
  CHECK(tilted_mean_derivative(ErrorPrior::gaussian(3.0), 7.0) == -9.0);
}

TEST_CASE("laplace tilt outside its domain names the bound") {
  const auto e = ErrorPrior::laplace(0.5);
  CHECK(e.lambda_bound() == 2.0);
  CHECK_FALSE(e.in_domain(2.0));
  CHECK_THROWS_AS(tilt_log_normalizer(e, 2.0), TiltDomainError);
  CHECK_THROWS_AS(tilted_mean(e, -2.5), TiltDomainError);
  CHECK_THROWS_AS(tilted_mean_derivative(e, 3.0), TiltDomainError);
  try {
    tilt_log_normalizer(e, 2.0);
  } catch (const TiltDomainError& err) {
    CHECK(std::string(err.what()).find("1/b = 2") != std::string::npos);
  }
  CHECK_THROWS_AS(ErrorPrior::gaussian(0.0), std::invalid_argument);
  CHECK_THROWS_AS(ErrorPrior::laplace(-1.0), std::invalid_argument);
}

TEST_CASE("closed-form tilt integrals agree with quadrature on random lambda") {
  oracle::Gen gen(3);
  for (const auto& e : {ErrorPrior::gaussian(0.7), ErrorPrior::gaussian(2.5), ErrorPrior::laplace(0.05),
                        ErrorPrior::laplace(0.8)}) {
    const double bound = std::isfinite(e.lambda_bound()) ? 0.95 * e.lambda_bound() : 3.0 / e.scale;
    for (int i = 0; i < 50; ++i) {
      const double lambda = gen.uniform(-bound, bound);
      CHECK(std::abs(tilt_log_normalizer(e, lambda) - quadrature_log_normalizer(e, lambda)) < 1e-8);
      CHECK(std::abs(tilted_mean(e, lambda) - quadrature_tilted_mean(e, lambda)) < 1e-6);
    }
  }
}

TEST_CASE("tilted mean is minus the derivative of the log normalizer and is non-increasing") {
  oracle::Gen gen(4);
  for (const auto& e : {ErrorPrior::gaussian(1.3), ErrorPrior::laplace(0.05), ErrorPrior::laplace(0.2)}) {
    const double bound = std::isfinite(e.lambda_bound()) ? 0.9 * e.lambda_bound() : 5.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 40; ++i) {
      const double lambda = -bound + 2.0 * bound * i / 40.0;
      const double fd = -oracle::central_difference([&](double l) { return tilt_log_normalizer(e, l); }, lambda, 1e-5);
      CHECK(std::abs(tilted_mean(e, lambda) - fd) < 1e-5);
      const double d = tilted_mean_derivative(e, lambda);
      const double fd2 = oracle::central_difference([&](double l) { return tilted_mean(e, l); }, lambda, 1e-6);
      CHECK(oracle::relative_error(d, fd2) < 1e-6);
      CHECK(tilted_mean(e, lambda) <= prev);
      prev = tilted_mean(e, lambda);
    }
  }
  const auto lap = ErrorPrior::laplace(0.05);
  const double fd = oracle::central_difference([&](double l) { return tilted_mean(lap, l); }, 2.0, 1e-6);
  CHECK(oracle::relative_error(tilted_mean_derivative(lap, 2.0), fd) < 1e-6);
}
