#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "maxent/diagnostics.hpp"
#include "maxent/distributions.hpp"
#include "maxent/maxent_core.hpp"
#include "oracles.hpp"

using namespace maxent;

namespace {

Ensemble identity_ensemble(std::size_t m, std::uint64_t seed) {
  Ensemble e;
  e.samples = sample(DiagonalGaussianPrior({0.0}, {1.0}), seed, m);
  e.observables = Matrix(m, 1);
  for (std::size_t i = 0; i < m; ++i) e.observables(i, 0) = e.samples[i][0];
  return e;
}

double sum_exp(const std::vector<double>& lw) {
  double s = 0.0;
  for (double v : lw) s += std::exp(v);
  return s;
}

ErrorPrior random_error(oracle::Gen& gen) {
  switch (gen.index(0, 2)) {
    case 0: return ErrorPrior::delta();
    case 1: return ErrorPrior::gaussian(gen.uniform(0.2, 2.0));
    default: return ErrorPrior::laplace(gen.uniform(0.05, 0.5));
  }
}

}  // namespace

TEST_CASE("compute_log_weights examples") {
  Matrix g(2, 1);
  g(1, 0) = 1.0;
  const auto uni = compute_log_weights(g, std::vector<double>{0.0});
  CHECK(std::exp(uni[0]) == doctest::Approx(0.5));
  const auto lw = compute_log_weights(g, std::vector<double>{std::log(3.0)});
  CHECK(std::exp(lw[0]) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(std::exp(lw[1]) == doctest::Approx(0.25).epsilon(1e-14));

  oracle::Gen gen(1);
  for (int t = 0; t < 20; ++t) {
    const auto gm = gen.matrix(gen.index(2, 500), 3, 10.0);
    CHECK(std::abs(sum_exp(compute_log_weights(gm, gen.vector(3, 2.0))) - 1.0) < 1e-12);
  }
}

TEST_CASE("compute_log_weights rejects out-of-domain lambda") {
  auto e = identity_ensemble(10, 1);
  const std::vector<Restraint> r{{0, 0.0, ErrorPrior::laplace(0.5)}};
  CHECK_THROWS_AS(compute_log_weights(e, r, std::vector<double>{2.0}), TiltDomainError);
}

TEST_CASE("weighted_expectation examples") {
  CHECK(weighted_expectation(std::vector<double>{1, 2, 3}, std::vector<double>(3, -std::log(3.0))) ==
        doctest::Approx(2.0));
  CHECK(weighted_expectation(std::vector<double>{0, 1}, std::vector<double>{std::log(0.75), std::log(0.25)}) ==
        doctest::Approx(0.25));
  const auto e = identity_ensemble(100000, 2);
  const auto lw = compute_log_weights(e.observables, std::vector<double>{-0.5});
  CHECK(std::abs(weighted_expectation(e.observables.column(0), lw) - 0.5) < 0.02);
}

TEST_CASE("constraint_residuals examples") {
  auto e = identity_ensemble(100000, 3);
  const double mean = weighted_expectation(e.observables.column(0), std::vector<double>(e.size(), 0.0));
  CHECK(std::abs(constraint_residuals(e, std::vector<Restraint>{{0, mean, ErrorPrior::delta()}}, std::vector<double>{0.0})[0]) < 1e-12);
  const auto lw = compute_log_weights(e.observables, std::vector<double>{0.3});
  const double ew = weighted_expectation(e.observables.column(0), lw);
  CHECK(constraint_residuals(e, std::vector<Restraint>{{0, 1.0, ErrorPrior::delta()}}, std::vector<double>{0.3})[0] ==
        doctest::Approx(1.0 - ew));
  const double r = constraint_residuals(e, std::vector<Restraint>{{0, 0.5, ErrorPrior::gaussian(1.0)}},
                                        std::vector<double>{-0.25})[0];
  CHECK(std::abs(r) < 0.02);
}

TEST_CASE("loss gradient matches central finite differences") {
  oracle::Gen gen(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = gen.index(5, 200), n = gen.index(1, 4);
    Ensemble e;
    e.observables = gen.matrix(m, n);
    std::vector<Restraint> rs;
    for (std::size_t k = 0; k < n; ++k) rs.push_back({k, gen.normal(0.0, 0.8), random_error(gen)});
    std::vector<double> lambda(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double b = std::isfinite(rs[k].error.lambda_bound()) ? 0.8 * rs[k].error.lambda_bound() : 1.5;
      lambda[k] = gen.uniform(-std::min(b, 1.5), std::min(b, 1.5));
    }
    const auto lg = loss_and_gradient(e, rs, lambda);
    for (std::size_t k = 0; k < n; ++k) {
      auto f = [&](double x) {
        auto l = lambda;
        l[k] = x;
        return loss_and_gradient(e, rs, l).loss;
      };
      const double fd = oracle::central_difference(f, lambda[k], 1e-5);
      CHECK(std::abs(lg.gradient[k] - fd) <= 1e-5 * std::max(std::abs(fd), 1e-3));
    }
  }
}

TEST_CASE("gradient vanishes when residuals are zero") {
  auto e = identity_ensemble(1000, 5);
  const double mean = weighted_expectation(e.observables.column(0), std::vector<double>(e.size(), 0.0));
  const auto lg = loss_and_gradient(e, std::vector<Restraint>{{0, mean, ErrorPrior::delta()}}, std::vector<double>{0.0});
  CHECK(std::abs(lg.gradient[0]) < 1e-12);
}

TEST_CASE("solve_lambda on the standard-normal toy") {
  auto e = identity_ensemble(100000, 6);
  SUBCASE("delta error") {
    const auto s = solve_lambda(e, std::vector<Restraint>{{0, 0.5, ErrorPrior::delta()}});
    CHECK(s.converged);
    CHECK(std::abs(s.lambda[0] + 0.5) < 0.02);
    CHECK(std::abs(weighted_expectation(e.observables.column(0), s.log_weights) - 0.5) < 1e-3);
  }
  SUBCASE("gaussian error") {
    const auto s = solve_lambda(e, std::vector<Restraint>{{0, 0.5, ErrorPrior::gaussian(1.0)}});
    CHECK(s.converged);
    CHECK(std::abs(s.lambda[0] + 0.25) < 0.02);
    const double ew = weighted_expectation(e.observables.column(0), s.log_weights);
    CHECK(std::abs(ew - 0.25) < 0.02);
    CHECK(std::abs(ew + tilted_mean(ErrorPrior::gaussian(1.0), s.lambda[0]) - 0.5) < 1e-3);
  }
  SUBCASE("target at the prior mean converges immediately") {
    const double mean = weighted_expectation(e.observables.column(0), std::vector<double>(e.size(), 0.0));
    const auto s = solve_lambda(e, std::vector<Restraint>{{0, mean, ErrorPrior::delta()}});
    CHECK(s.converged);
    CHECK(s.epochs == 0);
    CHECK(s.lambda[0] == 0.0);
  }
}

TEST_CASE("solve_lambda with plain gradient descent") {
  auto e = identity_ensemble(20000, 7);
  OptimizerOptions o;
  o.optimizer = Optimizer::GradientDescent;
  o.learning_rate = 0.2;
  const auto s = solve_lambda(e, std::vector<Restraint>{{0, 0.4, ErrorPrior::delta()}}, o);
  CHECK(s.converged);
  CHECK(std::abs(s.residuals[0]) < o.tolerance);
}

TEST_CASE("solver weights match a direct KL minimizer") {
  oracle::Gen gen(8);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = gen.index(6, 50), n = gen.index(1, 2);
    Ensemble e;
    e.observables = gen.matrix(m, n);
    // Feasible targets: the moments of a random strictly positive weight vector.
    std::vector<double> w0(m);
    double s = 0.0;
    for (double& v : w0) s += (v = gen.uniform(0.5, 1.5));
    for (double& v : w0) v /= s;
    std::vector<Restraint> rs;
    for (std::size_t k = 0; k < n; ++k) {
      double t = 0.0;
      for (std::size_t i = 0; i < m; ++i) t += w0[i] * e.observables(i, k);
      rs.push_back({k, t, ErrorPrior::delta()});
    }
    OptimizerOptions o;
    o.tolerance = 1e-10;
    o.epochs = 200000;
    const auto state = solve_lambda(e, rs, o);
    REQUIRE(state.converged);
    const auto oracle_w = oracle::kl_minimizer(e.observables, w0);
    const auto w = state.weights();
    for (std::size_t i = 0; i < m; ++i) CHECK(std::abs(w[i] - oracle_w[i]) < 1e-4);
  }
}

TEST_CASE("weighted variance equals the prior variance after a mean restraint") {
  auto e = identity_ensemble(100000, 9);
  const auto s = solve_lambda(e, std::vector<Restraint>{{0, 0.5, ErrorPrior::delta()}});
  const auto x = e.observables.column(0);
  const double mean = weighted_expectation(x, s.log_weights);
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - mean) * (x[i] - mean);
  CHECK(std::abs(weighted_expectation(sq, s.log_weights) - 1.0) < 0.02);
}

TEST_CASE("posterior entropy is flat across nearby targets") {
  auto e = identity_ensemble(100000, 10);
  const Prior prior = DiagonalGaussianPrior({0.0}, {1.0});
  std::vector<double> h, kl;
  for (double t : {-1.0, 0.0, 1.0}) {
    const auto s = solve_lambda(e, std::vector<Restraint>{{0, t, ErrorPrior::delta()}});
    h.push_back(posterior_entropy_estimate(e.samples, s.log_weights, prior));
    kl.push_back(weight_entropy(s.log_weights));
  }
  const double lo = *std::min_element(h.begin(), h.end()), hi = *std::max_element(h.begin(), h.end());
  CHECK((hi - lo) < 0.05 * std::abs(lo));
  // The relative (discrete) entropy is -KL = -lambda^2/2 for a normal tilt: maximal at the prior mean.
  CHECK(std::abs(kl[1]) < 1e-3);
  CHECK(kl[0] == doctest::Approx(-0.5).epsilon(0.05));
  CHECK(kl[2] == doctest::Approx(-0.5).epsilon(0.05));
}

TEST_CASE("perfectly correlated observables") {
  Ensemble e;
  e.observables = Matrix(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    e.observables(i, 0) = static_cast<double>(i);
    e.observables(i, 1) = 2.0 * static_cast<double>(i);
  }
  OptimizerOptions o;
  o.epochs = 20000;
  const auto ok = solve_lambda(e, std::vector<Restraint>{{0, 3.0, ErrorPrior::delta()}, {1, 6.0, ErrorPrior::delta()}}, o);
  CHECK(ok.converged);
  const auto bad = solve_lambda(e, std::vector<Restraint>{{0, 3.0, ErrorPrior::delta()}, {1, 8.0, ErrorPrior::delta()}}, o);
  CHECK_FALSE(bad.converged);
  CHECK(bad.loss > 0.1);
}

TEST_CASE("laplace multipliers stay inside their domain") {
  auto e = identity_ensemble(2000, 11);
  // A distant target drives lambda toward the Laplace bound 1/b = 2.
  const auto s = solve_lambda(e, std::vector<Restraint>{{0, 2.5, ErrorPrior::laplace(0.5)}});
  CHECK(std::abs(s.lambda[0]) < 2.0);
  CHECK(std::abs(sum_exp(s.log_weights) - 1.0) < 1e-12);
}

TEST_CASE("solve_lambda is deterministic") {
  auto e = identity_ensemble(5000, 12);
  const std::vector<Restraint> rs{{0, 0.7, ErrorPrior::laplace(0.1)}};
  CHECK(solve_lambda(e, rs) == solve_lambda(e, rs));
}

TEST_CASE("ensemble validation") {
  Ensemble e;
  e.observables = Matrix(1, 1);
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
  e.observables = Matrix(3, 1);
  e.observables(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
  CHECK_THROWS_AS(solve_lambda(e, std::vector<Restraint>{{0, 0.0, ErrorPrior::delta()}}), std::invalid_argument);
  e.observables(1, 0) = 0.0;
  CHECK_THROWS_AS(solve_lambda(e, std::vector<Restraint>{{1, 0.0, ErrorPrior::delta()}}), std::invalid_argument);
  CHECK_THROWS(solve_lambda(e, std::vector<Restraint>{}));
}

TEST_CASE("effective sample size examples") {
  CHECK(effective_sample_size(std::vector<double>(100, -std::log(100.0))) == doctest::Approx(100.0));
  std::vector<double> one(5, -std::numeric_limits<double>::infinity());
  one[2] = 0.0;
  CHECK(effective_sample_size(one) == doctest::Approx(1.0));
  CHECK(effective_sample_size(std::vector<double>{std::log(0.75), std::log(0.25)}) == doctest::Approx(1.6));
}
