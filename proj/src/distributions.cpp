#include "maxent/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace maxent {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

void check_positive_variances(const std::vector<double>& mean, const std::vector<double>& variance,
                              const char* who) {
  if (mean.empty()) throw std::invalid_argument(std::string(who) + ": empty mean");
  if (mean.size() != variance.size())
    throw std::invalid_argument(std::string(who) + ": mean and variance differ in dimension");
  for (std::size_t j = 0; j < variance.size(); ++j) {
    if (!(variance[j] > 0.0) || !std::isfinite(variance[j]))
      throw std::invalid_argument(std::string(who) + ": variance[" + std::to_string(j) +
                                  "] must be finite and > 0");
    if (!std::isfinite(mean[j]))
      throw std::invalid_argument(std::string(who) + ": mean[" + std::to_string(j) + "] not finite");
  }
}

void check_dimension(const Prior& prior, std::span<const double> theta) {
  if (theta.size() != dimension(prior))
    throw std::invalid_argument("prior dimension " + std::to_string(dimension(prior)) +
                                " does not match theta dimension " + std::to_string(theta.size()));
}

double log_std_normal_pdf(double z) { return -0.5 * kLogTwoPi - 0.5 * z * z; }

// ln P(Z > a) for standard normal Z.
double log_std_normal_sf(double a) {
  if (a < 25.0) return std::log(0.5 * std::erfc(a / std::numbers::sqrt2));
  // Mills-ratio asymptotic series; erfc underflows past this point.
  const double inv2 = 1.0 / (a * a);
  return log_std_normal_pdf(a) - std::log(a) + std::log1p(-inv2 + 3.0 * inv2 * inv2);
}

// phi(a) / P(Z > a)
double inverse_mills(double a) { return std::exp(log_std_normal_pdf(a) - log_std_normal_sf(a)); }

double draw_truncated_standard(std::mt19937_64& rng, double alpha) {
  if (alpha < 0.5) {
    std::normal_distribution<double> normal;
    for (;;) {
      const double z = normal(rng);
      if (z >= alpha) return z;
    }
  }
  // Exponential proposal with the optimal rate for a one-sided tail.
  const double rate = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
  std::exponential_distribution<double> expo(rate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    const double z = alpha + expo(rng);
    const double d = z - rate;
    if (unif(rng) <= std::exp(-0.5 * d * d)) return z;
  }
}

}  // namespace

DiagonalGaussianPrior::DiagonalGaussianPrior(std::vector<double> m, std::vector<double> v)
    : mean(std::move(m)), variance(std::move(v)) {
  check_positive_variances(mean, variance, "DiagonalGaussianPrior");
}

TruncatedNormalPrior::TruncatedNormalPrior(std::vector<double> m, std::vector<double> v,
                                           std::vector<double> lower)
    : mean(std::move(m)), variance(std::move(v)), lower_bound(std::move(lower)) {
  check_positive_variances(mean, variance, "TruncatedNormalPrior");
  if (lower_bound.size() != mean.size())
    throw std::invalid_argument("TruncatedNormalPrior: lower_bound differs in dimension");
}

std::size_t dimension(const Prior& prior) {
  return std::visit([](const auto& p) { return p.mean.size(); }, prior);
}

std::vector<ParameterSample> sample(const Prior& prior, std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  const std::size_t d = dimension(prior);
  std::vector<ParameterSample> out(n, ParameterSample(d));
  if (const auto* g = std::get_if<DiagonalGaussianPrior>(&prior)) {
    std::normal_distribution<double> normal;
    for (auto& s : out)
      for (std::size_t j = 0; j < d; ++j) s[j] = g->mean[j] + std::sqrt(g->variance[j]) * normal(rng);
    return out;
  }
  const auto& t = std::get<TruncatedNormalPrior>(prior);
  for (auto& s : out) {
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(t.variance[j]);
      const double alpha = (t.lower_bound[j] - t.mean[j]) / sd;
      s[j] = t.mean[j] + sd * draw_truncated_standard(rng, alpha);
    }
  }
  return out;
}

bool in_support(const Prior& prior, std::span<const double> theta) {
  check_dimension(prior, theta);
  if (const auto* t = std::get_if<TruncatedNormalPrior>(&prior)) {
    for (std::size_t j = 0; j < theta.size(); ++j)
      if (theta[j] < t->lower_bound[j]) return false;
  }
  for (double x : theta)
    if (!std::isfinite(x)) return false;
  return true;
}

double log_density(const Prior& prior, std::span<const double> theta) {
  check_dimension(prior, theta);
  if (!in_support(prior, theta)) return -kInf;
  return std::visit(
      [&](const auto& p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < theta.size(); ++j) {
          const double diff = theta[j] - p.mean[j];
          acc += -0.5 * (kLogTwoPi + std::log(p.variance[j])) - 0.5 * diff * diff / p.variance[j];
        }
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, TruncatedNormalPrior>) {
          for (std::size_t j = 0; j < theta.size(); ++j) {
            const double alpha = (p.lower_bound[j] - p.mean[j]) / std::sqrt(p.variance[j]);
            acc -= log_std_normal_sf(alpha);
          }
        }
        return acc;
      },
      prior);
}

std::vector<double> grad_log_density(const Prior& prior, std::span<const double> theta) {
  check_dimension(prior, theta);
  if (const auto* t = std::get_if<TruncatedNormalPrior>(&prior)) {
    for (std::size_t j = 0; j < theta.size(); ++j)
      if (!(theta[j] > t->lower_bound[j]))
        throw std::domain_error("grad_log_density: theta[" + std::to_string(j) +
                                "] is on or below the truncation bound");
  }
  return std::visit(
      [&](const auto& p) {
        std::vector<double> g(theta.size());
        for (std::size_t j = 0; j < theta.size(); ++j) g[j] = -(theta[j] - p.mean[j]) / p.variance[j];
        return g;
      },
      prior);
}

std::vector<double> family_parameters(const Prior& prior) {
  return std::visit(
      [](const auto& p) {
        std::vector<double> out(p.mean);
        out.insert(out.end(), p.variance.begin(), p.variance.end());
        return out;
      },
      prior);
}

Prior with_family_parameters(const Prior& prior, std::span<const double> params) {
  const std::size_t d = dimension(prior);
  if (params.size() != 2 * d)
    throw std::invalid_argument("with_family_parameters: expected " + std::to_string(2 * d) +
                                " values");
  std::vector<double> mean(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d));
  std::vector<double> var(params.begin() + static_cast<std::ptrdiff_t>(d), params.end());
  if (const auto* t = std::get_if<TruncatedNormalPrior>(&prior))
    return TruncatedNormalPrior(std::move(mean), std::move(var), t->lower_bound);
  return DiagonalGaussianPrior(std::move(mean), std::move(var));
}

std::vector<double> grad_log_density_wrt_parameters(const Prior& prior,
                                                    std::span<const double> theta) {
  check_dimension(prior, theta);
  const std::size_t d = theta.size();
  std::vector<double> g(2 * d);
  std::visit(
      [&](const auto& p) {
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = theta[j] - p.mean[j];
          const double v = p.variance[j];
          g[j] = diff / v;
          g[d + j] = -0.5 / v + 0.5 * diff * diff / (v * v);
        }
      },
      prior);
  if (const auto* t = std::get_if<TruncatedNormalPrior>(&prior)) {
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(t->variance[j]);
      const double alpha = (t->lower_bound[j] - t->mean[j]) / sd;
      const double hazard = inverse_mills(alpha);
      g[j] -= hazard / sd;
      g[d + j] -= hazard * alpha / (2.0 * t->variance[j]);
    }
  }
  return g;
}

double gaussian_entropy(std::span<const double> variance) {
  double h = 0.0;
  for (double v : variance) h += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * v);
  return h;
}

// ---------------------------------------------------------------------------

ErrorPrior ErrorPrior::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("Gaussian error prior needs sigma > 0");
  return {Kind::Gaussian, sigma};
}

ErrorPrior ErrorPrior::laplace(double b) {
  if (!(b > 0.0) || !std::isfinite(b)) throw std::invalid_argument("Laplace error prior needs b > 0");
  return {Kind::Laplace, b};
}

double ErrorPrior::lambda_bound() const { return kind == Kind::Laplace ? 1.0 / scale : kInf; }

bool ErrorPrior::in_domain(double lambda) const {
  return std::isfinite(lambda) && std::abs(lambda) < lambda_bound();
}

std::string to_string(ErrorPrior::Kind kind) {
  switch (kind) {
    case ErrorPrior::Kind::Delta: return "delta";
    case ErrorPrior::Kind::Gaussian: return "gaussian";
    case ErrorPrior::Kind::Laplace: return "laplace";
  }
  return "unknown";
}

namespace {

void require_domain(const ErrorPrior& prior, double lambda) {
  if (prior.in_domain(lambda)) return;
  if (!std::isfinite(lambda)) throw TiltDomainError("lambda is not finite");
  throw TiltDomainError("Laplace tilt integral diverges: |lambda| = " + std::to_string(std::abs(lambda)) +
                        " must be < 1/b = " + std::to_string(prior.lambda_bound()));
}

}  // namespace

double tilt_log_normalizer(const ErrorPrior& prior, double lambda) {
  require_domain(prior, lambda);
  switch (prior.kind) {
    case ErrorPrior::Kind::Delta: return 0.0;
    case ErrorPrior::Kind::Gaussian: return 0.5 * lambda * lambda * prior.scale * prior.scale;
    case ErrorPrior::Kind::Laplace: {
      const double bl = prior.scale * lambda;
      return -std::log1p(-bl * bl);
    }
  }
  return 0.0;
}

double tilted_mean(const ErrorPrior& prior, double lambda) {
  require_domain(prior, lambda);
  switch (prior.kind) {
    case ErrorPrior::Kind::Delta: return 0.0;
    case ErrorPrior::Kind::Gaussian: return -lambda * prior.scale * prior.scale;
    case ErrorPrior::Kind::Laplace: {
      const double b2 = prior.scale * prior.scale;
      return -2.0 * b2 * lambda / (1.0 - b2 * lambda * lambda);
    }
  }
  return 0.0;
}

double tilted_mean_derivative(const ErrorPrior& prior, double lambda) {
  require_domain(prior, lambda);
  switch (prior.kind) {
    case ErrorPrior::Kind::Delta: return 0.0;
    case ErrorPrior::Kind::Gaussian: return -prior.scale * prior.scale;
    case ErrorPrior::Kind::Laplace: {
      const double b2 = prior.scale * prior.scale;
      const double u = b2 * lambda * lambda;
      return -2.0 * b2 * (1.0 + u) / ((1.0 - u) * (1.0 - u));
    }
  }
  return 0.0;
}

}  // namespace maxent
