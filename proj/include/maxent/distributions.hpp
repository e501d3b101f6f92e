#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace maxent {

/// One draw of simulator inputs.
using ParameterSample = std::vector<double>;

/// Independent normal per coordinate.
struct DiagonalGaussianPrior {
  std::vector<double> mean;
  std::vector<double> variance;

  DiagonalGaussianPrior(std::vector<double> mean, std::vector<double> variance);
};

/// Independent normal per coordinate, restricted to [lower_bound, inf).
struct TruncatedNormalPrior {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> lower_bound;

  TruncatedNormalPrior(std::vector<double> mean, std::vector<double> variance,
                       std::vector<double> lower_bound);
};

using Prior = std::variant<DiagonalGaussianPrior, TruncatedNormalPrior>;

std::size_t dimension(const Prior& prior);

/// n independent draws, reproducible from `seed`.
std::vector<ParameterSample> sample(const Prior& prior, std::uint64_t seed, std::size_t n);

/// ln P(theta). Returns -infinity outside the support.
double log_density(const Prior& prior, std::span<const double> theta);

bool in_support(const Prior& prior, std::span<const double> theta);

/// d ln P / d theta. Throws std::domain_error on or below a truncation bound.
std::vector<double> grad_log_density(const Prior& prior, std::span<const double> theta);

// The distribution's own parameters, packed as [mean_0..mean_{D-1}, var_0..var_{D-1}].
// Lower bounds of a truncated prior are fixed and not part of the vector.
std::vector<double> family_parameters(const Prior& prior);
Prior with_family_parameters(const Prior& prior, std::span<const double> params);

/// d ln P(theta) / d(family parameters), same packing as family_parameters().
/// For a truncated normal this includes the derivative of the normalizer.
std::vector<double> grad_log_density_wrt_parameters(const Prior& prior,
                                                    std::span<const double> theta);

/// Differential entropy of a diagonal Gaussian, in nats.
double gaussian_entropy(std::span<const double> variance);

// ---------------------------------------------------------------------------
// Observation-error priors P0(eps). All are zero-mean and symmetric.

/// Thrown when an exponential tilt of the error prior does not normalize.
class TiltDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct ErrorPrior {
  enum class Kind { Delta, Gaussian, Laplace };

  Kind kind = Kind::Delta;
  double scale = 0.0;  // sigma for Gaussian, b for Laplace, unused for Delta

  static ErrorPrior delta() { return {}; }
  static ErrorPrior gaussian(double sigma);
  static ErrorPrior laplace(double b);

  /// Open bound on |lambda| (infinity unless Laplace, where it is 1/b).
  double lambda_bound() const;
  bool in_domain(double lambda) const;

  friend bool operator==(const ErrorPrior&, const ErrorPrior&) = default;
};

std::string to_string(ErrorPrior::Kind kind);

/// ln of the tilt integral  int exp(-lambda eps) P0(eps) d eps.
double tilt_log_normalizer(const ErrorPrior& prior, double lambda);

/// Mean of eps under the tilted error prior (xi(lambda)).
double tilted_mean(const ErrorPrior& prior, double lambda);

/// d xi / d lambda.
double tilted_mean_derivative(const ErrorPrior& prior, double lambda);

}  // namespace maxent
