#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "maxent/distributions.hpp"
#include "maxent/matrix.hpp"

namespace maxent {

/// One target observation: E_w[g_k] + xi_k(lambda_k) = target.
struct Restraint {
  std::size_t observable_index = 0;
  double target = 0.0;
  ErrorPrior error = ErrorPrior::delta();
};

/// M parameter draws and their M x N observable matrix.
///
/// `base_log_weights`, when non-empty, holds ln P(theta_i) - ln P_sampler(theta_i)
/// for draws that did not come from the prior (see importance_correction).
struct Ensemble {
  std::vector<ParameterSample> samples;
  Matrix observables;
  std::vector<double> base_log_weights;

  std::size_t size() const { return observables.rows(); }

  /// Throws std::invalid_argument if M < 2, an observable is non-finite, or shapes disagree.
  void validate() const;
};

struct LagrangeState {
  std::vector<double> lambda;
  std::vector<double> log_weights;  // normalized: log-sum-exp == 0
  std::vector<double> residuals;    // target - (E_w[g] + xi(lambda))
  double loss = 0.0;
  std::size_t epochs = 0;
  bool converged = false;

  double max_abs_residual() const;
  std::vector<double> weights() const;

  friend bool operator==(const LagrangeState&, const LagrangeState&) = default;
};

enum class Optimizer { GradientDescent, Adam };

struct OptimizerOptions {
  double learning_rate = 1e-2;
  std::size_t epochs = 20000;
  double tolerance = 1e-4;  // on max |residual|, in observable units
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Raised when the loss or weights stop being finite numbers.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Normalized log w_i = base_i - sum_k lambda_k G[i][k] - log Z.
/// The tilt integral of the error prior is the same for every i and cancels.
std::vector<double> compute_log_weights(const Matrix& g, std::span<const double> lambda,
                                        std::span<const double> base_log_weights = {});

/// Same, restricted to the restraint columns; checks each lambda against its error prior.
std::vector<double> compute_log_weights(const Ensemble& ensemble,
                                        std::span<const Restraint> restraints,
                                        std::span<const double> lambda);

/// sum_i w_i v_i with w = exp(log_weights) renormalized.
double weighted_expectation(std::span<const double> values, std::span<const double> log_weights);

std::vector<double> constraint_residuals(const Ensemble& ensemble, std::span<const Restraint> restraints,
                                         std::span<const double> lambda);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
  std::vector<double> residuals;
  std::vector<double> log_weights;
};

/// loss = sum_l r_l^2 and its analytic gradient in lambda, using
/// dE_w[g_l]/dlambda_k = -Cov_w(g_l, g_k).
LossAndGradient loss_and_gradient(const Ensemble& ensemble, std::span<const Restraint> restraints,
                                  std::span<const double> lambda);

/// Full-batch descent on lambda from zero until max |residual| < tolerance or the
/// epoch budget runs out. Non-convergence is reported through `converged`, not thrown.
LagrangeState solve_lambda(const Ensemble& ensemble, std::span<const Restraint> restraints,
                           const OptimizerOptions& options = {});

/// 1 / sum w_i^2
double effective_sample_size(std::span<const double> log_weights);

}  // namespace maxent
