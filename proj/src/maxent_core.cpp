#include "maxent/maxent_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "maxent/kernels.hpp"

namespace maxent {

void Ensemble::validate() const {
  const std::size_t m = observables.rows();
  if (m < 2) throw std::invalid_argument("ensemble needs at least 2 samples, got " + std::to_string(m));
  if (!samples.empty() && samples.size() != m)
    throw std::invalid_argument("ensemble has " + std::to_string(samples.size()) + " samples but " +
                                std::to_string(m) + " observable rows");
  if (!base_log_weights.empty() && base_log_weights.size() != m)
    throw std::invalid_argument("ensemble base_log_weights has wrong length");
  const auto data = observables.data();
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    if (!std::isfinite(data[idx]))
      throw std::invalid_argument("non-finite observable at row " + std::to_string(idx / observables.cols()) +
                                  ", column " + std::to_string(idx % observables.cols()));
  }
}

double LagrangeState::max_abs_residual() const {
  double mx = 0.0;
  for (double r : residuals) mx = std::max(mx, std::abs(r));
  return mx;
}

std::vector<double> LagrangeState::weights() const {
  std::vector<double> w(log_weights.size());
  kernels::exponentiate(log_weights, w);
  return w;
}

void OptimizerOptions::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
}

std::vector<double> compute_log_weights(const Matrix& g, std::span<const double> lambda,
                                        std::span<const double> base_log_weights) {
  std::vector<double> lw(g.rows());
  kernels::tilt_log_weights(g, lambda, base_log_weights, lw);
  kernels::normalize_log_weights(lw);
  return lw;
}

namespace {

void check_restraints(const Ensemble& ensemble, std::span<const Restraint> restraints) {
  if (restraints.empty()) throw std::invalid_argument("at least one restraint is required");
  for (std::size_t k = 0; k < restraints.size(); ++k) {
    if (restraints[k].observable_index >= ensemble.observables.cols())
      throw std::invalid_argument("restraint " + std::to_string(k) + " refers to observable " +
                                  std::to_string(restraints[k].observable_index) + " but only " +
                                  std::to_string(ensemble.observables.cols()) + " exist");
    if (!std::isfinite(restraints[k].target))
      throw std::invalid_argument("restraint " + std::to_string(k) + " has a non-finite target");
  }
}

void check_lambda(std::span<const Restraint> restraints, std::span<const double> lambda) {
  if (lambda.size() != restraints.size())
    throw std::invalid_argument("lambda has " + std::to_string(lambda.size()) + " entries for " +
                                std::to_string(restraints.size()) + " restraints");
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    if (!restraints[k].error.in_domain(lambda[k]))
      throw TiltDomainError("lambda[" + std::to_string(k) + "] = " + std::to_string(lambda[k]) +
                            " outside the error-prior domain |lambda| < " +
                            std::to_string(restraints[k].error.lambda_bound()));
  }
}

Matrix restraint_columns(const Ensemble& ensemble, std::span<const Restraint> restraints) {
  std::vector<std::size_t> cols(restraints.size());
  std::transform(restraints.begin(), restraints.end(), cols.begin(),
                 [](const Restraint& r) { return r.observable_index; });
  return ensemble.observables.select_columns(cols);
}

// Loss, residuals and (optionally) gradient on the restraint submatrix.
LossAndGradient evaluate(const Matrix& g, std::span<const double> base, std::span<const Restraint> restraints,
                         std::span<const double> lambda, bool with_gradient) {
  const std::size_t m = g.rows();
  const std::size_t n = g.cols();
  LossAndGradient out;
  out.log_weights.resize(m);
  kernels::tilt_log_weights(g, lambda, base, out.log_weights);
  kernels::normalize_log_weights(out.log_weights);

  std::vector<double> w(m);
  kernels::exponentiate(out.log_weights, w);
  const auto means = kernels::weighted_column_means(g, w);

  out.residuals.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.residuals[k] = restraints[k].target - (means[k] + tilted_mean(restraints[k].error, lambda[k]));
    out.loss += out.residuals[k] * out.residuals[k];
  }
  if (!with_gradient) return out;

  // sum_l r_l Cov(g_l, g_k) = Cov(h, g_k) with h = G r
  std::vector<double> h(m);
  kernels::row_combination(g, out.residuals, h);
  const auto cov_h = kernels::weighted_cross_covariance(g, h, w, means);
  out.gradient.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    out.gradient[k] =
        2.0 * (cov_h[k] - out.residuals[k] * tilted_mean_derivative(restraints[k].error, lambda[k]));
  return out;
}

}  // namespace

std::vector<double> compute_log_weights(const Ensemble& ensemble, std::span<const Restraint> restraints,
                                        std::span<const double> lambda) {
  check_restraints(ensemble, restraints);
  check_lambda(restraints, lambda);
  return compute_log_weights(restraint_columns(ensemble, restraints), lambda, ensemble.base_log_weights);
}

double weighted_expectation(std::span<const double> values, std::span<const double> log_weights) {
  if (values.size() != log_weights.size())
    throw std::invalid_argument("weighted_expectation: values and weights differ in length");
  std::vector<double> lw(log_weights.begin(), log_weights.end());
  kernels::normalize_log_weights(lw);
  std::vector<double> w(lw.size());
  kernels::exponentiate(lw, w);
  return kernels::weighted_sum(values, w);
}

std::vector<double> constraint_residuals(const Ensemble& ensemble, std::span<const Restraint> restraints,
                                         std::span<const double> lambda) {
  check_restraints(ensemble, restraints);
  check_lambda(restraints, lambda);
  return evaluate(restraint_columns(ensemble, restraints), ensemble.base_log_weights, restraints, lambda,
                  false)
      .residuals;
}

LossAndGradient loss_and_gradient(const Ensemble& ensemble, std::span<const Restraint> restraints,
                                  std::span<const double> lambda) {
  check_restraints(ensemble, restraints);
  check_lambda(restraints, lambda);
  return evaluate(restraint_columns(ensemble, restraints), ensemble.base_log_weights, restraints, lambda,
                  true);
}

LagrangeState solve_lambda(const Ensemble& ensemble, std::span<const Restraint> restraints,
                           const OptimizerOptions& options) {
  ensemble.validate();
  check_restraints(ensemble, restraints);
  options.validate();

  const Matrix g = restraint_columns(ensemble, restraints);
  const std::size_t n = restraints.size();
  std::vector<double> lambda(n, 0.0);
  std::vector<double> first_moment(n, 0.0);
  std::vector<double> second_moment(n, 0.0);
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  // Keeps a Laplace multiplier strictly inside |lambda| < 1/b.
  auto project = [&](std::size_t k) {
    const double bound = restraints[k].error.lambda_bound();
    if (std::isfinite(bound)) {
      const double limit = bound * (1.0 - 1e-9);
      lambda[k] = std::clamp(lambda[k], -limit, limit);
    }
  };

  LagrangeState state;
  for (std::size_t epoch = 0;; ++epoch) {
    auto eval = evaluate(g, ensemble.base_log_weights, restraints, lambda, true);
    if (!std::isfinite(eval.loss))
      throw NumericalError("solve_lambda: loss became non-finite at epoch " + std::to_string(epoch));

    state.lambda = lambda;
    state.log_weights = std::move(eval.log_weights);
    state.residuals = std::move(eval.residuals);
    state.loss = eval.loss;
    state.epochs = epoch;
    state.converged = state.max_abs_residual() < options.tolerance;
    if (state.converged || epoch == options.epochs) break;

    if (options.optimizer == Optimizer::GradientDescent) {
      for (std::size_t k = 0; k < n; ++k) lambda[k] -= options.learning_rate * eval.gradient[k];
    } else {
      beta1_power *= options.beta1;
      beta2_power *= options.beta2;
      for (std::size_t k = 0; k < n; ++k) {
        const double grad = eval.gradient[k];
        first_moment[k] = options.beta1 * first_moment[k] + (1.0 - options.beta1) * grad;
        second_moment[k] = options.beta2 * second_moment[k] + (1.0 - options.beta2) * grad * grad;
        const double m_hat = first_moment[k] / (1.0 - beta1_power);
        const double v_hat = second_moment[k] / (1.0 - beta2_power);
        lambda[k] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(lambda[k]))
        throw NumericalError("solve_lambda: lambda became non-finite at epoch " + std::to_string(epoch));
      project(k);
    }
  }
  return state;
}

double effective_sample_size(std::span<const double> log_weights) {
  std::vector<double> w(log_weights.size());
  kernels::exponentiate(log_weights, w);
  const double s = kernels::sum_of_squares(w);
  return s > 0.0 ? 1.0 / s : 0.0;
}

}  // namespace maxent
