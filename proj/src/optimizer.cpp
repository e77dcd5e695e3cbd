#include "piham/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace piham {

void OptimizerSettings::validate() const {
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("learning rate must be positive");
  if (!(tolerance > 0.0))
    throw std::invalid_argument("tolerance must be positive");
  if (max_iterations < 1)
    throw std::invalid_argument("max_iterations must be at least 1");
  if (n_restarts < 1)
    throw std::invalid_argument("n_restarts must be at least 1");
  if (!(init_variance > 0.0))
    throw std::invalid_argument("init variance must be positive");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 ||
      adam_beta2 >= 1.0)
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0))
    throw std::invalid_argument("adam epsilon must be positive");
}

AdamResult adam_minimize(const ObjectiveGradient& objective, const Vector& init,
                         const OptimizerSettings& settings) {
  settings.validate();
  if (!init.allFinite())
    throw std::domain_error("optimizer initialized at a non-finite point");

  Vector theta = init;
  Vector grad(init.size());
  double previous = objective(theta, grad);
  if (!std::isfinite(previous))
    throw std::domain_error("objective is not finite at the initial point");

  AdamResult result;
  result.objective_trace.reserve(settings.max_iterations);
  Vector m = Vector::Zero(init.size());
  Vector v = Vector::Zero(init.size());
  double beta1_power = 1.0;
  double beta2_power = 1.0;
  int streak = 0;

  for (int t = 0; t < settings.max_iterations; ++t) {
    if (!grad.allFinite()) break;
    m = settings.adam_beta1 * m + (1.0 - settings.adam_beta1) * grad;
    v = settings.adam_beta2 * v +
        (1.0 - settings.adam_beta2) * grad.cwiseProduct(grad);
    beta1_power *= settings.adam_beta1;
    beta2_power *= settings.adam_beta2;
    Vector m_hat = m / (1.0 - beta1_power);
    Vector v_hat = v / (1.0 - beta2_power);
    theta.array() += settings.learning_rate * m_hat.array() /
                     (v_hat.array().sqrt() + settings.adam_epsilon);

    double value = objective(theta, grad);
    result.objective_trace.push_back(value);
    result.iterations = t + 1;
    if (!std::isfinite(value)) break;

    double change = std::abs(value - previous);
    if (settings.relative_tolerance) change /= std::max(1.0, std::abs(value));
    previous = value;
    // A single sub-tolerance step is routinely a transient plateau of
    // Adam's oscillation; require a sustained run before stopping.
    streak = change < settings.tolerance ? streak + 1 : 0;
    if (streak >= kTolerancePatience) {
      result.converged = true;
      break;
    }
  }

  result.state = std::move(theta);
  return result;
}

}  // namespace piham
