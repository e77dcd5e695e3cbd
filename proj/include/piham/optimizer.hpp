#pragma once

#include "piham/types.hpp"

#include <cstdint>
#include <functional>

namespace piham {

struct OptimizerSettings {
  double learning_rate = 0.5;
  int max_iterations = 2000;
  double tolerance = 1e-8;
  int n_restarts = 50;
  double init_mean = 0.0;
  double init_variance = 9.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t rng_seed = 0;
  // When set, the stopping test compares |Δobj| / max(1, |obj|) instead of
  // the absolute change.
  bool relative_tolerance = false;

  void validate() const;
};

// |delta objective| < tolerance must hold this many consecutive iterations
// before the run stops early; a single hit fires on transient plateaus of
// Adam's oscillatory trajectory.
inline constexpr int kTolerancePatience = 30;

// Value and gradient of the objective being maximized.
using ObjectiveGradient = std::function<double(const Vector&, Vector&)>;

struct AdamResult {
  Vector state;
  std::vector<double> objective_trace;  // one entry per iteration performed
  int iterations = 0;
  bool converged = false;               // stopped by tolerance, not by budget
};

// Adam ascent on the objective (descent on its negation) with
// bias-corrected moments. Throws std::domain_error if the objective is not
// finite at init.
AdamResult adam_minimize(const ObjectiveGradient& objective, const Vector& init,
                         const OptimizerSettings& settings);

}  // namespace piham
