#pragma once

#include "piham/model.hpp"
#include "piham/types.hpp"

namespace piham {

// Gradient of the log posterior, shaped like the latent state. For
// undirected configs out_membership carries both role contributions and
// in_membership is empty.
struct Gradient {
  Matrix out_membership;
  Matrix in_membership;
  std::vector<Matrix> affinity;
  std::vector<Matrix> attribute_loading;

  Vector flat() const;
};

Gradient grad_log_posterior(const HeterogeneousDataset& data,
                            const LatentState& state, const ObservationMask& mask,
                            const ModelConfig& config);

// Log posterior and its flattened gradient in one pass.
double log_posterior_with_gradient(const HeterogeneousDataset& data,
                                   const LatentState& state,
                                   const ObservationMask& mask,
                                   const ModelConfig& config, Vector& grad_out);

// Per-block maximum relative discrepancy (denominator max(1, |analytic|))
// between the analytic gradient and central finite differences.
struct FiniteDifferenceReport {
  double out_membership = 0.0;
  double in_membership = 0.0;
  double affinity = 0.0;
  double attribute_loading = 0.0;

  double overall() const {
    return std::max(std::max(out_membership, in_membership),
                    std::max(affinity, attribute_loading));
  }
};

FiniteDifferenceReport finite_difference_check(const HeterogeneousDataset& data,
                                               const LatentState& state,
                                               const ObservationMask& mask,
                                               const ModelConfig& config,
                                               double step);

}  // namespace piham
