#pragma once

#include "piham/types.hpp"

namespace piham {

// Simplex memberships and linked parameter blocks, computed once per state
// and shared by the likelihood and gradient paths.
struct TransformedState {
  Matrix out_simplex;                 // row-wise softmax of out memberships
  Matrix in_simplex;                  // same storage semantics as LatentState
  std::vector<Matrix> linked_affinity;
  std::vector<Matrix> linked_loading;

  const Matrix& in_or_out() const {
    return in_simplex.size() ? in_simplex : out_simplex;
  }
};

TransformedState transform(const LatentState& state, const ModelConfig& config);

// Expected value matrix of one layer: softmax(U) g(W) softmax(V)^T.
Matrix expected_edge_matrix(const LatentState& state, const ModelConfig& config,
                            Index layer);
double expected_edge_value(const LatentState& state, const ModelConfig& config,
                           Index layer, Index i, Index j);

// Expected attribute parameters, one row per node: for categorical a
// probability vector over Z categories, otherwise a single column.
Matrix expected_attribute_matrix(const LatentState& state,
                                 const ModelConfig& config, Index attribute);
// Scalar expected value (poisson/gaussian attributes only).
double expected_attribute_value(const LatentState& state,
                                const ModelConfig& config, Index attribute,
                                Index i);

// Sum of per-entry log densities over masked-in entries. Self-loop entries
// are excluded unless config.include_self_loops.
double log_likelihood(const HeterogeneousDataset& data, const LatentState& state,
                      const ObservationMask& mask, const ModelConfig& config);

// Independent Normal(prior_mean, prior_variance) log density over every
// free parameter.
double log_prior(const LatentState& state, const ModelConfig& config);

// Unnormalized log posterior.
double log_posterior(const HeterogeneousDataset& data, const LatentState& state,
                     const ObservationMask& mask, const ModelConfig& config);

}  // namespace piham
