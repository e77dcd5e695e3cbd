#pragma once

#include "piham/types.hpp"

#include <cstdint>

namespace piham {

// Mean/variance pair for a Normal hyperprior used by the synthetic sampler.
struct NormalSpec {
  double mean = 0.0;
  double variance = 1.0;
};

// Planted-partition generator configuration. Groups are contiguous and
// equal-sized up to remainder. All hyperparameters are overridable; the
// defaults produce one layer and one attribute of each supported kind.
struct GeneratorConfig {
  Index n_nodes = 100;
  Index communities = 3;
  std::vector<LayerKind> layer_kinds = {
      {LayerFamily::bernoulli},
      {LayerFamily::poisson},
      {LayerFamily::gaussian},
  };
  std::vector<AttributeKind> attribute_kinds = {
      {AttributeFamily::categorical, 4},
      {AttributeFamily::poisson},
      {AttributeFamily::gaussian},
  };
  std::uint64_t rng_seed = 0;

  NormalSpec membership_out_in = {2.0, 0.04};    // U_ik, k = node's group
  NormalSpec membership_out_out = {-1.0, 0.04};  // U_ik otherwise
  NormalSpec membership_in_in = {2.0, 0.09};     // V_ik, k = node's group
  NormalSpec membership_in_out = {-1.0, 0.09};   // V_ik otherwise
  NormalSpec affinity_diag = {0.0, 0.2025};
  NormalSpec affinity_offdiag = {-4.0, 0.2025};
  // Categorical loading H_kz: community k prefers category z = k (match),
  // other in-range categories mismatch, and when Z > K the extra category
  // columns (or extra community rows when K > Z) draw from padding. With
  // 1-based community index k the means used are:
  //   match:    categorical_match.mean + k
  //   poisson:  poisson_loading.mean * (k + 2) / 3
  //   gaussian: gaussian_loading.mean + (1 - k) * 3
  NormalSpec categorical_match = {0.5, 0.04};
  NormalSpec categorical_mismatch = {0.0, 0.04};
  NormalSpec categorical_padding = {0.2, 0.04};
  NormalSpec poisson_loading = {1.5, 0.01};
  NormalSpec gaussian_loading = {4.0, 0.04};

  void validate() const;
  ModelConfig model_config() const;
};

struct GroundTruth {
  LatentState latent;
  std::vector<Index> hard_groups;  // group index per node
  Matrix out_simplex;              // softmax of latent.out_membership
  Matrix in_simplex;
};

// Contiguous equal-size partition: node i goes to group (i*K)/N.
std::vector<Index> contiguous_groups(Index n_nodes, Index communities);

GroundTruth sample_latent(const GeneratorConfig& config);

// Conditional samplers: given the truth, draw typed layers / attributes.
// Directed, no self-loops (diagonal fixed at zero).
std::vector<Matrix> sample_network(const GroundTruth& truth,
                                   const GeneratorConfig& config,
                                   std::uint64_t stream);
std::vector<Matrix> sample_attributes(const GroundTruth& truth,
                                      const GeneratorConfig& config,
                                      std::uint64_t stream);

struct GeneratedData {
  HeterogeneousDataset dataset;
  GroundTruth truth;
};

GeneratedData generate_dataset(const GeneratorConfig& config);

}  // namespace piham
