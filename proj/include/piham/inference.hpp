#pragma once

#include "piham/hessian.hpp"
#include "piham/model.hpp"
#include "piham/optimizer.hpp"
#include "piham/types.hpp"

namespace piham {

struct RestartRecord {
  int restart = 0;
  double final_log_posterior = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct FitResult {
  LatentState map_state;
  double final_log_posterior = 0.0;
  int best_restart = 0;
  std::vector<RestartRecord> restart_trace;
};

// Multi-restart MAP fit: n_restarts independent Adam runs, restart r
// initialized elementwise from Normal(init_mean, init_variance) on the
// substream (rng_seed, r). Deterministic given rng_seed for any thread
// count; ties in the final objective go to the lowest restart index.
// Throws std::runtime_error if every restart ends non-finite.
FitResult fit_map(const HeterogeneousDataset& data, const ObservationMask& mask,
                  const ModelConfig& config, const OptimizerSettings& settings,
                  int n_threads = 1);

// Gaussian posterior covariance of one block, with the jitter that made the
// negated Hessian positive definite (0 when none was needed).
struct CovarianceBlock {
  BlockSpan span;
  Matrix covariance;
  double jitter = 0.0;
  double hessian_asymmetry = 0.0;
};

struct CovarianceReport {
  std::vector<CovarianceBlock> blocks;
  double gradient_inf_norm = 0.0;  // at map_state; diagnostic, not enforced
  bool gradient_flagged = false;   // true when the inf-norm exceeds 1e-3
};

inline constexpr double kJitterFloor = 1e-8;
inline constexpr double kJitterCap = 1e2;

// Per-block covariance = inverse of the negated Hessian block, jittered in
// decade steps from 1e-8 until positive definite. Escalation beyond the cap
// is a numeric failure (std::runtime_error naming the blocks).
CovarianceReport laplace_covariance(const HeterogeneousDataset& data,
                                    const LatentState& map_state,
                                    const ObservationMask& mask,
                                    const ModelConfig& config,
                                    int n_threads = 1);

// MAP estimate plus per-block Gaussian posteriors and fit metadata.
struct PosteriorEstimate {
  LatentState map_state;
  CovarianceReport covariance;
  double final_log_posterior = 0.0;
  std::vector<RestartRecord> restart_trace;
};

PosteriorEstimate fit_posterior(const HeterogeneousDataset& data,
                                const ObservationMask& mask,
                                const ModelConfig& config,
                                const OptimizerSettings& settings,
                                int n_threads = 1);

// Mean and covariance diagonal of the posterior over one membership row
// (out role). Requires the matching covariance block.
struct MembershipPosterior {
  Vector mean;
  Vector variance_diag;
};

MembershipPosterior membership_posterior(const PosteriorEstimate& posterior,
                                         Index node);

}  // namespace piham
