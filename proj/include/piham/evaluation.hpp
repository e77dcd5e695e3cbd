#pragma once

#include "piham/inference.hpp"
#include "piham/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace piham {

// Fold assignment per entry, kept separately for edge triples (l,i,j) and
// for each attribute's node entries. Values are fold indices in
// [0, n_folds), or -1 for positions outside the partition (self-loops).
struct FoldPlan {
  int n_folds = 5;
  std::uint64_t rng_seed = 0;
  std::vector<std::vector<int>> edge_folds;       // [layer][i * n_nodes + j]
  std::vector<std::vector<int>> attribute_folds;  // [attribute][node]
};

// Uniform random partition into near-equal folds, independently over the
// edge triples of each layer and the entries of each attribute. Self-loop
// positions are marked unassigned (-1) unless included.
FoldPlan make_folds(const HeterogeneousDataset& data, int n_folds,
                    std::uint64_t seed, bool include_self_loops = false);

// Train/test masks for one fold of the plan; unassigned entries belong to
// neither side.
ObservationMask training_mask(const HeterogeneousDataset& data,
                              const FoldPlan& plan, int fold);
ObservationMask test_mask(const HeterogeneousDataset& data,
                          const FoldPlan& plan, int fold);

// Probability that a random positive outranks a random negative, ties
// counted 1/2; exact midrank computation. Returns nullopt when one class is
// absent.
std::optional<double> auc(const std::vector<double>& scores,
                          const std::vector<int>& labels);

double mean_absolute_error(const std::vector<double>& predictions,
                           const std::vector<double>& observations);
double max_absolute_error(const std::vector<double>& predictions,
                          const std::vector<double>& observations);
double root_mean_squared_error(const std::vector<double>& predictions,
                               const std::vector<double>& observations);
// Fraction where the argmax category matches the observation; argmax ties go
// to the lowest category index. probabilities is n x Z, observations hold
// category indices.
double categorical_accuracy(const Matrix& probabilities,
                            const std::vector<Index>& observations);

// One metric on one layer or attribute for one fold, next to its baseline
// computed from the training entries (train mean for MAE/RMSE, max category
// frequency and uniform 1/Z for accuracy, 0.5 for AUC).
struct MetricValue {
  std::string target;   // layer or attribute name
  std::string metric;   // "auc", "mae", "rmse", "accuracy"
  double value = 0.0;
  double baseline = 0.0;
  std::optional<double> uniform_baseline;  // categorical only
};

struct FoldResult {
  int fold = 0;
  bool fit_failed = false;
  std::string failure;
  double final_log_posterior = 0.0;
  std::vector<MetricValue> metrics;
};

struct MetricSummary {
  std::string target;
  std::string metric;
  double mean = 0.0;
  double std_dev = 0.0;  // population over folds
  double baseline_mean = 0.0;
};

struct EvaluationReport {
  std::vector<FoldResult> folds;
  std::vector<MetricSummary> summary;  // over folds with successful fits
};

EvaluationReport cross_validate(const HeterogeneousDataset& data,
                                const ModelConfig& config,
                                const OptimizerSettings& settings,
                                const FoldPlan& plan, int n_threads = 1);

// Posterior-predictive check: paired distances (replica vs data, replica vs
// independent replica) per diagnostic metric. Calibrated replicas put the
// bulk of points on or above the diagonal.
struct PpcPoint {
  double to_data = 0.0;
  double to_replica = 0.0;
};

struct PpcSeries {
  std::string target;
  std::string metric;
  std::vector<PpcPoint> points;
  double fraction_above = 0.0;  // to_replica >= to_data
};

inline constexpr double kPpcGaussianSigma = 0.1;

std::vector<PpcSeries> posterior_predictive_check(
    const HeterogeneousDataset& data, const PosteriorEstimate& posterior,
    const ModelConfig& config, int n_samples, std::uint64_t seed,
    int n_threads = 1);

// Mean pairwise overlap (1 - IAE/2) between K univariate Gaussians,
// trapezoid on [min mu - 8*sigma_max, max mu + 8*sigma_max].
double overlap(const Vector& means, const Vector& variances);

// Variance of the uniform-weight mixture (1/K) sum_k N(mu_k, v_k), from
// trapezoid moments on the same grid as overlap.
double barycenter_variance(const Vector& means, const Vector& variances);

// Mean over nodes of cosine(row_inferred, row_truth), maximized over column
// permutations of the inferred matrix. Exact search up to K = 8; larger K
// requires the greedy approximate mode.
double cosine_recovery(const Matrix& inferred, const Matrix& truth,
                       bool approximate = false);

}  // namespace piham
