#include "piham/evaluation.hpp"

#include "piham/gradient.hpp"
#include "piham/parallel.hpp"
#include "piham/rng.hpp"
#include "piham/transforms.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

namespace piham {

namespace {

std::string layer_target(const HeterogeneousDataset& data, std::size_t l) {
  return "layer" + std::to_string(l) + "." +
         to_string(data.layer_kinds[l].family);
}

std::string attribute_target(const HeterogeneousDataset& data, std::size_t x) {
  return "attr" + std::to_string(x) + "." +
         to_string(data.attribute_kinds[x].family);
}

void check_plan(const HeterogeneousDataset& data, const FoldPlan& plan) {
  if (plan.n_folds < 2) throw std::invalid_argument("plan has too few folds");
  if (plan.edge_folds.size() != data.layers.size() ||
      plan.attribute_folds.size() != data.attributes.size())
    throw std::invalid_argument("fold plan does not match dataset shape");
}

}  // namespace

FoldPlan make_folds(const HeterogeneousDataset& data, int n_folds,
                    std::uint64_t seed, bool include_self_loops) {
  if (n_folds < 2) throw std::invalid_argument("need at least 2 folds");
  const Index n = data.n_nodes;
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.rng_seed = seed;

  for (std::size_t l = 0; l < data.layers.size(); ++l) {
    std::vector<Index> entries;
    entries.reserve(n * n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        if (i == j && !include_self_loops) continue;
        entries.push_back(i * n + j);
      }
    if (static_cast<int>(entries.size()) < n_folds)
      throw std::invalid_argument("layer " + std::to_string(l) +
                                  " has fewer entries than folds");
    std::mt19937_64 rng = substream(seed, stream_domain::kFold + l);
    std::shuffle(entries.begin(), entries.end(), rng);
    std::vector<int> folds(n * n, -1);
    for (std::size_t t = 0; t < entries.size(); ++t)
      folds[entries[t]] = static_cast<int>(t % n_folds);
    plan.edge_folds.push_back(std::move(folds));
  }

  for (std::size_t x = 0; x < data.attributes.size(); ++x) {
    if (n < n_folds)
      throw std::invalid_argument("attribute " + std::to_string(x) +
                                  " has fewer entries than folds");
    std::vector<Index> entries(n);
    std::iota(entries.begin(), entries.end(), Index{0});
    std::mt19937_64 rng =
        substream(seed, stream_domain::kFold + data.layers.size() + x);
    std::shuffle(entries.begin(), entries.end(), rng);
    std::vector<int> folds(n, -1);
    for (std::size_t t = 0; t < entries.size(); ++t)
      folds[entries[t]] = static_cast<int>(t % n_folds);
    plan.attribute_folds.push_back(std::move(folds));
  }
  return plan;
}

ObservationMask training_mask(const HeterogeneousDataset& data,
                              const FoldPlan& plan, int fold) {
  check_plan(data, plan);
  const Index n = data.n_nodes;
  ObservationMask mask = ObservationMask::empty(data);
  for (std::size_t l = 0; l < data.layers.size(); ++l)
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        int f = plan.edge_folds[l][i * n + j];
        mask.edge[l](i, j) = (f >= 0 && f != fold) ? 1.0 : 0.0;
      }
  for (std::size_t x = 0; x < data.attributes.size(); ++x)
    for (Index i = 0; i < n; ++i) {
      int f = plan.attribute_folds[x][i];
      mask.attribute[x](i) = (f >= 0 && f != fold) ? 1.0 : 0.0;
    }
  return mask;
}

ObservationMask test_mask(const HeterogeneousDataset& data,
                          const FoldPlan& plan, int fold) {
  check_plan(data, plan);
  const Index n = data.n_nodes;
  ObservationMask mask = ObservationMask::empty(data);
  for (std::size_t l = 0; l < data.layers.size(); ++l)
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        mask.edge[l](i, j) = plan.edge_folds[l][i * n + j] == fold ? 1.0 : 0.0;
  for (std::size_t x = 0; x < data.attributes.size(); ++x)
    for (Index i = 0; i < n; ++i)
      mask.attribute[x](i) = plan.attribute_folds[x][i] == fold ? 1.0 : 0.0;
  return mask;
}

std::optional<double> auc(const std::vector<double>& scores,
                          const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length");
  std::size_t n_pos = 0;
  for (int label : labels) {
    if (label != 0 && label != 1)
      throw std::invalid_argument("labels must be 0 or 1");
    n_pos += label;
  }
  std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Midranks over tie runs, then the Mann-Whitney identity.
  double rank_sum_pos = 0.0;
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t stop = start;
    while (stop + 1 < order.size() &&
           scores[order[stop + 1]] == scores[order[start]])
      ++stop;
    double midrank = 0.5 * static_cast<double>(start + stop) + 1.0;
    for (std::size_t t = start; t <= stop; ++t)
      if (labels[order[t]] == 1) rank_sum_pos += midrank;
    start = stop + 1;
  }
  double u = rank_sum_pos -
             0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

void check_pairs(const std::vector<double>& predictions,
                 const std::vector<double>& observations) {
  if (predictions.size() != observations.size())
    throw std::invalid_argument("predictions and observations differ in length");
  if (predictions.empty()) throw std::invalid_argument("empty metric input");
}

}  // namespace

double mean_absolute_error(const std::vector<double>& predictions,
                           const std::vector<double>& observations) {
  check_pairs(predictions, observations);
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    sum += std::abs(predictions[i] - observations[i]);
  return sum / static_cast<double>(predictions.size());
}

double max_absolute_error(const std::vector<double>& predictions,
                          const std::vector<double>& observations) {
  check_pairs(predictions, observations);
  double worst = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    worst = std::max(worst, std::abs(predictions[i] - observations[i]));
  return worst;
}

double root_mean_squared_error(const std::vector<double>& predictions,
                               const std::vector<double>& observations) {
  check_pairs(predictions, observations);
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double d = predictions[i] - observations[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

double categorical_accuracy(const Matrix& probabilities,
                            const std::vector<Index>& observations) {
  if (static_cast<Index>(observations.size()) != probabilities.rows())
    throw std::invalid_argument("probability rows and observations mismatch");
  if (observations.empty()) throw std::invalid_argument("empty metric input");
  Index hits = 0;
  for (Index i = 0; i < probabilities.rows(); ++i) {
    Index best = 0;
    for (Index z = 1; z < probabilities.cols(); ++z)
      if (probabilities(i, z) > probabilities(i, best)) best = z;
    if (best == observations[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probabilities.rows());
}

namespace {

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> test;
};

SplitIndices split_edges(const std::vector<int>& folds, int fold) {
  SplitIndices split;
  for (std::size_t p = 0; p < folds.size(); ++p) {
    if (folds[p] < 0) continue;
    (folds[p] == fold ? split.test : split.train)
        .push_back(static_cast<Index>(p));
  }
  return split;
}

double mean_of(const std::vector<double>& values) {
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

}  // namespace

EvaluationReport cross_validate(const HeterogeneousDataset& data,
                                const ModelConfig& config,
                                const OptimizerSettings& settings,
                                const FoldPlan& plan, int n_threads) {
  check_plan(data, plan);
  const Index n = data.n_nodes;
  EvaluationReport report;

  for (int fold = 0; fold < plan.n_folds; ++fold) {
    FoldResult result;
    result.fold = fold;
    ObservationMask train = training_mask(data, plan, fold);

    FitResult fit;
    try {
      fit = fit_map(data, train, config, settings, n_threads);
    } catch (const NumericError& error) {
      result.fit_failed = true;
      result.failure = error.what();
      report.folds.push_back(std::move(result));
      continue;
    }
    result.final_log_posterior = fit.final_log_posterior;

    for (std::size_t l = 0; l < data.layers.size(); ++l) {
      const Matrix& observed = data.layers[l];
      Matrix lambda =
          expected_edge_matrix(fit.map_state, config, static_cast<Index>(l));
      SplitIndices split = split_edges(plan.edge_folds[l], fold);
      if (split.test.empty() || split.train.empty()) continue;

      std::vector<double> predicted, actual, train_actual;
      predicted.reserve(split.test.size());
      actual.reserve(split.test.size());
      for (Index p : split.test) {
        predicted.push_back(lambda(p / n, p % n));
        actual.push_back(observed(p / n, p % n));
      }
      train_actual.reserve(split.train.size());
      for (Index p : split.train) train_actual.push_back(observed(p / n, p % n));

      MetricValue metric;
      metric.target = layer_target(data, l);
      switch (data.layer_kinds[l].family) {
        case LayerFamily::bernoulli: {
          std::vector<int> labels(actual.size());
          for (std::size_t t = 0; t < actual.size(); ++t)
            labels[t] = actual[t] != 0.0 ? 1 : 0;
          std::optional<double> value = auc(predicted, labels);
          if (!value) continue;  // degenerate held-out class: metric absent
          metric.metric = "auc";
          metric.value = *value;
          metric.baseline = 0.5;
          break;
        }
        case LayerFamily::poisson: {
          metric.metric = "mae";
          metric.value = mean_absolute_error(predicted, actual);
          std::vector<double> baseline(actual.size(), mean_of(train_actual));
          metric.baseline = mean_absolute_error(baseline, actual);
          break;
        }
        case LayerFamily::gaussian: {
          metric.metric = "rmse";
          metric.value = root_mean_squared_error(predicted, actual);
          std::vector<double> baseline(actual.size(), mean_of(train_actual));
          metric.baseline = root_mean_squared_error(baseline, actual);
          break;
        }
      }
      result.metrics.push_back(std::move(metric));
    }

    for (std::size_t x = 0; x < data.attributes.size(); ++x) {
      const Vector& observed = data.attributes[x];
      Matrix pi = expected_attribute_matrix(fit.map_state, config,
                                            static_cast<Index>(x));
      std::vector<Index> test_nodes, train_nodes;
      for (Index i = 0; i < n; ++i) {
        int f = plan.attribute_folds[x][i];
        if (f == fold) test_nodes.push_back(i);
        else if (f >= 0) train_nodes.push_back(i);
      }
      if (test_nodes.empty() || train_nodes.empty()) continue;

      MetricValue metric;
      metric.target = attribute_target(data, x);
      switch (data.attribute_kinds[x].family) {
        case AttributeFamily::categorical: {
          const Index z_count = data.attribute_kinds[x].categories;
          Matrix rows(test_nodes.size(), z_count);
          std::vector<Index> cats(test_nodes.size());
          for (std::size_t t = 0; t < test_nodes.size(); ++t) {
            rows.row(t) = pi.row(test_nodes[t]);
            cats[t] = static_cast<Index>(observed(test_nodes[t]));
          }
          metric.metric = "accuracy";
          metric.value = categorical_accuracy(rows, cats);
          std::vector<Index> counts(z_count, 0);
          for (Index i : train_nodes)
            ++counts[static_cast<Index>(observed(i))];
          Index top = static_cast<Index>(std::distance(
              counts.begin(), std::max_element(counts.begin(), counts.end())));
          Index hits = 0;
          for (Index cat : cats) hits += cat == top ? 1 : 0;
          metric.baseline =
              static_cast<double>(hits) / static_cast<double>(cats.size());
          metric.uniform_baseline = 1.0 / static_cast<double>(z_count);
          break;
        }
        case AttributeFamily::poisson: {
          std::vector<double> predicted, actual, train_actual;
          for (Index i : test_nodes) {
            predicted.push_back(pi(i, 0));
            actual.push_back(observed(i));
          }
          for (Index i : train_nodes) train_actual.push_back(observed(i));
          metric.metric = "mae";
          metric.value = mean_absolute_error(predicted, actual);
          std::vector<double> baseline(actual.size(), mean_of(train_actual));
          metric.baseline = mean_absolute_error(baseline, actual);
          break;
        }
        case AttributeFamily::gaussian: {
          std::vector<double> predicted, actual, train_actual;
          for (Index i : test_nodes) {
            predicted.push_back(pi(i, 0));
            actual.push_back(observed(i));
          }
          for (Index i : train_nodes) train_actual.push_back(observed(i));
          metric.metric = "rmse";
          metric.value = root_mean_squared_error(predicted, actual);
          std::vector<double> baseline(actual.size(), mean_of(train_actual));
          metric.baseline = root_mean_squared_error(baseline, actual);
          break;
        }
      }
      result.metrics.push_back(std::move(metric));
    }
    report.folds.push_back(std::move(result));
  }

  // Aggregate mean and population deviation over folds carrying each metric.
  std::map<std::pair<std::string, std::string>, std::vector<const MetricValue*>>
      grouped;
  for (const FoldResult& fold : report.folds) {
    if (fold.fit_failed) continue;
    for (const MetricValue& metric : fold.metrics)
      grouped[{metric.target, metric.metric}].push_back(&metric);
  }
  for (const auto& [key, values] : grouped) {
    MetricSummary summary;
    summary.target = key.first;
    summary.metric = key.second;
    double mean = 0.0, baseline = 0.0;
    for (const MetricValue* value : values) {
      mean += value->value;
      baseline += value->baseline;
    }
    mean /= static_cast<double>(values.size());
    baseline /= static_cast<double>(values.size());
    double spread = 0.0;
    for (const MetricValue* value : values) {
      double d = value->value - mean;
      spread += d * d;
    }
    summary.mean = mean;
    summary.std_dev = std::sqrt(spread / static_cast<double>(values.size()));
    summary.baseline_mean = baseline;
    report.summary.push_back(std::move(summary));
  }
  return report;
}

namespace {

// Distances between two same-shaped realizations, per data type.
double binary_log_loss(const std::vector<double>& target,
                       const std::vector<double>& replica) {
  double sum = 0.0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    double a = target[t];
    double r = replica[t];
    sum -= a * std::log(std::max(r, kProbFloor)) +
           (1.0 - a) * std::log(std::max(1.0 - r, kProbFloor));
  }
  return sum / static_cast<double>(target.size());
}

double mismatch_rate(const std::vector<double>& target,
                     const std::vector<double>& replica) {
  double sum = 0.0;
  for (std::size_t t = 0; t < target.size(); ++t)
    sum += target[t] == replica[t] ? 0.0 : 1.0;
  return sum / static_cast<double>(target.size());
}

struct PpcMetric {
  std::string target;
  std::string metric;
  bool is_layer = false;
  std::size_t entity = 0;
};

// One realization flattened into comparable vectors per layer/attribute.
struct Realization {
  std::vector<std::vector<double>> layer_entries;
  std::vector<std::vector<double>> attribute_entries;
};

Realization flatten_dataset(const HeterogeneousDataset& data) {
  Realization real;
  const Index n = data.n_nodes;
  real.layer_entries.resize(data.layers.size());
  for (std::size_t l = 0; l < data.layers.size(); ++l) {
    auto& entries = real.layer_entries[l];
    entries.reserve(n * (n - 1));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j) entries.push_back(data.layers[l](i, j));
  }
  real.attribute_entries.resize(data.attributes.size());
  for (std::size_t x = 0; x < data.attributes.size(); ++x) {
    auto& entries = real.attribute_entries[x];
    entries.reserve(n);
    for (Index i = 0; i < n; ++i) entries.push_back(data.attributes[x](i));
  }
  return real;
}

double ppc_distance(const PpcMetric& metric, const Realization& target,
                    const Realization& replica) {
  const std::vector<double>& t =
      metric.is_layer ? target.layer_entries[metric.entity]
                      : target.attribute_entries[metric.entity];
  const std::vector<double>& r =
      metric.is_layer ? replica.layer_entries[metric.entity]
                      : replica.attribute_entries[metric.entity];
  if (metric.metric == "logloss") return binary_log_loss(t, r);
  if (metric.metric == "mae") return mean_absolute_error(r, t);
  if (metric.metric == "rmse") return root_mean_squared_error(r, t);
  if (metric.metric == "one_minus_accuracy") return mismatch_rate(t, r);
  throw std::logic_error("unknown ppc metric " + metric.metric);
}

}  // namespace

std::vector<PpcSeries> posterior_predictive_check(
    const HeterogeneousDataset& data, const PosteriorEstimate& posterior,
    const ModelConfig& config, int n_samples, std::uint64_t seed,
    int n_threads) {
  if (n_samples < 1) throw std::invalid_argument("need at least one sample");
  const Index n = data.n_nodes;
  const std::vector<BlockSpan> spans = block_spans(config, n);
  if (posterior.covariance.blocks.size() != spans.size())
    throw std::invalid_argument(
        "posterior covariance does not cover every block");

  // Per-block Cholesky factors of the covariance, in span order.
  const Vector map_flat = pack(posterior.map_state);
  std::vector<Matrix> factors(spans.size());
  for (std::size_t b = 0; b < spans.size(); ++b) {
    const CovarianceBlock& block = posterior.covariance.blocks[b];
    if (block.span.offset != spans[b].offset ||
        block.span.size != spans[b].size)
      throw std::invalid_argument("covariance blocks out of order");
    Eigen::LLT<Matrix> llt(block.covariance);
    if (llt.info() != Eigen::Success)
      throw NumericError("covariance block " + std::to_string(b) +
                         " is not positive definite");
    factors[b] = llt.matrixL();
  }

  // PPC generation follows SI-style replication with the Gaussian noise
  // scale fixed rather than inherited from the fit config.
  ModelConfig generation = config;
  for (LayerKind& kind : generation.layer_kinds)
    if (kind.family == LayerFamily::gaussian)
      kind.gaussian_variance = kPpcGaussianSigma * kPpcGaussianSigma;
  for (AttributeKind& kind : generation.attribute_kinds)
    if (kind.family == AttributeFamily::gaussian)
      kind.gaussian_variance = kPpcGaussianSigma * kPpcGaussianSigma;

  std::vector<PpcMetric> metrics;
  for (std::size_t l = 0; l < data.layers.size(); ++l) {
    PpcMetric metric;
    metric.target = layer_target(data, l);
    metric.is_layer = true;
    metric.entity = l;
    switch (data.layer_kinds[l].family) {
      case LayerFamily::bernoulli: metric.metric = "logloss"; break;
      case LayerFamily::poisson: metric.metric = "mae"; break;
      case LayerFamily::gaussian: metric.metric = "rmse"; break;
    }
    metrics.push_back(std::move(metric));
  }
  for (std::size_t x = 0; x < data.attributes.size(); ++x) {
    PpcMetric metric;
    metric.target = attribute_target(data, x);
    metric.entity = x;
    switch (data.attribute_kinds[x].family) {
      case AttributeFamily::categorical:
        metric.metric = "one_minus_accuracy";
        break;
      case AttributeFamily::poisson: metric.metric = "mae"; break;
      case AttributeFamily::gaussian: metric.metric = "rmse"; break;
    }
    metrics.push_back(std::move(metric));
  }

  auto draw_state = [&](std::mt19937_64& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    Vector flat = map_flat;
    for (std::size_t b = 0; b < spans.size(); ++b) {
      Vector z(spans[b].size);
      for (Index p = 0; p < spans[b].size; ++p) z(p) = unit(rng);
      flat.segment(spans[b].offset, spans[b].size) += factors[b] * z;
    }
    return unpack(flat, config, n);
  };

  auto draw_realization = [&](const LatentState& state, std::mt19937_64& rng) {
    Realization real;
    real.layer_entries.resize(data.layers.size());
    for (std::size_t l = 0; l < data.layers.size(); ++l) {
      Matrix lambda =
          expected_edge_matrix(state, generation, static_cast<Index>(l));
      auto& entries = real.layer_entries[l];
      entries.reserve(n * (n - 1));
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
          if (i == j) continue;
          switch (generation.layer_kinds[l].family) {
            case LayerFamily::bernoulli: {
              std::bernoulli_distribution d(
                  std::min(std::max(lambda(i, j), 0.0), 1.0));
              entries.push_back(d(rng) ? 1.0 : 0.0);
              break;
            }
            case LayerFamily::poisson: {
              std::poisson_distribution<long> d(
                  std::max(lambda(i, j), kProbFloor));
              entries.push_back(static_cast<double>(d(rng)));
              break;
            }
            case LayerFamily::gaussian: {
              std::normal_distribution<double> d(
                  lambda(i, j), kPpcGaussianSigma);
              entries.push_back(d(rng));
              break;
            }
          }
        }
    }
    real.attribute_entries.resize(data.attributes.size());
    for (std::size_t x = 0; x < data.attributes.size(); ++x) {
      Matrix pi =
          expected_attribute_matrix(state, generation, static_cast<Index>(x));
      auto& entries = real.attribute_entries[x];
      entries.reserve(n);
      for (Index i = 0; i < n; ++i) {
        switch (generation.attribute_kinds[x].family) {
          case AttributeFamily::categorical: {
            std::vector<double> weights(pi.cols());
            for (Index z = 0; z < pi.cols(); ++z) weights[z] = pi(i, z);
            std::discrete_distribution<int> d(weights.begin(), weights.end());
            entries.push_back(static_cast<double>(d(rng)));
            break;
          }
          case AttributeFamily::poisson: {
            std::poisson_distribution<long> d(std::max(pi(i, 0), kProbFloor));
            entries.push_back(static_cast<double>(d(rng)));
            break;
          }
          case AttributeFamily::gaussian: {
            std::normal_distribution<double> d(pi(i, 0), kPpcGaussianSigma);
            entries.push_back(d(rng));
            break;
          }
        }
      }
    }
    return real;
  };

  const Realization observed = flatten_dataset(data);
  std::vector<std::vector<PpcPoint>> points(
      metrics.size(), std::vector<PpcPoint>(n_samples));
  parallel_for(n_samples, resolve_threads(n_threads), [&](Index s) {
    std::mt19937_64 rng =
        substream(seed, stream_domain::kPpc + static_cast<std::uint64_t>(s));
    LatentState first_state = draw_state(rng);
    Realization first = draw_realization(first_state, rng);
    LatentState second_state = draw_state(rng);
    Realization second = draw_realization(second_state, rng);
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      points[m][s].to_data = ppc_distance(metrics[m], observed, first);
      points[m][s].to_replica = ppc_distance(metrics[m], second, first);
    }
  });

  std::vector<PpcSeries> series(metrics.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    series[m].target = metrics[m].target;
    series[m].metric = metrics[m].metric;
    series[m].points = std::move(points[m]);
    Index above = 0;
    for (const PpcPoint& point : series[m].points)
      above += point.to_replica >= point.to_data ? 1 : 0;
    series[m].fraction_above =
        static_cast<double>(above) / static_cast<double>(n_samples);
  }
  return series;
}

namespace {

struct OverlapGrid {
  Vector points;
  double step = 0.0;
  Matrix densities;  // K x points
};

OverlapGrid density_grid(const Vector& means, const Vector& variances) {
  if (means.size() != variances.size())
    throw std::invalid_argument("means and variances differ in length");
  if (means.size() < 2)
    throw std::invalid_argument("need at least two components");
  if (!means.allFinite() || (variances.array() <= 0.0).any())
    throw std::invalid_argument("components must be finite with positive variance");

  constexpr Index kPoints = 4097;  // 2^12 + 1
  const double sigma_max = std::sqrt(variances.maxCoeff());
  const double lo = means.minCoeff() - 8.0 * sigma_max;
  const double hi = means.maxCoeff() + 8.0 * sigma_max;

  OverlapGrid grid;
  grid.step = (hi - lo) / static_cast<double>(kPoints - 1);
  grid.points.resize(kPoints);
  for (Index p = 0; p < kPoints; ++p)
    grid.points(p) = lo + grid.step * static_cast<double>(p);
  grid.densities.resize(means.size(), kPoints);
  for (Index c = 0; c < means.size(); ++c) {
    const double norm =
        1.0 / std::sqrt(2.0 * std::numbers::pi * variances(c));
    for (Index p = 0; p < kPoints; ++p) {
      double z = grid.points(p) - means(c);
      grid.densities(c, p) = norm * std::exp(-0.5 * z * z / variances(c));
    }
  }
  return grid;
}

double trapezoid(const Vector& values, double step) {
  double sum = 0.5 * (values(0) + values(values.size() - 1));
  for (Index p = 1; p + 1 < values.size(); ++p) sum += values(p);
  return sum * step;
}

}  // namespace

double overlap(const Vector& means, const Vector& variances) {
  OverlapGrid grid = density_grid(means, variances);
  const Index k = means.size();
  double total = 0.0;
  Index pairs = 0;
  for (Index a = 0; a < k; ++a)
    for (Index b = a + 1; b < k; ++b) {
      Vector gap =
          (grid.densities.row(a) - grid.densities.row(b)).cwiseAbs().transpose();
      double iae = trapezoid(gap, grid.step);
      total += 1.0 - iae / 2.0;
      ++pairs;
    }
  return total / static_cast<double>(pairs);
}

double barycenter_variance(const Vector& means, const Vector& variances) {
  OverlapGrid grid = density_grid(means, variances);
  Vector barycenter = grid.densities.colwise().mean().transpose();
  Vector first = barycenter.cwiseProduct(grid.points);
  Vector second = first.cwiseProduct(grid.points);
  double mass = trapezoid(barycenter, grid.step);
  double mean = trapezoid(first, grid.step) / mass;
  double moment = trapezoid(second, grid.step) / mass;
  return moment - mean * mean;
}

double cosine_recovery(const Matrix& inferred, const Matrix& truth,
                       bool approximate) {
  if (inferred.rows() != truth.rows() || inferred.cols() != truth.cols())
    throw std::invalid_argument("membership matrices differ in shape");
  const Index k = inferred.cols();
  const Index n = inferred.rows();
  if (k < 1 || n < 1) throw std::invalid_argument("empty membership matrix");
  if (k > 8 && !approximate)
    throw std::invalid_argument(
        "exact permutation search is limited to 8 communities");

  // Mean row cosine decomposes into a linear assignment over column pairs:
  // contribution(a, b) = mean_i inferred_ia truth_ib / (|inferred_i||truth_i|).
  Matrix contribution = Matrix::Zero(k, k);
  for (Index i = 0; i < n; ++i) {
    double norm_product = inferred.row(i).norm() * truth.row(i).norm();
    if (norm_product == 0.0) continue;
    contribution +=
        inferred.row(i).transpose() * truth.row(i) / norm_product;
  }
  contribution /= static_cast<double>(n);

  if (approximate && k > 8) {
    // Greedy assignment on the largest remaining contribution.
    std::vector<bool> used_row(k, false), used_col(k, false);
    double score = 0.0;
    for (Index step = 0; step < k; ++step) {
      double best = -2.0;
      Index best_row = 0, best_col = 0;
      for (Index a = 0; a < k; ++a) {
        if (used_row[a]) continue;
        for (Index b = 0; b < k; ++b) {
          if (used_col[b]) continue;
          if (contribution(a, b) > best) {
            best = contribution(a, b);
            best_row = a;
            best_col = b;
          }
        }
      }
      used_row[best_row] = true;
      used_col[best_col] = true;
      score += best;
    }
    return score;
  }

  std::vector<Index> perm(k);
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = -2.0;
  do {
    double score = 0.0;
    for (Index b = 0; b < k; ++b) score += contribution(perm[b], b);
    best = std::max(best, score);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace piham
