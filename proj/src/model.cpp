#include "piham/model.hpp"

#include "piham/transforms.hpp"

#include <cmath>

namespace piham {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

void check_shapes(const HeterogeneousDataset& data, const LatentState& state,
                  const ObservationMask& mask, const ModelConfig& config) {
  const Index k = config.communities;
  if (state.out_membership.rows() != data.n_nodes ||
      state.out_membership.cols() != k)
    throw std::invalid_argument("out membership shape mismatch");
  if (config.directed != state.directed())
    throw std::invalid_argument("state direction does not match config");
  if (state.affinity.size() != data.layers.size() ||
      state.attribute_loading.size() != data.attributes.size())
    throw std::invalid_argument("state block count mismatch");
  if (mask.edge.size() != data.layers.size() ||
      mask.attribute.size() != data.attributes.size())
    throw std::invalid_argument("mask shape mismatch");
}

}  // namespace

TransformedState transform(const LatentState& state,
                           const ModelConfig& config) {
  TransformedState t;
  t.out_simplex = softmax_rows(state.out_membership);
  if (state.in_membership.size())
    t.in_simplex = softmax_rows(state.in_membership);
  t.linked_affinity.reserve(state.affinity.size());
  for (std::size_t l = 0; l < state.affinity.size(); ++l)
    t.linked_affinity.push_back(
        transform_g(config.layer_kinds[l], state.affinity[l]));
  t.linked_loading.reserve(state.attribute_loading.size());
  for (std::size_t x = 0; x < state.attribute_loading.size(); ++x)
    t.linked_loading.push_back(
        transform_g(config.attribute_kinds[x], state.attribute_loading[x]));
  return t;
}

Matrix expected_edge_matrix(const LatentState& state,
                            const ModelConfig& config, Index layer) {
  Matrix fu = softmax_rows(state.out_membership);
  Matrix fv = state.in_membership.size() ? softmax_rows(state.in_membership)
                                         : fu;
  Matrix g = transform_g(config.layer_kinds[layer], state.affinity[layer]);
  return fu * g * fv.transpose();
}

double expected_edge_value(const LatentState& state, const ModelConfig& config,
                           Index layer, Index i, Index j) {
  RowVector fu = softmax_row(state.out_membership.row(i));
  RowVector fv = softmax_row(state.in_or_out().row(j));
  Matrix g = transform_g(config.layer_kinds[layer], state.affinity[layer]);
  return fu * g * fv.transpose();
}

Matrix expected_attribute_matrix(const LatentState& state,
                                 const ModelConfig& config, Index attribute) {
  Matrix fu = softmax_rows(state.out_membership);
  Matrix fv = state.in_membership.size() ? softmax_rows(state.in_membership)
                                         : fu;
  Matrix g = transform_g(config.attribute_kinds[attribute],
                         state.attribute_loading[attribute]);
  return 0.5 * (fu + fv) * g;
}

double expected_attribute_value(const LatentState& state,
                                const ModelConfig& config, Index attribute,
                                Index i) {
  if (config.attribute_kinds[attribute].family == AttributeFamily::categorical)
    throw std::invalid_argument(
        "categorical attribute has a vector expectation");
  RowVector fu = softmax_row(state.out_membership.row(i));
  RowVector fv = softmax_row(state.in_or_out().row(i));
  Matrix g = transform_g(config.attribute_kinds[attribute],
                         state.attribute_loading[attribute]);
  return (0.5 * (fu + fv) * g)(0, 0);
}

double log_likelihood(const HeterogeneousDataset& data,
                      const LatentState& state, const ObservationMask& mask,
                      const ModelConfig& config) {
  check_shapes(data, state, mask, config);
  TransformedState t = transform(state, config);
  const Matrix& fu = t.out_simplex;
  const Matrix& fv = t.in_or_out();
  KahanSum total;

  for (std::size_t l = 0; l < data.layers.size(); ++l) {
    const Matrix& a = data.layers[l];
    Matrix lambda = fu * t.linked_affinity[l] * fv.transpose();
    ArrayXX include = mask.edge[l];
    if (!config.include_self_loops)
      include.matrix().diagonal().setZero();
    switch (config.layer_kinds[l].family) {
      case LayerFamily::bernoulli:
        for (Index i = 0; i < a.rows(); ++i)
          for (Index j = 0; j < a.cols(); ++j) {
            if (include(i, j) == 0.0) continue;
            double p = std::min(std::max(lambda(i, j), kProbFloor),
                                1.0 - kProbFloor);
            total.add(a(i, j) * std::log(p) +
                      (1.0 - a(i, j)) * std::log1p(-p));
          }
        break;
      case LayerFamily::poisson:
        for (Index i = 0; i < a.rows(); ++i)
          for (Index j = 0; j < a.cols(); ++j) {
            if (include(i, j) == 0.0) continue;
            double rate = std::max(lambda(i, j), kProbFloor);
            total.add(a(i, j) * std::log(rate) - rate -
                      std::lgamma(a(i, j) + 1.0));
          }
        break;
      case LayerFamily::gaussian: {
        const double variance = config.layer_kinds[l].gaussian_variance;
        const double log_norm = 0.5 * (kLogTwoPi + std::log(variance));
        for (Index i = 0; i < a.rows(); ++i)
          for (Index j = 0; j < a.cols(); ++j) {
            if (include(i, j) == 0.0) continue;
            double residual = a(i, j) - lambda(i, j);
            total.add(-log_norm - residual * residual / (2.0 * variance));
          }
        break;
      }
    }
  }

  Matrix mix = 0.5 * (fu + fv);
  for (std::size_t x = 0; x < data.attributes.size(); ++x) {
    const Vector& col = data.attributes[x];
    Matrix pi = mix * t.linked_loading[x];
    const ArrayX& include = mask.attribute[x];
    switch (config.attribute_kinds[x].family) {
      case AttributeFamily::categorical:
        for (Index i = 0; i < col.size(); ++i) {
          if (include(i) == 0.0) continue;
          double p = std::max(pi(i, static_cast<Index>(col(i))), kProbFloor);
          total.add(std::log(p));
        }
        break;
      case AttributeFamily::poisson:
        for (Index i = 0; i < col.size(); ++i) {
          if (include(i) == 0.0) continue;
          double rate = std::max(pi(i, 0), kProbFloor);
          total.add(col(i) * std::log(rate) - rate -
                    std::lgamma(col(i) + 1.0));
        }
        break;
      case AttributeFamily::gaussian: {
        const double variance = config.attribute_kinds[x].gaussian_variance;
        const double log_norm = 0.5 * (kLogTwoPi + std::log(variance));
        for (Index i = 0; i < col.size(); ++i) {
          if (include(i) == 0.0) continue;
          double residual = col(i) - pi(i, 0);
          total.add(-log_norm - residual * residual / (2.0 * variance));
        }
        break;
      }
    }
  }
  return total.value();
}

double log_prior(const LatentState& state, const ModelConfig& config) {
  const double variance = config.prior_variance;
  const double mean = config.prior_mean;
  const double log_norm = 0.5 * (kLogTwoPi + std::log(variance));
  double quad = 0.0;
  Index count = 0;
  auto accumulate = [&](const Matrix& block) {
    quad += (block.array() - mean).square().sum();
    count += block.size();
  };
  accumulate(state.out_membership);
  if (state.in_membership.size()) accumulate(state.in_membership);
  for (const auto& w : state.affinity) accumulate(w);
  for (const auto& h : state.attribute_loading) accumulate(h);
  return -static_cast<double>(count) * log_norm - quad / (2.0 * variance);
}

double log_posterior(const HeterogeneousDataset& data,
                     const LatentState& state, const ObservationMask& mask,
                     const ModelConfig& config) {
  return log_likelihood(data, state, mask, config) + log_prior(state, config);
}

}  // namespace piham
