#include "piham/gradient.hpp"

#include "piham/transforms.hpp"

#include <cmath>

namespace piham {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

// Vector-Jacobian product of a row-wise softmax at the simplex output:
// dRaw_ik = S_ik (dS_ik - sum_l dS_il S_il).
Matrix softmax_rows_backward(const Matrix& simplex, const Matrix& d_simplex) {
  ArrayX row_dot = (d_simplex.array() * simplex.array()).rowwise().sum();
  return (simplex.array() *
          (d_simplex.array().colwise() - row_dot))
      .matrix();
}

ArrayXX effective_mask(const ArrayXX& edge_mask, bool include_self_loops) {
  ArrayXX include = edge_mask;
  if (!include_self_loops) {
    Index n = std::min(include.rows(), include.cols());
    for (Index i = 0; i < n; ++i) include(i, i) = 0.0;
  }
  return include;
}

struct ValueGradient {
  double value = 0.0;
  Gradient grad;
};

// Single reverse pass: per-entry log densities and dL/dλ together, then
// pullbacks through the bilinear form, the links, and the row softmaxes.
ValueGradient accumulate(const HeterogeneousDataset& data,
                         const LatentState& state, const ObservationMask& mask,
                         const ModelConfig& config) {
  TransformedState t = transform(state, config);
  const Matrix& fu = t.out_simplex;
  const bool directed = state.directed();
  const Matrix& fv = directed ? t.in_simplex : t.out_simplex;

  ValueGradient out;
  KahanSum value;
  out.grad.affinity.resize(data.layers.size());
  out.grad.attribute_loading.resize(data.attributes.size());
  Matrix d_fu = Matrix::Zero(fu.rows(), fu.cols());
  Matrix d_fv = Matrix::Zero(fu.rows(), fu.cols());

  for (std::size_t l = 0; l < data.layers.size(); ++l) {
    const Matrix& a = data.layers[l];
    const Matrix& g = t.linked_affinity[l];
    Matrix lambda = fu * g * fv.transpose();
    ArrayXX include = effective_mask(mask.edge[l], config.include_self_loops);
    Matrix d_lambda = Matrix::Zero(a.rows(), a.cols());

    switch (config.layer_kinds[l].family) {
      case LayerFamily::bernoulli:
        for (Index i = 0; i < a.rows(); ++i)
          for (Index j = 0; j < a.cols(); ++j) {
            if (include(i, j) == 0.0) continue;
            double p = std::min(std::max(lambda(i, j), kProbFloor),
                                1.0 - kProbFloor);
            value.add(a(i, j) * std::log(p) +
                      (1.0 - a(i, j)) * std::log1p(-p));
            d_lambda(i, j) = a(i, j) / p - (1.0 - a(i, j)) / (1.0 - p);
          }
        break;
      case LayerFamily::poisson:
        for (Index i = 0; i < a.rows(); ++i)
          for (Index j = 0; j < a.cols(); ++j) {
            if (include(i, j) == 0.0) continue;
            double rate = std::max(lambda(i, j), kProbFloor);
            value.add(a(i, j) * std::log(rate) - rate -
                      std::lgamma(a(i, j) + 1.0));
            d_lambda(i, j) = a(i, j) / rate - 1.0;
          }
        break;
      case LayerFamily::gaussian: {
        const double variance = config.layer_kinds[l].gaussian_variance;
        const double log_norm = 0.5 * (kLogTwoPi + std::log(variance));
        for (Index i = 0; i < a.rows(); ++i)
          for (Index j = 0; j < a.cols(); ++j) {
            if (include(i, j) == 0.0) continue;
            double residual = a(i, j) - lambda(i, j);
            value.add(-log_norm - residual * residual / (2.0 * variance));
            d_lambda(i, j) = residual / variance;
          }
        break;
      }
    }

    d_fu += d_lambda * fv * g.transpose();
    d_fv += d_lambda.transpose() * fu * g;
    Matrix d_g = fu.transpose() * d_lambda * fv;
    switch (config.layer_kinds[l].family) {
      case LayerFamily::bernoulli:
        out.grad.affinity[l] =
            (d_g.array() * g.array() * (1.0 - g.array())).matrix();
        break;
      case LayerFamily::poisson:
        out.grad.affinity[l] = (d_g.array() * g.array()).matrix();
        break;
      case LayerFamily::gaussian:
        out.grad.affinity[l] = d_g;
        break;
    }
  }

  Matrix mix = 0.5 * (fu + fv);
  for (std::size_t x = 0; x < data.attributes.size(); ++x) {
    const Vector& col = data.attributes[x];
    const Matrix& g = t.linked_loading[x];
    Matrix pi = mix * g;
    const ArrayX& include = mask.attribute[x];
    Matrix d_pi = Matrix::Zero(pi.rows(), pi.cols());

    switch (config.attribute_kinds[x].family) {
      case AttributeFamily::categorical:
        for (Index i = 0; i < col.size(); ++i) {
          if (include(i) == 0.0) continue;
          Index z = static_cast<Index>(col(i));
          double p = std::max(pi(i, z), kProbFloor);
          value.add(std::log(p));
          d_pi(i, z) = 1.0 / p;
        }
        break;
      case AttributeFamily::poisson:
        for (Index i = 0; i < col.size(); ++i) {
          if (include(i) == 0.0) continue;
          double rate = std::max(pi(i, 0), kProbFloor);
          value.add(col(i) * std::log(rate) - rate -
                    std::lgamma(col(i) + 1.0));
          d_pi(i, 0) = col(i) / rate - 1.0;
        }
        break;
      case AttributeFamily::gaussian: {
        const double variance = config.attribute_kinds[x].gaussian_variance;
        const double log_norm = 0.5 * (kLogTwoPi + std::log(variance));
        for (Index i = 0; i < col.size(); ++i) {
          if (include(i) == 0.0) continue;
          double residual = col(i) - pi(i, 0);
          value.add(-log_norm - residual * residual / (2.0 * variance));
          d_pi(i, 0) = residual / variance;
        }
        break;
      }
    }

    Matrix d_mix = d_pi * g.transpose();
    d_fu += 0.5 * d_mix;
    d_fv += 0.5 * d_mix;
    Matrix d_g = mix.transpose() * d_pi;
    switch (config.attribute_kinds[x].family) {
      case AttributeFamily::categorical:
        out.grad.attribute_loading[x] = softmax_rows_backward(g, d_g);
        break;
      case AttributeFamily::poisson:
        out.grad.attribute_loading[x] = (d_g.array() * g.array()).matrix();
        break;
      case AttributeFamily::gaussian:
        out.grad.attribute_loading[x] = d_g;
        break;
    }
  }

  if (directed) {
    out.grad.out_membership = softmax_rows_backward(fu, d_fu);
    out.grad.in_membership = softmax_rows_backward(fv, d_fv);
  } else {
    out.grad.out_membership = softmax_rows_backward(fu, d_fu + d_fv);
  }

  const double v0 = config.prior_variance;
  const double m0 = config.prior_mean;
  auto add_prior = [&](Matrix& d_block, const Matrix& raw) {
    d_block.array() -= (raw.array() - m0) / v0;
  };
  add_prior(out.grad.out_membership, state.out_membership);
  if (directed) add_prior(out.grad.in_membership, state.in_membership);
  for (std::size_t l = 0; l < state.affinity.size(); ++l)
    add_prior(out.grad.affinity[l], state.affinity[l]);
  for (std::size_t x = 0; x < state.attribute_loading.size(); ++x)
    add_prior(out.grad.attribute_loading[x], state.attribute_loading[x]);
  out.value = value.value() + log_prior(state, config);
  return out;
}

}  // namespace

Vector Gradient::flat() const {
  LatentState view;
  view.out_membership = out_membership;
  view.in_membership = in_membership;
  view.affinity = affinity;
  view.attribute_loading = attribute_loading;
  return pack(view);
}

Gradient grad_log_posterior(const HeterogeneousDataset& data,
                            const LatentState& state,
                            const ObservationMask& mask,
                            const ModelConfig& config) {
  return accumulate(data, state, mask, config).grad;
}

double log_posterior_with_gradient(const HeterogeneousDataset& data,
                                   const LatentState& state,
                                   const ObservationMask& mask,
                                   const ModelConfig& config,
                                   Vector& grad_out) {
  ValueGradient result = accumulate(data, state, mask, config);
  grad_out = result.grad.flat();
  return result.value;
}

FiniteDifferenceReport finite_difference_check(
    const HeterogeneousDataset& data, const LatentState& state,
    const ObservationMask& mask, const ModelConfig& config, double step) {
  Vector analytic;
  log_posterior_with_gradient(data, state, mask, config, analytic);
  Vector flat = pack(state);
  const Index n_nodes = data.n_nodes;

  FiniteDifferenceReport report;
  for (const BlockSpan& span : block_spans(config, n_nodes)) {
    double* worst = nullptr;
    switch (span.kind) {
      case BlockSpan::Kind::out_row: worst = &report.out_membership; break;
      case BlockSpan::Kind::in_row: worst = &report.in_membership; break;
      case BlockSpan::Kind::affinity: worst = &report.affinity; break;
      case BlockSpan::Kind::attribute: worst = &report.attribute_loading; break;
    }
    for (Index p = span.offset; p < span.offset + span.size; ++p) {
      Vector plus = flat;
      Vector minus = flat;
      plus(p) += step;
      minus(p) -= step;
      double fd = (log_posterior(data, unpack(plus, config, n_nodes), mask,
                                 config) -
                   log_posterior(data, unpack(minus, config, n_nodes), mask,
                                 config)) /
                  (2.0 * step);
      double rel = std::abs(fd - analytic(p)) /
                   std::max(1.0, std::abs(analytic(p)));
      *worst = std::max(*worst, rel);
    }
  }
  return report;
}

}  // namespace piham
