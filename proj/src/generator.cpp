#include "piham/generator.hpp"

#include "piham/model.hpp"
#include "piham/rng.hpp"
#include "piham/transforms.hpp"

#include <cmath>
#include <random>
#include <string>

namespace piham {

namespace {

void check_spec(const NormalSpec& spec, const char* name) {
  if (!(spec.variance > 0.0))
    throw std::invalid_argument(std::string(name) +
                                " variance must be positive");
  if (!std::isfinite(spec.mean))
    throw std::invalid_argument(std::string(name) + " mean must be finite");
}

double draw_normal(std::mt19937_64& rng, double mean, double variance) {
  std::normal_distribution<double> d(mean, std::sqrt(variance));
  return d(rng);
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n_nodes < 1) throw std::invalid_argument("n_nodes must be positive");
  if (communities < 1 || communities > n_nodes)
    throw std::invalid_argument("communities must lie in [1, n_nodes]");
  check_spec(membership_out_in, "membership_out_in");
  check_spec(membership_out_out, "membership_out_out");
  check_spec(membership_in_in, "membership_in_in");
  check_spec(membership_in_out, "membership_in_out");
  check_spec(affinity_diag, "affinity_diag");
  check_spec(affinity_offdiag, "affinity_offdiag");
  check_spec(categorical_match, "categorical_match");
  check_spec(categorical_mismatch, "categorical_mismatch");
  check_spec(categorical_padding, "categorical_padding");
  check_spec(poisson_loading, "poisson_loading");
  check_spec(gaussian_loading, "gaussian_loading");
  model_config().validate();
}

ModelConfig GeneratorConfig::model_config() const {
  ModelConfig config;
  config.communities = static_cast<int>(communities);
  config.layer_kinds = layer_kinds;
  config.attribute_kinds = attribute_kinds;
  config.directed = true;
  return config;
}

std::vector<Index> contiguous_groups(Index n_nodes, Index communities) {
  std::vector<Index> groups(n_nodes);
  for (Index i = 0; i < n_nodes; ++i) groups[i] = (i * communities) / n_nodes;
  return groups;
}

GroundTruth sample_latent(const GeneratorConfig& config) {
  config.validate();
  const Index n = config.n_nodes;
  const Index k = config.communities;
  std::mt19937_64 rng = substream(config.rng_seed, stream_domain::kGenerator);

  GroundTruth truth;
  truth.hard_groups = contiguous_groups(n, k);
  truth.latent.out_membership.resize(n, k);
  truth.latent.in_membership.resize(n, k);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < k; ++c) {
      const NormalSpec& spec = truth.hard_groups[i] == c
                                   ? config.membership_out_in
                                   : config.membership_out_out;
      truth.latent.out_membership(i, c) =
          draw_normal(rng, spec.mean, spec.variance);
    }
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < k; ++c) {
      const NormalSpec& spec = truth.hard_groups[i] == c
                                   ? config.membership_in_in
                                   : config.membership_in_out;
      truth.latent.in_membership(i, c) =
          draw_normal(rng, spec.mean, spec.variance);
    }

  truth.latent.affinity.reserve(config.layer_kinds.size());
  for (std::size_t l = 0; l < config.layer_kinds.size(); ++l) {
    Matrix w(k, k);
    for (Index r = 0; r < k; ++r)
      for (Index c = 0; c < k; ++c) {
        const NormalSpec& spec =
            r == c ? config.affinity_diag : config.affinity_offdiag;
        w(r, c) = draw_normal(rng, spec.mean, spec.variance);
      }
    truth.latent.affinity.push_back(std::move(w));
  }

  truth.latent.attribute_loading.reserve(config.attribute_kinds.size());
  for (const AttributeKind& kind : config.attribute_kinds) {
    Matrix h(k, kind.width());
    switch (kind.family) {
      case AttributeFamily::categorical:
        for (Index r = 0; r < k; ++r)
          for (Index z = 0; z < kind.width(); ++z) {
            // 1-based community index sets the preferred-category mean; rows
            // or columns beyond the square part draw from padding.
            if (r >= kind.width() || z >= k)
              h(r, z) = draw_normal(rng, config.categorical_padding.mean,
                                    config.categorical_padding.variance);
            else if (r == z)
              h(r, z) = draw_normal(
                  rng, config.categorical_match.mean + static_cast<double>(r + 1),
                  config.categorical_match.variance);
            else
              h(r, z) = draw_normal(rng, config.categorical_mismatch.mean,
                                    config.categorical_mismatch.variance);
          }
        break;
      case AttributeFamily::poisson:
        for (Index r = 0; r < k; ++r)
          h(r, 0) = draw_normal(
              rng,
              config.poisson_loading.mean * static_cast<double>(r + 3) / 3.0,
              config.poisson_loading.variance);
        break;
      case AttributeFamily::gaussian:
        for (Index r = 0; r < k; ++r)
          h(r, 0) = draw_normal(
              rng, config.gaussian_loading.mean - 3.0 * static_cast<double>(r),
              config.gaussian_loading.variance);
        break;
    }
    truth.latent.attribute_loading.push_back(std::move(h));
  }

  truth.out_simplex = softmax_rows(truth.latent.out_membership);
  truth.in_simplex = softmax_rows(truth.latent.in_membership);
  return truth;
}

std::vector<Matrix> sample_network(const GroundTruth& truth,
                                   const GeneratorConfig& config,
                                   std::uint64_t stream) {
  const ModelConfig model = config.model_config();
  const Index n = config.n_nodes;
  std::vector<Matrix> layers;
  layers.reserve(config.layer_kinds.size());
  for (std::size_t l = 0; l < config.layer_kinds.size(); ++l) {
    std::mt19937_64 rng = substream(config.rng_seed, stream + l);
    Matrix lambda =
        expected_edge_matrix(truth.latent, model, static_cast<Index>(l));
    Matrix a = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        switch (config.layer_kinds[l].family) {
          case LayerFamily::bernoulli: {
            std::bernoulli_distribution d(
                std::min(std::max(lambda(i, j), 0.0), 1.0));
            a(i, j) = d(rng) ? 1.0 : 0.0;
            break;
          }
          case LayerFamily::poisson: {
            std::poisson_distribution<long> d(
                std::max(lambda(i, j), kProbFloor));
            a(i, j) = static_cast<double>(d(rng));
            break;
          }
          case LayerFamily::gaussian: {
            a(i, j) = draw_normal(rng, lambda(i, j),
                                  config.layer_kinds[l].gaussian_variance);
            break;
          }
        }
      }
    layers.push_back(std::move(a));
  }
  return layers;
}

std::vector<Matrix> sample_attributes(const GroundTruth& truth,
                                      const GeneratorConfig& config,
                                      std::uint64_t stream) {
  const ModelConfig model = config.model_config();
  const Index n = config.n_nodes;
  std::vector<Matrix> columns;
  columns.reserve(config.attribute_kinds.size());
  for (std::size_t x = 0; x < config.attribute_kinds.size(); ++x) {
    std::mt19937_64 rng = substream(config.rng_seed, stream + x);
    Matrix pi =
        expected_attribute_matrix(truth.latent, model, static_cast<Index>(x));
    Matrix col(n, 1);
    for (Index i = 0; i < n; ++i) {
      switch (config.attribute_kinds[x].family) {
        case AttributeFamily::categorical: {
          std::vector<double> weights(pi.cols());
          for (Index z = 0; z < pi.cols(); ++z) weights[z] = pi(i, z);
          std::discrete_distribution<int> d(weights.begin(), weights.end());
          col(i, 0) = static_cast<double>(d(rng));
          break;
        }
        case AttributeFamily::poisson: {
          std::poisson_distribution<long> d(std::max(pi(i, 0), kProbFloor));
          col(i, 0) = static_cast<double>(d(rng));
          break;
        }
        case AttributeFamily::gaussian: {
          col(i, 0) = draw_normal(rng, pi(i, 0),
                                  config.attribute_kinds[x].gaussian_variance);
          break;
        }
      }
    }
    columns.push_back(std::move(col));
  }
  return columns;
}

GeneratedData generate_dataset(const GeneratorConfig& config) {
  GeneratedData out;
  out.truth = sample_latent(config);
  const std::uint64_t network_base = stream_domain::kGenerator + 1;
  const std::uint64_t attribute_base =
      network_base + config.layer_kinds.size();
  std::vector<Matrix> layers = sample_network(out.truth, config, network_base);
  std::vector<Matrix> attributes =
      sample_attributes(out.truth, config, attribute_base);

  out.dataset.n_nodes = config.n_nodes;
  out.dataset.directed = true;
  out.dataset.layer_kinds = config.layer_kinds;
  out.dataset.layers = std::move(layers);
  out.dataset.attribute_kinds = config.attribute_kinds;
  out.dataset.attributes.reserve(attributes.size());
  for (const Matrix& col : attributes) out.dataset.attributes.push_back(col);
  out.dataset.node_labels.reserve(config.n_nodes);
  for (Index i = 0; i < config.n_nodes; ++i)
    out.dataset.node_labels.push_back(std::to_string(i));
  out.dataset.validate();
  return out;
}

}  // namespace piham
