#include "piham/types.hpp"

#include <cmath>

namespace piham {

namespace {

bool is_nonneg_integer(double v) {
  return v >= 0.0 && std::floor(v) == v && std::isfinite(v);
}

void validate_kinds(const std::vector<LayerKind>& layer_kinds,
                    const std::vector<AttributeKind>& attribute_kinds) {
  for (const auto& kind : layer_kinds) {
    if (kind.family == LayerFamily::gaussian && kind.gaussian_variance <= 0.0)
      throw std::invalid_argument("gaussian layer variance must be positive");
  }
  for (const auto& kind : attribute_kinds) {
    if (kind.family == AttributeFamily::categorical && kind.categories < 2)
      throw std::invalid_argument(
          "categorical attribute needs at least 2 categories");
    if (kind.family == AttributeFamily::gaussian &&
        kind.gaussian_variance <= 0.0)
      throw std::invalid_argument(
          "gaussian attribute variance must be positive");
  }
}

}  // namespace

void HeterogeneousDataset::validate() const {
  if (n_nodes <= 0) throw std::invalid_argument("dataset has no nodes");
  if (layer_kinds.size() != layers.size())
    throw std::invalid_argument("layer kind count does not match layer count");
  if (attribute_kinds.size() != attributes.size())
    throw std::invalid_argument(
        "attribute kind count does not match attribute count");
  if (!node_labels.empty() &&
      static_cast<Index>(node_labels.size()) != n_nodes)
    throw std::invalid_argument("node label count does not match n_nodes");
  validate_kinds(layer_kinds, attribute_kinds);

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Matrix& a = layers[l];
    if (a.rows() != n_nodes || a.cols() != n_nodes)
      throw std::invalid_argument("layer " + std::to_string(l) +
                                  " is not n_nodes x n_nodes");
    if (!a.allFinite())
      throw std::invalid_argument("layer " + std::to_string(l) +
                                  " holds non-finite entries");
    switch (layer_kinds[l].family) {
      case LayerFamily::bernoulli:
        if (((a.array() != 0.0) && (a.array() != 1.0)).any())
          throw std::invalid_argument("bernoulli layer " + std::to_string(l) +
                                      " holds values outside {0,1}");
        break;
      case LayerFamily::poisson:
        for (Index i = 0; i < a.rows(); ++i)
          for (Index j = 0; j < a.cols(); ++j)
            if (!is_nonneg_integer(a(i, j)))
              throw std::invalid_argument(
                  "poisson layer " + std::to_string(l) +
                  " holds a non-count value");
        break;
      case LayerFamily::gaussian:
        break;
    }
  }

  for (std::size_t x = 0; x < attributes.size(); ++x) {
    const Vector& col = attributes[x];
    if (col.size() != n_nodes)
      throw std::invalid_argument("attribute " + std::to_string(x) +
                                  " length does not match n_nodes");
    if (!col.allFinite())
      throw std::invalid_argument("attribute " + std::to_string(x) +
                                  " holds non-finite entries");
    switch (attribute_kinds[x].family) {
      case AttributeFamily::categorical:
        for (Index i = 0; i < col.size(); ++i) {
          double v = col(i);
          if (!is_nonneg_integer(v) || v >= attribute_kinds[x].categories)
            throw std::invalid_argument(
                "categorical attribute " + std::to_string(x) +
                " holds an out-of-range category");
        }
        break;
      case AttributeFamily::poisson:
        for (Index i = 0; i < col.size(); ++i)
          if (!is_nonneg_integer(col(i)))
            throw std::invalid_argument("poisson attribute " +
                                        std::to_string(x) +
                                        " holds a non-count value");
        break;
      case AttributeFamily::gaussian:
        break;
    }
  }
}

ObservationMask ObservationMask::full(const HeterogeneousDataset& data) {
  ObservationMask m;
  m.edge.reserve(data.layers.size());
  for (std::size_t l = 0; l < data.layers.size(); ++l)
    m.edge.push_back(ArrayXX::Ones(data.n_nodes, data.n_nodes));
  m.attribute.reserve(data.attributes.size());
  for (std::size_t x = 0; x < data.attributes.size(); ++x)
    m.attribute.push_back(ArrayX::Ones(data.n_nodes));
  return m;
}

ObservationMask ObservationMask::empty(const HeterogeneousDataset& data) {
  ObservationMask m;
  m.edge.reserve(data.layers.size());
  for (std::size_t l = 0; l < data.layers.size(); ++l)
    m.edge.push_back(ArrayXX::Zero(data.n_nodes, data.n_nodes));
  m.attribute.reserve(data.attributes.size());
  for (std::size_t x = 0; x < data.attributes.size(); ++x)
    m.attribute.push_back(ArrayX::Zero(data.n_nodes));
  return m;
}

void ModelConfig::validate() const {
  if (communities < 1)
    throw std::invalid_argument("communities must be at least 1");
  if (!(prior_variance > 0.0))
    throw std::invalid_argument("prior variance must be positive");
  if (!std::isfinite(prior_mean))
    throw std::invalid_argument("prior mean must be finite");
  validate_kinds(layer_kinds, attribute_kinds);
}

ModelConfig make_config(const HeterogeneousDataset& data, int communities) {
  ModelConfig config;
  config.communities = communities;
  config.layer_kinds = data.layer_kinds;
  config.attribute_kinds = data.attribute_kinds;
  config.directed = data.directed;
  config.validate();
  return config;
}

LatentState make_state(const ModelConfig& config, Index n_nodes) {
  const Index k = config.communities;
  LatentState state;
  state.out_membership = Matrix::Zero(n_nodes, k);
  if (config.directed) state.in_membership = Matrix::Zero(n_nodes, k);
  state.affinity.reserve(config.layer_kinds.size());
  for (std::size_t l = 0; l < config.layer_kinds.size(); ++l)
    state.affinity.push_back(Matrix::Zero(k, k));
  state.attribute_loading.reserve(config.attribute_kinds.size());
  for (const auto& kind : config.attribute_kinds)
    state.attribute_loading.push_back(Matrix::Zero(k, kind.width()));
  return state;
}

Index parameter_count(const ModelConfig& config, Index n_nodes) {
  const Index k = config.communities;
  Index count = n_nodes * k * (config.directed ? 2 : 1);
  count += static_cast<Index>(config.layer_kinds.size()) * k * k;
  for (const auto& kind : config.attribute_kinds) count += k * kind.width();
  return count;
}

std::vector<BlockSpan> block_spans(const ModelConfig& config, Index n_nodes) {
  const Index k = config.communities;
  std::vector<BlockSpan> spans;
  Index offset = 0;
  for (Index i = 0; i < n_nodes; ++i) {
    spans.push_back({BlockSpan::Kind::out_row, i, offset, k});
    offset += k;
  }
  if (config.directed) {
    for (Index i = 0; i < n_nodes; ++i) {
      spans.push_back({BlockSpan::Kind::in_row, i, offset, k});
      offset += k;
    }
  }
  for (std::size_t l = 0; l < config.layer_kinds.size(); ++l) {
    spans.push_back(
        {BlockSpan::Kind::affinity, static_cast<Index>(l), offset, k * k});
    offset += k * k;
  }
  for (std::size_t x = 0; x < config.attribute_kinds.size(); ++x) {
    Index size = k * config.attribute_kinds[x].width();
    spans.push_back(
        {BlockSpan::Kind::attribute, static_cast<Index>(x), offset, size});
    offset += size;
  }
  return spans;
}

namespace {

// Row-major copy helpers shared by pack/unpack so the flattening order is
// defined in exactly one place.
void pack_rows(const Matrix& m, Vector& flat, Index& cursor) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) flat(cursor++) = m(i, j);
}

void unpack_rows(const Vector& flat, Matrix& m, Index& cursor) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = flat(cursor++);
}

}  // namespace

Vector pack(const LatentState& state) {
  Index total = state.out_membership.size() + state.in_membership.size();
  for (const auto& w : state.affinity) total += w.size();
  for (const auto& h : state.attribute_loading) total += h.size();
  Vector flat(total);
  Index cursor = 0;
  pack_rows(state.out_membership, flat, cursor);
  if (state.in_membership.size()) pack_rows(state.in_membership, flat, cursor);
  for (const auto& w : state.affinity) pack_rows(w, flat, cursor);
  for (const auto& h : state.attribute_loading) pack_rows(h, flat, cursor);
  return flat;
}

LatentState unpack(const Vector& flat, const ModelConfig& config,
                   Index n_nodes) {
  if (flat.size() != parameter_count(config, n_nodes))
    throw std::invalid_argument("flat vector length does not match config");
  LatentState state = make_state(config, n_nodes);
  Index cursor = 0;
  unpack_rows(flat, state.out_membership, cursor);
  if (config.directed) unpack_rows(flat, state.in_membership, cursor);
  for (auto& w : state.affinity) unpack_rows(flat, w, cursor);
  for (auto& h : state.attribute_loading) unpack_rows(flat, h, cursor);
  return state;
}

std::string to_string(LayerFamily family) {
  switch (family) {
    case LayerFamily::bernoulli: return "bernoulli";
    case LayerFamily::poisson: return "poisson";
    case LayerFamily::gaussian: return "gaussian";
  }
  throw std::invalid_argument("unknown layer family");
}

std::string to_string(AttributeFamily family) {
  switch (family) {
    case AttributeFamily::categorical: return "categorical";
    case AttributeFamily::poisson: return "poisson";
    case AttributeFamily::gaussian: return "gaussian";
  }
  throw std::invalid_argument("unknown attribute family");
}

LayerFamily layer_family_from_string(const std::string& name) {
  if (name == "bernoulli") return LayerFamily::bernoulli;
  if (name == "poisson") return LayerFamily::poisson;
  if (name == "gaussian") return LayerFamily::gaussian;
  throw std::invalid_argument("unknown layer family: " + name);
}

AttributeFamily attribute_family_from_string(const std::string& name) {
  if (name == "categorical") return AttributeFamily::categorical;
  if (name == "poisson") return AttributeFamily::poisson;
  if (name == "gaussian") return AttributeFamily::gaussian;
  throw std::invalid_argument("unknown attribute family: " + name);
}

}  // namespace piham
