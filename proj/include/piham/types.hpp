#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace piham {

// Malformed or inconsistent input data; the CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure (divergence, jitter cap, nonpositive alpha); exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using ArrayXX = Eigen::ArrayXXd;
using ArrayX = Eigen::ArrayXd;
using Index = Eigen::Index;

enum class LayerFamily { bernoulli, poisson, gaussian };
enum class AttributeFamily { categorical, poisson, gaussian };

// Statistical type of one edge layer. gaussian_variance is the observation
// variance of real-valued layers and is ignored by the other families.
struct LayerKind {
  LayerFamily family = LayerFamily::bernoulli;
  double gaussian_variance = 0.01;
};

// Statistical type of one node attribute. categories (Z) applies only to
// categorical attributes; gaussian_variance only to gaussian ones.
struct AttributeKind {
  AttributeFamily family = AttributeFamily::categorical;
  int categories = 2;
  double gaussian_variance = 0.01;

  // Number of columns the attribute occupies in its loading block.
  Index width() const {
    return family == AttributeFamily::categorical ? categories : 1;
  }
};

// Typed multilayer network plus node attributes. Layers are held densely
// (N x N, zeros are observations for bernoulli/poisson families); attribute
// columns hold category indices for categorical attributes and raw values
// otherwise. node_labels is empty when nodes are anonymous.
struct HeterogeneousDataset {
  Index n_nodes = 0;
  bool directed = true;
  std::vector<LayerKind> layer_kinds;
  std::vector<Matrix> layers;
  std::vector<AttributeKind> attribute_kinds;
  std::vector<Vector> attributes;
  std::vector<std::string> node_labels;

  Index n_layers() const { return static_cast<Index>(layers.size()); }
  Index n_attributes() const { return static_cast<Index>(attributes.size()); }

  void validate() const;
};

// Held-in observation indicators, 1.0 = included in likelihood sums.
struct ObservationMask {
  std::vector<ArrayXX> edge;
  std::vector<ArrayX> attribute;

  static ObservationMask full(const HeterogeneousDataset& data);
  static ObservationMask empty(const HeterogeneousDataset& data);
};

// Priors, community count, and the typed shape of the model.
struct ModelConfig {
  int communities = 1;
  double prior_mean = 0.0;
  double prior_variance = 1.0;
  std::vector<LayerKind> layer_kinds;
  std::vector<AttributeKind> attribute_kinds;
  bool directed = true;
  bool include_self_loops = false;

  void validate() const;
};

// Build a config matching a dataset's shape.
ModelConfig make_config(const HeterogeneousDataset& data, int communities);

// Unconstrained latent parameters. in_membership is empty for undirected
// configs, in which case out_membership serves both roles.
struct LatentState {
  Matrix out_membership;
  Matrix in_membership;
  std::vector<Matrix> affinity;
  std::vector<Matrix> attribute_loading;

  const Matrix& in_or_out() const {
    return in_membership.size() ? in_membership : out_membership;
  }
  bool directed() const { return in_membership.size() != 0; }
};

// Zero-initialized state of the right shape.
LatentState make_state(const ModelConfig& config, Index n_nodes);

// Identity of one block of the block-diagonal posterior: a membership row,
// a layer affinity matrix, or an attribute loading block.
struct BlockSpan {
  enum class Kind { out_row, in_row, affinity, attribute } kind;
  Index entity;  // node, layer, or attribute index
  Index offset;  // position in the flattened parameter vector
  Index size;
};

// Flattening order: out rows, in rows (directed only), affinities
// row-major per layer, loadings row-major per attribute.
Index parameter_count(const ModelConfig& config, Index n_nodes);
std::vector<BlockSpan> block_spans(const ModelConfig& config, Index n_nodes);
Vector pack(const LatentState& state);
LatentState unpack(const Vector& flat, const ModelConfig& config, Index n_nodes);

std::string to_string(LayerFamily family);
std::string to_string(AttributeFamily family);
LayerFamily layer_family_from_string(const std::string& name);
AttributeFamily attribute_family_from_string(const std::string& name);

}  // namespace piham
