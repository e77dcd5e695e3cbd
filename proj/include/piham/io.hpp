#pragma once

#include "piham/inference.hpp"
#include "piham/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace piham {

struct LayerDeclaration {
  std::string name;
  std::string path;  // edge CSV: source,target,weight
  LayerKind kind;
};

struct AttributeDeclaration {
  std::string name;
  AttributeKind kind;
  std::vector<std::string> category_labels;  // categorical only, size Z
};

// Dataset description: per-layer edge files plus one attribute table.
// Paths are resolved relative to the manifest's directory.
struct Manifest {
  bool directed = true;
  std::vector<LayerDeclaration> layers;
  std::string attributes_path;  // CSV: node,<attr1>,...; "" when no attributes
  std::vector<AttributeDeclaration> attributes;
};

Manifest load_manifest(const std::string& path);

// Reads the files a manifest names into a dense dataset. Node identifiers
// map to dense indices in first-appearance order (edge files in declaration
// order, then the attribute table). Unknown nodes in the attribute table,
// weights violating the declared layer family, and duplicate (source,
// target) rows within a layer are DataErrors naming the file and row.
HeterogeneousDataset ingest(const std::string& manifest_path);

// Writes dataset files plus a manifest into a directory and returns the
// manifest path. Categorical values are written via their labels.
std::string write_dataset(const HeterogeneousDataset& data,
                          const std::string& directory);

inline constexpr int kModelFormatVersion = 1;

// On-disk fitted model: everything needed to predict and interpret without
// refitting. Covariance blocks are present only when requested at fit time.
struct FittedModelFile {
  int format_version = kModelFormatVersion;
  ModelConfig config;
  OptimizerSettings settings;
  std::vector<std::string> node_labels;
  LatentState map_state;
  double final_log_posterior = 0.0;
  std::vector<RestartRecord> restart_trace;
  bool has_covariance = false;
  std::vector<CovarianceBlock> covariance;
  double gradient_inf_norm = 0.0;
  bool gradient_flagged = false;
};

// Shortest 17-significant-digit decimal; round-trip exact for doubles.
std::string format_double(double value);

// FNV-1a 64-bit over the canonical serialized payload.
std::uint64_t payload_checksum(const std::string& payload);

std::string serialize_model(const FittedModelFile& model);

// Atomic write (temp file + rename); the stored checksum covers the
// serialized payload.
void save_model(const FittedModelFile& model, const std::string& path);

// Fails closed on version mismatch or checksum mismatch.
FittedModelFile load_model(const std::string& path);

// Atomic text-file write used by all report emitters.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace piham
