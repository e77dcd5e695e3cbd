#include "piham/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace piham {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw DataError("cannot open " + path);
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  return buffer.str();
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& error) {
    throw DataError(path + ": " + error.what());
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream stream(path);
  if (!stream) throw DataError("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(stream, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw DataError(path + " is empty");
  return rows;
}

double parse_double(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw DataError(where + ": not a number: '" + text + "'");
  }
  if (used != text.size())
    throw DataError(where + ": not a number: '" + text + "'");
  return value;
}

void check_clean_token(const std::string& token, const std::string& what) {
  if (token.empty()) throw DataError(what + " is empty");
  if (token.find(',') != std::string::npos ||
      token.find('\n') != std::string::npos)
    throw DataError(what + " '" + token + "' contains a delimiter");
}

std::string row_name(const std::string& path, std::size_t line) {
  return path + " line " + std::to_string(line);
}

LayerKind layer_kind_from_json(const json& entry) {
  LayerKind kind;
  kind.family = layer_family_from_string(entry.at("type").get<std::string>());
  if (entry.contains("gaussian_variance"))
    kind.gaussian_variance = entry["gaussian_variance"].get<double>();
  return kind;
}

json layer_kind_to_json(const LayerKind& kind) {
  json entry;
  entry["type"] = to_string(kind.family);
  if (kind.family == LayerFamily::gaussian)
    entry["gaussian_variance"] = kind.gaussian_variance;
  return entry;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows, const std::string& what) {
  if (!rows.is_array()) throw DataError(what + " is not an array");
  if (rows.empty()) return Matrix(0, 0);
  const std::size_t n_cols = rows[0].size();
  Matrix m(rows.size(), n_cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != n_cols)
      throw DataError(what + " is ragged");
    for (std::size_t j = 0; j < n_cols; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) =
          rows[i][j].get<double>();
  }
  return m;
}

std::string span_kind_to_string(BlockSpan::Kind kind) {
  switch (kind) {
    case BlockSpan::Kind::out_row: return "out_row";
    case BlockSpan::Kind::in_row: return "in_row";
    case BlockSpan::Kind::affinity: return "affinity";
    case BlockSpan::Kind::attribute: return "attribute";
  }
  throw std::logic_error("unknown block kind");
}

BlockSpan::Kind span_kind_from_string(const std::string& name) {
  if (name == "out_row") return BlockSpan::Kind::out_row;
  if (name == "in_row") return BlockSpan::Kind::in_row;
  if (name == "affinity") return BlockSpan::Kind::affinity;
  if (name == "attribute") return BlockSpan::Kind::attribute;
  throw DataError("unknown block kind: " + name);
}

}  // namespace

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::uint64_t payload_checksum(const std::string& payload) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char byte : payload) {
    hash ^= byte;
    hash *= 1099511628211ull;
  }
  return hash;
}

Manifest load_manifest(const std::string& path) {
  json doc = parse_json_file(path);
  Manifest manifest;
  try {
    manifest.directed = doc.at("directed").get<bool>();
    for (const json& entry : doc.at("layers")) {
      LayerDeclaration layer;
      layer.name = entry.at("name").get<std::string>();
      layer.path = entry.at("path").get<std::string>();
      layer.kind = layer_kind_from_json(entry);
      manifest.layers.push_back(std::move(layer));
    }
    manifest.attributes_path = doc.value("attributes_path", std::string());
    if (doc.contains("attributes")) {
      for (const json& entry : doc["attributes"]) {
        AttributeDeclaration attribute;
        attribute.name = entry.at("name").get<std::string>();
        attribute.kind.family =
            attribute_family_from_string(entry.at("type").get<std::string>());
        if (attribute.kind.family == AttributeFamily::categorical) {
          for (const json& label : entry.at("categories"))
            attribute.category_labels.push_back(label.get<std::string>());
          attribute.kind.categories =
              static_cast<int>(attribute.category_labels.size());
        }
        if (entry.contains("gaussian_variance"))
          attribute.kind.gaussian_variance =
              entry["gaussian_variance"].get<double>();
        manifest.attributes.push_back(std::move(attribute));
      }
    }
  } catch (const json::exception& error) {
    throw DataError(path + ": " + error.what());
  } catch (const std::invalid_argument& error) {
    throw DataError(path + ": " + error.what());
  }
  if (!manifest.attributes.empty() && manifest.attributes_path.empty())
    throw DataError(path + ": attributes declared without attributes_path");
  return manifest;
}

HeterogeneousDataset ingest(const std::string& manifest_path) {
  Manifest manifest = load_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& rel) {
    return (base / rel).string();
  };

  std::unordered_map<std::string, Index> node_index;
  std::vector<std::string> labels;
  const bool registry = !manifest.attributes_path.empty();
  std::vector<std::vector<std::string>> attribute_rows;

  if (registry) {
    const std::string path = resolve(manifest.attributes_path);
    attribute_rows = read_csv(path);
    const auto& header = attribute_rows[0];
    if (header.empty() || header[0] != "node")
      throw DataError(path + ": header must start with 'node'");
    if (header.size() != manifest.attributes.size() + 1)
      throw DataError(path + ": header does not match declared attributes");
    for (std::size_t x = 0; x < manifest.attributes.size(); ++x)
      if (header[x + 1] != manifest.attributes[x].name)
        throw DataError(path + ": column '" + header[x + 1] +
                        "' does not match declared attribute '" +
                        manifest.attributes[x].name + "'");
    for (std::size_t r = 1; r < attribute_rows.size(); ++r) {
      if (attribute_rows[r].size() != header.size())
        throw DataError(row_name(path, r + 1) + ": wrong field count");
      const std::string& label = attribute_rows[r][0];
      if (!node_index.emplace(label, static_cast<Index>(labels.size())).second)
        throw DataError(row_name(path, r + 1) + ": duplicate node '" + label +
                        "'");
      labels.push_back(label);
    }
    if (labels.empty()) throw DataError(path + " declares no nodes");
  }

  // Edge files, parsed to label triples first so the node count is known
  // before dense allocation (only relevant without a node registry).
  struct EdgeRecord {
    Index source;
    Index target;
    double weight;
    std::size_t line;
  };
  std::vector<std::vector<EdgeRecord>> edge_records(manifest.layers.size());
  for (std::size_t l = 0; l < manifest.layers.size(); ++l) {
    const std::string path = resolve(manifest.layers[l].path);
    std::vector<std::vector<std::string>> rows = read_csv(path);
    if (rows[0] != std::vector<std::string>{"source", "target", "weight"})
      throw DataError(path + ": header must be 'source,target,weight'");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != 3)
        throw DataError(row_name(path, r + 1) + ": wrong field count");
      auto lookup = [&](const std::string& label) {
        auto found = node_index.find(label);
        if (found != node_index.end()) return found->second;
        if (registry)
          throw DataError(row_name(path, r + 1) + ": unknown node '" + label +
                          "'");
        Index next = static_cast<Index>(labels.size());
        node_index.emplace(label, next);
        labels.push_back(label);
        return next;
      };
      EdgeRecord record;
      record.source = lookup(rows[r][0]);
      record.target = lookup(rows[r][1]);
      record.weight = parse_double(rows[r][2], row_name(path, r + 1));
      record.line = r + 1;
      edge_records[l].push_back(record);
    }
  }
  if (labels.empty()) throw DataError("no nodes found in any input file");

  HeterogeneousDataset data;
  data.n_nodes = static_cast<Index>(labels.size());
  data.directed = manifest.directed;
  data.node_labels = labels;

  for (std::size_t l = 0; l < manifest.layers.size(); ++l) {
    const std::string path = resolve(manifest.layers[l].path);
    const LayerKind kind = manifest.layers[l].kind;
    Matrix a = Matrix::Zero(data.n_nodes, data.n_nodes);
    std::vector<bool> seen(data.n_nodes * data.n_nodes, false);
    for (const EdgeRecord& record : edge_records[l]) {
      std::size_t slot = static_cast<std::size_t>(record.source) * data.n_nodes +
                         static_cast<std::size_t>(record.target);
      if (seen[slot])
        throw DataError(row_name(path, record.line) + ": duplicate edge '" +
                        labels[record.source] + "' -> '" +
                        labels[record.target] + "'");
      seen[slot] = true;
      switch (kind.family) {
        case LayerFamily::bernoulli:
          if (record.weight != 0.0 && record.weight != 1.0)
            throw DataError(row_name(path, record.line) +
                            ": bernoulli weight must be 0 or 1, got " +
                            format_double(record.weight));
          break;
        case LayerFamily::poisson:
          if (record.weight < 0.0 ||
              std::floor(record.weight) != record.weight)
            throw DataError(row_name(path, record.line) +
                            ": poisson weight must be a nonnegative count, "
                            "got " +
                            format_double(record.weight));
          break;
        case LayerFamily::gaussian:
          if (!std::isfinite(record.weight))
            throw DataError(row_name(path, record.line) +
                            ": gaussian weight must be finite");
          break;
      }
      a(record.source, record.target) = record.weight;
    }
    data.layer_kinds.push_back(kind);
    data.layers.push_back(std::move(a));
  }

  if (registry) {
    const std::string path = resolve(manifest.attributes_path);
    for (std::size_t x = 0; x < manifest.attributes.size(); ++x) {
      const AttributeDeclaration& declared = manifest.attributes[x];
      Vector column(data.n_nodes);
      for (std::size_t r = 1; r < attribute_rows.size(); ++r) {
        const std::string& cell = attribute_rows[r][x + 1];
        const Index node = static_cast<Index>(r - 1);
        switch (declared.kind.family) {
          case AttributeFamily::categorical: {
            auto found = std::find(declared.category_labels.begin(),
                                   declared.category_labels.end(), cell);
            if (found == declared.category_labels.end())
              throw DataError(row_name(path, r + 1) + ": category '" + cell +
                              "' is not declared for attribute '" +
                              declared.name + "'");
            column(node) = static_cast<double>(
                std::distance(declared.category_labels.begin(), found));
            break;
          }
          case AttributeFamily::poisson:
          case AttributeFamily::gaussian:
            column(node) = parse_double(cell, row_name(path, r + 1));
            break;
        }
      }
      data.attribute_kinds.push_back(declared.kind);
      data.attributes.push_back(std::move(column));
    }
  }

  try {
    data.validate();
  } catch (const std::invalid_argument& error) {
    throw DataError(manifest_path + ": " + error.what());
  }
  return data;
}

std::string write_dataset(const HeterogeneousDataset& data,
                          const std::string& directory) {
  data.validate();
  fs::create_directories(directory);
  const fs::path dir(directory);

  std::vector<std::string> labels = data.node_labels;
  if (labels.empty())
    for (Index i = 0; i < data.n_nodes; ++i)
      labels.push_back(std::to_string(i));
  for (const std::string& label : labels) check_clean_token(label, "node label");

  json manifest;
  manifest["directed"] = data.directed;
  manifest["layers"] = json::array();
  for (std::size_t l = 0; l < data.layers.size(); ++l) {
    const std::string name = "layer" + std::to_string(l);
    const std::string file = name + ".csv";
    json entry = layer_kind_to_json(data.layer_kinds[l]);
    entry["name"] = name;
    entry["path"] = file;
    manifest["layers"].push_back(std::move(entry));

    std::string csv = "source,target,weight\n";
    const Matrix& a = data.layers[l];
    const bool dense = data.layer_kinds[l].family == LayerFamily::gaussian;
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j) {
        if (i == j ? a(i, j) == 0.0 : (!dense && a(i, j) == 0.0)) continue;
        csv += labels[i] + "," + labels[j] + "," + format_double(a(i, j)) +
               "\n";
      }
    write_text_atomic((dir / file).string(), csv);
  }

  manifest["attributes_path"] = "attributes.csv";
  manifest["attributes"] = json::array();
  std::vector<std::vector<std::string>> category_labels(data.attributes.size());
  for (std::size_t x = 0; x < data.attributes.size(); ++x) {
    const AttributeKind& kind = data.attribute_kinds[x];
    json entry;
    entry["name"] = "attr" + std::to_string(x);
    entry["type"] = to_string(kind.family);
    if (kind.family == AttributeFamily::categorical) {
      for (int z = 0; z < kind.categories; ++z)
        category_labels[x].push_back("c" + std::to_string(z));
      entry["categories"] = category_labels[x];
    } else if (kind.family == AttributeFamily::gaussian) {
      entry["gaussian_variance"] = kind.gaussian_variance;
    }
    manifest["attributes"].push_back(std::move(entry));
  }

  std::string csv = "node";
  for (std::size_t x = 0; x < data.attributes.size(); ++x)
    csv += ",attr" + std::to_string(x);
  csv += "\n";
  for (Index i = 0; i < data.n_nodes; ++i) {
    csv += labels[i];
    for (std::size_t x = 0; x < data.attributes.size(); ++x) {
      double value = data.attributes[x](i);
      csv += ",";
      if (data.attribute_kinds[x].family == AttributeFamily::categorical)
        csv += category_labels[x][static_cast<std::size_t>(value)];
      else
        csv += format_double(value);
    }
    csv += "\n";
  }
  write_text_atomic((dir / "attributes.csv").string(), csv);

  const std::string manifest_path = (dir / "manifest.json").string();
  write_text_atomic(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

namespace {

json config_to_json(const ModelConfig& config) {
  json doc;
  doc["communities"] = config.communities;
  doc["prior_mean"] = config.prior_mean;
  doc["prior_variance"] = config.prior_variance;
  doc["directed"] = config.directed;
  doc["include_self_loops"] = config.include_self_loops;
  doc["layer_kinds"] = json::array();
  for (const LayerKind& kind : config.layer_kinds) {
    json entry = layer_kind_to_json(kind);
    doc["layer_kinds"].push_back(std::move(entry));
  }
  doc["attribute_kinds"] = json::array();
  for (const AttributeKind& kind : config.attribute_kinds) {
    json entry;
    entry["type"] = to_string(kind.family);
    if (kind.family == AttributeFamily::categorical)
      entry["categories"] = kind.categories;
    if (kind.family == AttributeFamily::gaussian)
      entry["gaussian_variance"] = kind.gaussian_variance;
    doc["attribute_kinds"].push_back(std::move(entry));
  }
  return doc;
}

ModelConfig config_from_json(const json& doc) {
  ModelConfig config;
  config.communities = doc.at("communities").get<int>();
  config.prior_mean = doc.at("prior_mean").get<double>();
  config.prior_variance = doc.at("prior_variance").get<double>();
  config.directed = doc.at("directed").get<bool>();
  config.include_self_loops = doc.at("include_self_loops").get<bool>();
  for (const json& entry : doc.at("layer_kinds"))
    config.layer_kinds.push_back(layer_kind_from_json(entry));
  for (const json& entry : doc.at("attribute_kinds")) {
    AttributeKind kind;
    kind.family =
        attribute_family_from_string(entry.at("type").get<std::string>());
    if (entry.contains("categories"))
      kind.categories = entry["categories"].get<int>();
    if (entry.contains("gaussian_variance"))
      kind.gaussian_variance = entry["gaussian_variance"].get<double>();
    config.attribute_kinds.push_back(kind);
  }
  return config;
}

json settings_to_json(const OptimizerSettings& settings) {
  json doc;
  doc["learning_rate"] = settings.learning_rate;
  doc["max_iterations"] = settings.max_iterations;
  doc["tolerance"] = settings.tolerance;
  doc["n_restarts"] = settings.n_restarts;
  doc["init_mean"] = settings.init_mean;
  doc["init_variance"] = settings.init_variance;
  doc["adam_beta1"] = settings.adam_beta1;
  doc["adam_beta2"] = settings.adam_beta2;
  doc["adam_epsilon"] = settings.adam_epsilon;
  doc["rng_seed"] = settings.rng_seed;
  doc["relative_tolerance"] = settings.relative_tolerance;
  return doc;
}

OptimizerSettings settings_from_json(const json& doc) {
  OptimizerSettings settings;
  settings.learning_rate = doc.at("learning_rate").get<double>();
  settings.max_iterations = doc.at("max_iterations").get<int>();
  settings.tolerance = doc.at("tolerance").get<double>();
  settings.n_restarts = doc.at("n_restarts").get<int>();
  settings.init_mean = doc.at("init_mean").get<double>();
  settings.init_variance = doc.at("init_variance").get<double>();
  settings.adam_beta1 = doc.at("adam_beta1").get<double>();
  settings.adam_beta2 = doc.at("adam_beta2").get<double>();
  settings.adam_epsilon = doc.at("adam_epsilon").get<double>();
  settings.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
  settings.relative_tolerance = doc.at("relative_tolerance").get<bool>();
  return settings;
}

json model_to_json_without_checksum(const FittedModelFile& model) {
  json doc;
  doc["format_version"] = model.format_version;
  doc["config"] = config_to_json(model.config);
  doc["settings"] = settings_to_json(model.settings);
  doc["node_labels"] = model.node_labels;
  json state;
  state["out_membership"] = matrix_to_json(model.map_state.out_membership);
  state["in_membership"] = matrix_to_json(model.map_state.in_membership);
  state["affinity"] = json::array();
  for (const Matrix& w : model.map_state.affinity)
    state["affinity"].push_back(matrix_to_json(w));
  state["attribute_loading"] = json::array();
  for (const Matrix& h : model.map_state.attribute_loading)
    state["attribute_loading"].push_back(matrix_to_json(h));
  doc["map_state"] = std::move(state);
  doc["final_log_posterior"] = model.final_log_posterior;
  doc["restart_trace"] = json::array();
  for (const RestartRecord& record : model.restart_trace) {
    json entry;
    entry["restart"] = record.restart;
    entry["final_log_posterior"] = record.final_log_posterior;
    entry["iterations"] = record.iterations;
    entry["converged"] = record.converged;
    doc["restart_trace"].push_back(std::move(entry));
  }
  doc["gradient_inf_norm"] = model.gradient_inf_norm;
  doc["gradient_flagged"] = model.gradient_flagged;
  doc["has_covariance"] = model.has_covariance;
  doc["covariance"] = json::array();
  for (const CovarianceBlock& block : model.covariance) {
    json entry;
    entry["kind"] = span_kind_to_string(block.span.kind);
    entry["entity"] = block.span.entity;
    entry["offset"] = block.span.offset;
    entry["size"] = block.span.size;
    entry["jitter"] = block.jitter;
    entry["asymmetry"] = block.hessian_asymmetry;
    entry["matrix"] = matrix_to_json(block.covariance);
    doc["covariance"].push_back(std::move(entry));
  }
  return doc;
}

std::string checksum_hex(std::uint64_t hash) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "fnv1a64:%016llx",
                static_cast<unsigned long long>(hash));
  return buffer;
}

}  // namespace

std::string serialize_model(const FittedModelFile& model) {
  json doc = model_to_json_without_checksum(model);
  doc["checksum"] = checksum_hex(payload_checksum(doc.dump()));
  return doc.dump(2) + "\n";
}

void save_model(const FittedModelFile& model, const std::string& path) {
  write_text_atomic(path, serialize_model(model));
}

FittedModelFile load_model(const std::string& path) {
  json doc = parse_json_file(path);
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion)
      throw DataError(path + ": fitted model format version " +
                      doc["format_version"].dump() + " is not supported");
    const std::string stored = doc.at("checksum").get<std::string>();
    doc.erase("checksum");
    if (stored != checksum_hex(payload_checksum(doc.dump())))
      throw DataError(path + ": checksum mismatch, file corrupted");

    FittedModelFile model;
    model.format_version = kModelFormatVersion;
    model.config = config_from_json(doc.at("config"));
    model.settings = settings_from_json(doc.at("settings"));
    model.node_labels =
        doc.at("node_labels").get<std::vector<std::string>>();
    const json& state = doc.at("map_state");
    model.map_state.out_membership =
        matrix_from_json(state.at("out_membership"), "out_membership");
    model.map_state.in_membership =
        matrix_from_json(state.at("in_membership"), "in_membership");
    for (const json& w : state.at("affinity"))
      model.map_state.affinity.push_back(matrix_from_json(w, "affinity"));
    for (const json& h : state.at("attribute_loading"))
      model.map_state.attribute_loading.push_back(
          matrix_from_json(h, "attribute_loading"));
    model.final_log_posterior = doc.at("final_log_posterior").get<double>();
    for (const json& entry : doc.at("restart_trace")) {
      RestartRecord record;
      record.restart = entry.at("restart").get<int>();
      record.final_log_posterior =
          entry.at("final_log_posterior").get<double>();
      record.iterations = entry.at("iterations").get<int>();
      record.converged = entry.at("converged").get<bool>();
      model.restart_trace.push_back(record);
    }
    model.gradient_inf_norm = doc.at("gradient_inf_norm").get<double>();
    model.gradient_flagged = doc.at("gradient_flagged").get<bool>();
    model.has_covariance = doc.at("has_covariance").get<bool>();
    for (const json& entry : doc.at("covariance")) {
      CovarianceBlock block;
      block.span.kind =
          span_kind_from_string(entry.at("kind").get<std::string>());
      block.span.entity = entry.at("entity").get<Index>();
      block.span.offset = entry.at("offset").get<Index>();
      block.span.size = entry.at("size").get<Index>();
      block.jitter = entry.at("jitter").get<double>();
      block.hessian_asymmetry = entry.at("asymmetry").get<double>();
      block.covariance = matrix_from_json(entry.at("matrix"), "covariance");
      model.covariance.push_back(std::move(block));
    }
    return model;
  } catch (const json::exception& error) {
    throw DataError(path + ": " + error.what());
  }
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string temp = path + ".tmp";
  {
    std::ofstream stream(temp, std::ios::binary | std::ios::trunc);
    if (!stream) throw DataError("cannot write " + temp);
    stream << content;
    if (!stream.flush()) {
      stream.close();
      std::error_code ignored;
      fs::remove(temp, ignored);
      throw DataError("failed writing " + temp);
    }
  }
  std::error_code code;
  fs::rename(temp, path, code);
  if (code) {
    std::error_code ignored;
    fs::remove(temp, ignored);
    throw DataError("cannot move " + temp + " to " + path);
  }
}

}  // namespace piham
