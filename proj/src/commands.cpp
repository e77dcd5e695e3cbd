#include "piham/commands.hpp"

#include "piham/evaluation.hpp"
#include "piham/gradient.hpp"
#include "piham/inference.hpp"
#include "piham/laplace_matching.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace piham {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw DataError("cannot open " + path);
  try {
    return json::parse(stream);
  } catch (const json::parse_error& error) {
    throw DataError(path + ": " + error.what());
  }
}

NormalSpec normal_spec_from_json(const json& entry, NormalSpec fallback) {
  NormalSpec spec = fallback;
  if (entry.contains("mean")) spec.mean = entry["mean"].get<double>();
  if (entry.contains("variance"))
    spec.variance = entry["variance"].get<double>();
  return spec;
}

GeneratorConfig generator_config_from_json(const json& doc) {
  GeneratorConfig config;
  try {
    if (doc.contains("n_nodes")) config.n_nodes = doc["n_nodes"].get<Index>();
    if (doc.contains("communities"))
      config.communities = doc["communities"].get<Index>();
    if (doc.contains("rng_seed"))
      config.rng_seed = doc["rng_seed"].get<std::uint64_t>();
    if (doc.contains("layers")) {
      config.layer_kinds.clear();
      for (const json& entry : doc["layers"]) {
        LayerKind kind;
        kind.family =
            layer_family_from_string(entry.at("type").get<std::string>());
        if (entry.contains("gaussian_variance"))
          kind.gaussian_variance = entry["gaussian_variance"].get<double>();
        config.layer_kinds.push_back(kind);
      }
    }
    if (doc.contains("attributes")) {
      config.attribute_kinds.clear();
      for (const json& entry : doc["attributes"]) {
        AttributeKind kind;
        kind.family = attribute_family_from_string(
            entry.at("type").get<std::string>());
        if (entry.contains("categories"))
          kind.categories = entry["categories"].get<int>();
        if (entry.contains("gaussian_variance"))
          kind.gaussian_variance = entry["gaussian_variance"].get<double>();
        config.attribute_kinds.push_back(kind);
      }
    }
    auto spec = [&](const char* key, NormalSpec& target) {
      if (doc.contains(key))
        target = normal_spec_from_json(doc[key], target);
    };
    spec("membership_out_in", config.membership_out_in);
    spec("membership_out_out", config.membership_out_out);
    spec("membership_in_in", config.membership_in_in);
    spec("membership_in_out", config.membership_in_out);
    spec("affinity_diag", config.affinity_diag);
    spec("affinity_offdiag", config.affinity_offdiag);
    spec("categorical_match", config.categorical_match);
    spec("categorical_mismatch", config.categorical_mismatch);
    spec("categorical_padding", config.categorical_padding);
    spec("poisson_loading", config.poisson_loading);
    spec("gaussian_loading", config.gaussian_loading);
  } catch (const json::exception& error) {
    throw DataError(std::string("generator config: ") + error.what());
  } catch (const std::invalid_argument& error) {
    throw DataError(std::string("generator config: ") + error.what());
  }
  return config;
}

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string target_label(const ModelConfig& config, bool is_layer,
                         std::size_t index) {
  if (is_layer)
    return "layer" + std::to_string(index) + "." +
           to_string(config.layer_kinds[index].family);
  return "attr" + std::to_string(index) + "." +
         to_string(config.attribute_kinds[index].family);
}

FittedModelFile load_model_for(const std::string& path, bool need_covariance) {
  FittedModelFile model = load_model(path);
  if (need_covariance && !model.has_covariance)
    throw DataError(path +
                    " was saved without covariance blocks; refit with "
                    "--with-covariance");
  return model;
}

void check_model_matches(const FittedModelFile& model,
                         const HeterogeneousDataset& data) {
  if (static_cast<Index>(model.node_labels.size()) != data.n_nodes)
    throw DataError("model and dataset disagree on node count");
  if (model.node_labels != data.node_labels)
    throw DataError("model and dataset disagree on node labels");
  if (model.config.layer_kinds.size() != data.layer_kinds.size() ||
      model.config.attribute_kinds.size() != data.attribute_kinds.size())
    throw DataError("model and dataset disagree on layers or attributes");
}

PosteriorEstimate posterior_from_model(const FittedModelFile& model) {
  PosteriorEstimate posterior;
  posterior.map_state = model.map_state;
  posterior.covariance.blocks = model.covariance;
  posterior.covariance.gradient_inf_norm = model.gradient_inf_norm;
  posterior.covariance.gradient_flagged = model.gradient_flagged;
  posterior.final_log_posterior = model.final_log_posterior;
  posterior.restart_trace = model.restart_trace;
  return posterior;
}

}  // namespace

std::string cmd_generate(const GenerateOptions& options) {
  GeneratorConfig config;
  if (!options.config_path.empty())
    config = generator_config_from_json(parse_json_file(options.config_path));
  if (options.seed_given) config.rng_seed = options.seed;

  GeneratedData generated = generate_dataset(config);
  const std::string manifest_path =
      write_dataset(generated.dataset, options.out_dir);

  json truth;
  truth["hard_groups"] = generated.truth.hard_groups;
  truth["out_membership"] =
      matrix_rows(generated.truth.latent.out_membership);
  truth["in_membership"] = matrix_rows(generated.truth.latent.in_membership);
  truth["affinity"] = json::array();
  for (const Matrix& w : generated.truth.latent.affinity)
    truth["affinity"].push_back(matrix_rows(w));
  truth["attribute_loading"] = json::array();
  for (const Matrix& h : generated.truth.latent.attribute_loading)
    truth["attribute_loading"].push_back(matrix_rows(h));
  truth["out_simplex"] = matrix_rows(generated.truth.out_simplex);
  truth["in_simplex"] = matrix_rows(generated.truth.in_simplex);
  write_text_atomic((fs::path(options.out_dir) / "ground_truth.json").string(),
                    truth.dump(2) + "\n");

  std::cout << "generated " << config.n_nodes << " nodes, "
            << config.layer_kinds.size() << " layers, "
            << config.attribute_kinds.size() << " attributes -> "
            << manifest_path << "\n";
  return manifest_path;
}

void cmd_fit(const FitOptions& options) {
  HeterogeneousDataset data = ingest(options.manifest_path);
  ModelConfig config = make_config(data, options.communities);
  ObservationMask mask = ObservationMask::full(data);

  FittedModelFile model;
  model.config = config;
  model.settings = options.settings;
  model.node_labels = data.node_labels;

  if (options.with_covariance) {
    PosteriorEstimate posterior = fit_posterior(data, mask, config,
                                                options.settings,
                                                options.threads);
    model.map_state = std::move(posterior.map_state);
    model.final_log_posterior = posterior.final_log_posterior;
    model.restart_trace = std::move(posterior.restart_trace);
    model.has_covariance = true;
    model.covariance = std::move(posterior.covariance.blocks);
    model.gradient_inf_norm = posterior.covariance.gradient_inf_norm;
    model.gradient_flagged = posterior.covariance.gradient_flagged;
  } else {
    FitResult fit =
        fit_map(data, mask, config, options.settings, options.threads);
    Vector grad;
    log_posterior_with_gradient(data, fit.map_state, mask, config, grad);
    model.map_state = std::move(fit.map_state);
    model.final_log_posterior = fit.final_log_posterior;
    model.restart_trace = std::move(fit.restart_trace);
    model.gradient_inf_norm = grad.cwiseAbs().maxCoeff();
    model.gradient_flagged = model.gradient_inf_norm > 1e-3;
  }

  save_model(model, options.out_path);
  std::cout << "fit K=" << options.communities
            << " log_posterior=" << format_double(model.final_log_posterior)
            << " gradient_inf_norm=" << format_double(model.gradient_inf_norm)
            << (model.gradient_flagged ? " (flagged)" : "") << " -> "
            << options.out_path << "\n";
}

void cmd_cv(const CvOptions& options) {
  if (options.k_min < 1 || options.k_max < options.k_min)
    throw std::invalid_argument("invalid K range");
  HeterogeneousDataset data = ingest(options.manifest_path);
  FoldPlan plan =
      make_folds(data, options.n_folds, options.settings.rng_seed);

  // Column order fixed by the dataset: layers first, then attributes.
  std::vector<std::string> columns;
  {
    ModelConfig shape = make_config(data, 1);
    for (std::size_t l = 0; l < data.layers.size(); ++l) {
      std::string metric;
      switch (data.layer_kinds[l].family) {
        case LayerFamily::bernoulli: metric = "auc"; break;
        case LayerFamily::poisson: metric = "mae"; break;
        case LayerFamily::gaussian: metric = "rmse"; break;
      }
      columns.push_back(target_label(shape, true, l) + "." + metric);
    }
    for (std::size_t x = 0; x < data.attributes.size(); ++x) {
      std::string metric;
      switch (data.attribute_kinds[x].family) {
        case AttributeFamily::categorical: metric = "accuracy"; break;
        case AttributeFamily::poisson: metric = "mae"; break;
        case AttributeFamily::gaussian: metric = "rmse"; break;
      }
      columns.push_back(target_label(shape, false, x) + "." + metric);
    }
  }

  std::map<std::string, std::map<int, MetricSummary>> table;
  for (int k = options.k_min; k <= options.k_max; ++k) {
    ModelConfig config = make_config(data, k);
    OptimizerSettings settings = options.settings;
    EvaluationReport report =
        cross_validate(data, config, settings, plan, options.threads);
    for (const MetricSummary& summary : report.summary)
      table[summary.target + "." + summary.metric][k] = summary;
    std::cout << "cv K=" << k << " done\n";
  }

  std::ostringstream out;
  out << "k";
  for (const std::string& column : columns)
    out << "," << column << "," << column << ".std";
  out << "\n";
  for (int k = options.k_min; k <= options.k_max; ++k) {
    out << k;
    for (const std::string& column : columns) {
      auto per_k = table.find(column);
      if (per_k != table.end() && per_k->second.count(k)) {
        const MetricSummary& cell = per_k->second.at(k);
        out << "," << format_double(cell.mean) << ","
            << format_double(cell.std_dev);
      } else {
        out << ",,";
      }
    }
    out << "\n";
  }
  out << "baseline";
  for (const std::string& column : columns) {
    auto per_k = table.find(column);
    if (per_k != table.end() && !per_k->second.empty())
      out << "," << format_double(per_k->second.begin()->second.baseline_mean)
          << ",";
    else
      out << ",,";
  }
  out << "\n";
  out << "best";
  for (const std::string& column : columns) {
    auto per_k = table.find(column);
    if (per_k == table.end() || per_k->second.empty()) {
      out << ",,";
      continue;
    }
    const bool higher_is_better =
        column.ends_with(".auc") || column.ends_with(".accuracy");
    int best_k = 0;
    double best_value = 0.0;
    bool first = true;
    for (const auto& [k, cell] : per_k->second) {
      bool better = first || (higher_is_better ? cell.mean > best_value
                                               : cell.mean < best_value);
      if (better) {
        best_k = k;
        best_value = cell.mean;
        first = false;
      }
    }
    out << "," << best_k << ",";
  }
  out << "\n";
  write_text_atomic(options.out_path, out.str());
  std::cout << "cv table -> " << options.out_path << "\n";
}

void cmd_predict(const PredictOptions& options) {
  FittedModelFile model = load_model_for(options.model_path, false);
  Manifest manifest = load_manifest(options.manifest_path);
  HeterogeneousDataset data = ingest(options.manifest_path);
  check_model_matches(model, data);
  const ModelConfig& config = model.config;
  const Index n = data.n_nodes;

  std::map<std::string, Index> node_of;
  for (Index i = 0; i < n; ++i) node_of[data.node_labels[i]] = i;
  std::map<std::string, std::size_t> layer_of, attribute_of;
  for (std::size_t l = 0; l < manifest.layers.size(); ++l)
    layer_of[manifest.layers[l].name] = l;
  for (std::size_t x = 0; x < manifest.attributes.size(); ++x)
    attribute_of[manifest.attributes[x].name] = x;

  std::vector<Matrix> lambdas(data.layers.size());
  for (std::size_t l = 0; l < data.layers.size(); ++l)
    lambdas[l] = expected_edge_matrix(model.map_state, config,
                                      static_cast<Index>(l));
  std::vector<Matrix> pis(data.attributes.size());
  for (std::size_t x = 0; x < data.attributes.size(); ++x)
    pis[x] = expected_attribute_matrix(model.map_state, config,
                                       static_cast<Index>(x));

  std::ostringstream out;
  out << "kind,name,source,target,predicted,observed\n";

  auto emit_edge = [&](std::size_t l, Index i, Index j) {
    out << "edge," << manifest.layers[l].name << "," << data.node_labels[i]
        << "," << data.node_labels[j] << ","
        << format_double(lambdas[l](i, j)) << ","
        << format_double(data.layers[l](i, j)) << "\n";
  };
  auto emit_attribute = [&](std::size_t x, Index i) {
    const AttributeDeclaration& declared = manifest.attributes[x];
    out << "attribute," << declared.name << "," << data.node_labels[i] << ",,";
    if (declared.kind.family == AttributeFamily::categorical) {
      Index best = 0;
      for (Index z = 1; z < pis[x].cols(); ++z)
        if (pis[x](i, z) > pis[x](i, best)) best = z;
      out << declared.category_labels[best] << ","
          << declared.category_labels[static_cast<Index>(
                 data.attributes[x](i))];
    } else {
      out << format_double(pis[x](i, 0)) << ","
          << format_double(data.attributes[x](i));
    }
    out << "\n";
  };

  if (options.mask_path.empty()) {
    for (std::size_t l = 0; l < data.layers.size(); ++l)
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          if (i != j) emit_edge(l, i, j);
    for (std::size_t x = 0; x < data.attributes.size(); ++x)
      for (Index i = 0; i < n; ++i) emit_attribute(x, i);
  } else {
    std::ifstream stream(options.mask_path);
    if (!stream) throw DataError("cannot open " + options.mask_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
      ++line_no;
      if (line.empty() || line == "\r") continue;
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
      const std::string where =
          options.mask_path + " line " + std::to_string(line_no);
      if (line_no == 1) {
        if (fields != std::vector<std::string>{"kind", "name", "source",
                                               "target"})
          throw DataError(where + ": header must be 'kind,name,source,target'");
        continue;
      }
      if (fields.size() != 4) throw DataError(where + ": wrong field count");
      auto node = [&](const std::string& label) {
        auto found = node_of.find(label);
        if (found == node_of.end())
          throw DataError(where + ": unknown node '" + label + "'");
        return found->second;
      };
      if (fields[0] == "edge") {
        auto found = layer_of.find(fields[1]);
        if (found == layer_of.end())
          throw DataError(where + ": unknown layer '" + fields[1] + "'");
        emit_edge(found->second, node(fields[2]), node(fields[3]));
      } else if (fields[0] == "attribute") {
        auto found = attribute_of.find(fields[1]);
        if (found == attribute_of.end())
          throw DataError(where + ": unknown attribute '" + fields[1] + "'");
        emit_attribute(found->second, node(fields[2]));
      } else {
        throw DataError(where + ": kind must be 'edge' or 'attribute'");
      }
    }
  }

  write_text_atomic(options.out_path, out.str());
  std::cout << "predictions -> " << options.out_path << "\n";
}

void cmd_ppc(const PpcOptions& options) {
  FittedModelFile model = load_model_for(options.model_path, true);
  HeterogeneousDataset data = ingest(options.manifest_path);
  check_model_matches(model, data);

  PosteriorEstimate posterior = posterior_from_model(model);
  std::vector<PpcSeries> series =
      posterior_predictive_check(data, posterior, model.config,
                                 options.n_samples, options.seed,
                                 options.threads);

  std::ostringstream out;
  out << "target,metric,point,to_data,to_replica,fraction_above\n";
  for (const PpcSeries& s : series)
    for (std::size_t p = 0; p < s.points.size(); ++p)
      out << s.target << "," << s.metric << "," << p << ","
          << format_double(s.points[p].to_data) << ","
          << format_double(s.points[p].to_replica) << ","
          << format_double(s.fraction_above) << "\n";
  write_text_atomic(options.out_path, out.str());

  std::cout << "ppc n=" << options.n_samples;
  for (const PpcSeries& s : series)
    std::cout << " " << s.target << ":" << format_double(s.fraction_above);
  std::cout << " -> " << options.out_path << "\n";
}

void cmd_interpret(const InterpretOptions& options) {
  FittedModelFile model = load_model_for(options.model_path, true);
  const Index n = model.map_state.out_membership.rows();
  const Index k = model.map_state.out_membership.cols();

  std::map<std::pair<int, Index>, const CovarianceBlock*> block_of;
  for (const CovarianceBlock& block : model.covariance)
    block_of[{static_cast<int>(block.span.kind), block.span.entity}] = &block;

  std::ostringstream out;
  out << "node,role,component,mean,variance,softmax,alpha,dirichlet_mean,"
         "overlap,barycenter_variance,alpha_clamped\n";

  auto emit_role = [&](Index i, const char* role, const Matrix& membership,
                       BlockSpan::Kind kind) {
    auto found = block_of.find({static_cast<int>(kind), i});
    if (found == block_of.end())
      throw DataError("model is missing a covariance block for node " +
                      std::to_string(i));
    GaussianBlock gauss;
    gauss.mean = membership.row(i).transpose();
    gauss.variance_diag = found->second->covariance.diagonal();

    bool clamped = false;
    DirichletPosterior dirichlet;
    try {
      dirichlet = gaussian_to_dirichlet(gauss);
    } catch (const std::domain_error&) {
      dirichlet = gaussian_to_dirichlet(gauss, true);
      clamped = true;
    }
    Vector simplex_mean = dirichlet_mean(dirichlet);
    Vector softmax = softmax_point_estimate(gauss.mean);
    double node_overlap = overlap(gauss.mean, gauss.variance_diag);
    double node_variance =
        barycenter_variance(gauss.mean, gauss.variance_diag);

    const std::string label = model.node_labels.empty()
                                  ? std::to_string(i)
                                  : model.node_labels[i];
    for (Index c = 0; c < k; ++c)
      out << label << "," << role << "," << c << ","
          << format_double(gauss.mean(c)) << ","
          << format_double(gauss.variance_diag(c)) << ","
          << format_double(softmax(c)) << ","
          << format_double(dirichlet.alpha(c)) << ","
          << format_double(simplex_mean(c)) << ","
          << format_double(node_overlap) << ","
          << format_double(node_variance) << "," << (clamped ? 1 : 0) << "\n";
  };

  for (Index i = 0; i < n; ++i) {
    emit_role(i, "out", model.map_state.out_membership,
              BlockSpan::Kind::out_row);
    if (model.map_state.in_membership.size())
      emit_role(i, "in", model.map_state.in_membership,
                BlockSpan::Kind::in_row);
  }

  write_text_atomic(options.out_path, out.str());
  std::cout << "interpretation (" << n << " nodes) -> " << options.out_path
            << "\n";
}

}  // namespace piham
