#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "piham/commands.hpp"
#include "piham/generator.hpp"
#include "piham/inference.hpp"
#include "piham/io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace piham;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("piham_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ignored;
    fs::remove_all(path, ignored);
  }
  static int& counter() {
    static int value = 0;
    return value;
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream stream(path, std::ios::binary | std::ios::trunc);
  stream << content;
}

std::string read_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  REQUIRE(stream.good());
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  return buffer.str();
}

// Minimal hand-written dataset: two nodes, one Bernoulli layer, one edge.
void write_minimal(const TempDir& dir) {
  write_file(dir.file("manifest.json"), R"({
    "directed": true,
    "layers": [{"name": "ties", "path": "ties.csv", "type": "bernoulli"}]
  })");
  write_file(dir.file("ties.csv"),
             "source,target,weight\n"
             "alice,bob,1\n");
}

FittedModelFile small_model() {
  GeneratorConfig config;
  config.n_nodes = 8;
  config.communities = 2;
  config.layer_kinds = {{LayerFamily::bernoulli}};
  config.attribute_kinds = {{AttributeFamily::gaussian}};
  config.rng_seed = 77;
  GeneratedData generated = generate_dataset(config);
  ModelConfig model_config = make_config(generated.dataset, 2);
  OptimizerSettings settings;
  settings.learning_rate = 0.3;
  settings.max_iterations = 200;
  settings.n_restarts = 2;
  settings.init_variance = 1.0;
  settings.rng_seed = 9;
  auto mask = ObservationMask::full(generated.dataset);
  PosteriorEstimate posterior =
      fit_posterior(generated.dataset, mask, model_config, settings);

  FittedModelFile model;
  model.config = model_config;
  model.settings = settings;
  model.node_labels = generated.dataset.node_labels;
  model.map_state = posterior.map_state;
  model.final_log_posterior = posterior.final_log_posterior;
  model.restart_trace = posterior.restart_trace;
  model.has_covariance = true;
  model.covariance = posterior.covariance.blocks;
  model.gradient_inf_norm = posterior.covariance.gradient_inf_norm;
  model.gradient_flagged = posterior.covariance.gradient_flagged;
  return model;
}

}  // namespace

TEST_CASE("minimal manifest ingests into a 2-node dataset") {
  TempDir dir;
  write_minimal(dir);
  HeterogeneousDataset data = ingest(dir.file("manifest.json"));
  CHECK(data.n_nodes == 2);
  CHECK(data.directed);
  REQUIRE(data.layers.size() == 1);
  CHECK(data.node_labels == std::vector<std::string>{"alice", "bob"});
  CHECK(data.layers[0](0, 1) == 1.0);
  CHECK(data.layers[0](1, 0) == 0.0);
  CHECK(data.layers[0].sum() == 1.0);
  CHECK(data.attributes.empty());
}

TEST_CASE("typed ingestion errors name the offending row") {
  TempDir dir;
  write_minimal(dir);

  SUBCASE("non-binary weight in a Bernoulli layer") {
    write_file(dir.file("ties.csv"),
               "source,target,weight\nalice,bob,3\n");
    try {
      ingest(dir.file("manifest.json"));
      FAIL("expected DataError");
    } catch (const DataError& error) {
      const std::string what = error.what();
      CHECK(what.find("line 2") != std::string::npos);
      CHECK(what.find("bernoulli") != std::string::npos);
    }
  }
  SUBCASE("duplicate edge") {
    write_file(dir.file("ties.csv"),
               "source,target,weight\nalice,bob,1\nalice,bob,0\n");
    CHECK_THROWS_AS(ingest(dir.file("manifest.json")), DataError);
  }
  SUBCASE("self-loops are stored, not rejected") {
    write_file(dir.file("ties.csv"),
               "source,target,weight\nalice,alice,1\nalice,bob,0\n");
    HeterogeneousDataset data = ingest(dir.file("manifest.json"));
    CHECK(data.layers[0](0, 0) == 1.0);
  }
  SUBCASE("bad header") {
    write_file(dir.file("ties.csv"), "from,to,w\nalice,bob,1\n");
    CHECK_THROWS_AS(ingest(dir.file("manifest.json")), DataError);
  }
  SUBCASE("missing edge file") {
    fs::remove(dir.file("ties.csv"));
    CHECK_THROWS_AS(ingest(dir.file("manifest.json")), DataError);
  }
  SUBCASE("malformed manifest json") {
    write_file(dir.file("manifest.json"), "{ not json");
    CHECK_THROWS_AS(load_manifest(dir.file("manifest.json")), DataError);
  }
  SUBCASE("missing manifest") {
    CHECK_THROWS_AS(ingest(dir.file("nowhere.json")), DataError);
  }
}

TEST_CASE("attribute file is the node registry") {
  TempDir dir;
  write_file(dir.file("manifest.json"), R"({
    "directed": true,
    "layers": [{"name": "ties", "path": "ties.csv", "type": "bernoulli"}],
    "attributes_path": "attributes.csv",
    "attributes": [
      {"name": "team", "type": "categorical", "categories": ["red", "blue"]},
      {"name": "score", "type": "gaussian"}
    ]
  })");
  write_file(dir.file("attributes.csv"),
             "node,team,score\n"
             "alice,red,0.5\n"
             "bob,blue,-1.25\n"
             "carol,red,2\n");
  write_file(dir.file("ties.csv"),
             "source,target,weight\nalice,carol,1\n");

  HeterogeneousDataset data = ingest(dir.file("manifest.json"));
  CHECK(data.n_nodes == 3);  // bob is isolated but registered
  CHECK(data.node_labels ==
        std::vector<std::string>{"alice", "bob", "carol"});
  CHECK(data.attributes[0](1) == 1.0);  // blue
  CHECK(data.attributes[1](2) == 2.0);
  CHECK(data.layers[0](0, 2) == 1.0);

  SUBCASE("edge naming an unregistered node fails") {
    write_file(dir.file("ties.csv"),
               "source,target,weight\nalice,mallory,1\n");
    try {
      ingest(dir.file("manifest.json"));
      FAIL("expected DataError");
    } catch (const DataError& error) {
      CHECK(std::string(error.what()).find("mallory") != std::string::npos);
    }
  }
  SUBCASE("unknown categorical label fails") {
    write_file(dir.file("attributes.csv"),
               "node,team,score\nalice,green,0.5\n");
    CHECK_THROWS_AS(ingest(dir.file("manifest.json")), DataError);
  }
  SUBCASE("duplicate node label fails") {
    write_file(dir.file("attributes.csv"),
               "node,team,score\nalice,red,0.5\nalice,blue,1.0\n");
    CHECK_THROWS_AS(ingest(dir.file("manifest.json")), DataError);
  }
}

TEST_CASE("write_dataset then ingest round-trips bitwise") {
  GeneratorConfig config;
  config.n_nodes = 15;
  config.communities = 2;
  config.rng_seed = 19;
  GeneratedData generated = generate_dataset(config);

  TempDir dir;
  const std::string manifest_path =
      write_dataset(generated.dataset, dir.path.string());
  HeterogeneousDataset loaded = ingest(manifest_path);

  CHECK(loaded.n_nodes == generated.dataset.n_nodes);
  CHECK(loaded.directed == generated.dataset.directed);
  CHECK(loaded.node_labels == generated.dataset.node_labels);
  REQUIRE(loaded.layers.size() == generated.dataset.layers.size());
  for (std::size_t l = 0; l < loaded.layers.size(); ++l) {
    CHECK(loaded.layer_kinds[l].family ==
          generated.dataset.layer_kinds[l].family);
    CHECK(loaded.layers[l] == generated.dataset.layers[l]);
  }
  REQUIRE(loaded.attributes.size() == generated.dataset.attributes.size());
  for (std::size_t x = 0; x < loaded.attributes.size(); ++x)
    CHECK(loaded.attributes[x] == generated.dataset.attributes[x]);

  // Writing the loaded dataset again reproduces the files byte for byte.
  TempDir second;
  write_dataset(loaded, second.path.string());
  for (const auto& entry : fs::directory_iterator(dir.path)) {
    const std::string name = entry.path().filename().string();
    CHECK(read_file((second.path / name).string()) ==
          read_file(entry.path().string()));
  }
}

TEST_CASE("format_double round-trips doubles exactly") {
  for (double value : {1.0 / 3.0, -0.1, 2.5e-300, 3.141592653589793,
                       123456789.123456789}) {
    const std::string text = format_double(value);
    CHECK(std::stod(text) == value);
  }
}

TEST_CASE("fitted model save/load round-trips every numeric field") {
  FittedModelFile model = small_model();
  TempDir dir;
  save_model(model, dir.file("model.json"));
  FittedModelFile loaded = load_model(dir.file("model.json"));

  CHECK(loaded.format_version == kModelFormatVersion);
  CHECK(loaded.config.communities == model.config.communities);
  CHECK(loaded.settings.learning_rate == model.settings.learning_rate);
  CHECK(loaded.settings.rng_seed == model.settings.rng_seed);
  CHECK(loaded.node_labels == model.node_labels);
  CHECK(pack(loaded.map_state) == pack(model.map_state));
  CHECK(loaded.final_log_posterior == model.final_log_posterior);
  REQUIRE(loaded.restart_trace.size() == model.restart_trace.size());
  for (std::size_t r = 0; r < loaded.restart_trace.size(); ++r) {
    CHECK(loaded.restart_trace[r].final_log_posterior ==
          model.restart_trace[r].final_log_posterior);
    CHECK(loaded.restart_trace[r].iterations ==
          model.restart_trace[r].iterations);
  }
  REQUIRE(loaded.has_covariance);
  REQUIRE(loaded.covariance.size() == model.covariance.size());
  for (std::size_t b = 0; b < loaded.covariance.size(); ++b) {
    CHECK(loaded.covariance[b].covariance == model.covariance[b].covariance);
    CHECK(loaded.covariance[b].jitter == model.covariance[b].jitter);
    CHECK(loaded.covariance[b].span.offset == model.covariance[b].span.offset);
  }
  CHECK(loaded.gradient_inf_norm == model.gradient_inf_norm);

  // Saving the loaded model writes identical bytes (checksum included).
  save_model(loaded, dir.file("again.json"));
  CHECK(read_file(dir.file("again.json")) == read_file(dir.file("model.json")));
}

TEST_CASE("model file tampering and version gates fail closed") {
  FittedModelFile model = small_model();
  TempDir dir;
  save_model(model, dir.file("model.json"));
  std::string text = read_file(dir.file("model.json"));

  SUBCASE("flipped digit breaks the checksum") {
    auto at = text.find("final_log_posterior");
    REQUIRE(at != std::string::npos);
    auto digit = text.find_first_of("0123456789", at);
    text[digit] = text[digit] == '9' ? '8' : '9';
    write_file(dir.file("model.json"), text);
    try {
      load_model(dir.file("model.json"));
      FAIL("expected DataError");
    } catch (const DataError& error) {
      CHECK(std::string(error.what()).find("checksum") != std::string::npos);
    }
  }
  SUBCASE("future format version is rejected before the checksum") {
    auto at = text.find("\"format_version\": 1");
    REQUIRE(at != std::string::npos);
    text.replace(at, std::string("\"format_version\": 1").size(),
                 "\"format_version\": 99");
    write_file(dir.file("model.json"), text);
    try {
      load_model(dir.file("model.json"));
      FAIL("expected DataError");
    } catch (const DataError& error) {
      CHECK(std::string(error.what()).find("version") != std::string::npos);
    }
  }
}

TEST_CASE("command pipeline: generate, fit, predict, interpret, cv") {
  TempDir dir;
  GenerateOptions generate;
  write_file(dir.file("gen.json"), R"({
    "n_nodes": 14, "communities": 2, "rng_seed": 3,
    "layers": [{"type": "bernoulli"}],
    "attributes": [{"type": "gaussian"}]
  })");
  generate.config_path = dir.file("gen.json");
  generate.out_dir = (dir.path / "data").string();
  const std::string manifest = cmd_generate(generate);
  CHECK(fs::exists(manifest));
  CHECK(fs::exists(dir.path / "data" / "ground_truth.json"));

  FitOptions fit;
  fit.manifest_path = manifest;
  fit.communities = 2;
  fit.settings.n_restarts = 2;
  fit.settings.max_iterations = 250;
  fit.settings.learning_rate = 0.3;
  fit.settings.init_variance = 1.0;
  fit.settings.rng_seed = 4;
  fit.threads = 2;
  fit.with_covariance = true;
  fit.out_path = dir.file("model.json");
  cmd_fit(fit);
  CHECK(fs::exists(fit.out_path));

  PredictOptions predict;
  predict.model_path = fit.out_path;
  predict.manifest_path = manifest;
  predict.out_path = dir.file("predictions.csv");
  cmd_predict(predict);
  std::string predictions = read_file(predict.out_path);
  // Header plus 14*13 edges plus 14 attribute rows.
  CHECK(std::count(predictions.begin(), predictions.end(), '\n') ==
        1 + 14 * 13 + 14);

  InterpretOptions interpret;
  interpret.model_path = fit.out_path;
  interpret.out_path = dir.file("interpretation.csv");
  cmd_interpret(interpret);
  std::string interpretation = read_file(interpret.out_path);
  // Header plus (out + in roles) x nodes x communities.
  CHECK(std::count(interpretation.begin(), interpretation.end(), '\n') ==
        1 + 2 * 14 * 2);

  PpcOptions ppc;
  ppc.model_path = fit.out_path;
  ppc.manifest_path = manifest;
  ppc.n_samples = 10;
  ppc.seed = 5;
  ppc.threads = 2;
  ppc.out_path = dir.file("ppc.csv");
  cmd_ppc(ppc);
  std::string ppc_text = read_file(ppc.out_path);
  CHECK(std::count(ppc_text.begin(), ppc_text.end(), '\n') == 1 + 2 * 10);

  CvOptions cv;
  cv.manifest_path = manifest;
  cv.k_min = 1;
  cv.k_max = 3;
  cv.n_folds = 2;
  cv.settings = fit.settings;
  cv.threads = 2;
  cv.out_path = dir.file("cv.csv");
  cmd_cv(cv);
  std::string table = read_file(cv.out_path);
  // Header, one row per K in 1..3, baseline row, best row.
  CHECK(std::count(table.begin(), table.end(), '\n') == 1 + 3 + 2);

  // Masked prediction of a single edge and a single attribute entry.
  write_file(dir.file("mask.csv"),
             "kind,name,source,target\n"
             "edge,layer0,0,1\n"
             "attribute,attr0,2,\n");
  predict.mask_path = dir.file("mask.csv");
  predict.out_path = dir.file("masked.csv");
  cmd_predict(predict);
  std::string masked = read_file(predict.out_path);
  CHECK(std::count(masked.begin(), masked.end(), '\n') == 3);

  // A model needing covariance refuses to run PPC without it.
  FitOptions plain = fit;
  plain.with_covariance = false;
  plain.out_path = dir.file("plain.json");
  cmd_fit(plain);
  PpcOptions bad = ppc;
  bad.model_path = plain.out_path;
  CHECK_THROWS_AS(cmd_ppc(bad), DataError);
  InterpretOptions bad_interpret;
  bad_interpret.model_path = plain.out_path;
  bad_interpret.out_path = dir.file("nope.csv");
  CHECK_THROWS_AS(cmd_interpret(bad_interpret), DataError);
}

TEST_CASE("cmd_fit is reproducible including its checksum") {
  TempDir dir;
  GenerateOptions generate;
  generate.out_dir = (dir.path / "data").string();
  write_file(dir.file("gen.json"),
             R"({"n_nodes": 10, "communities": 2, "rng_seed": 6,
                 "layers": [{"type": "poisson"}], "attributes": []})");
  generate.config_path = dir.file("gen.json");
  const std::string manifest = cmd_generate(generate);

  FitOptions fit;
  fit.manifest_path = manifest;
  fit.communities = 2;
  fit.settings.n_restarts = 2;
  fit.settings.max_iterations = 150;
  fit.settings.init_variance = 1.0;
  fit.out_path = dir.file("a.json");
  cmd_fit(fit);
  fit.out_path = dir.file("b.json");
  cmd_fit(fit);
  CHECK(read_file(dir.file("a.json")) == read_file(dir.file("b.json")));
}
