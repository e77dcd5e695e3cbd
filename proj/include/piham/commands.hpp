#pragma once

#include "piham/generator.hpp"
#include "piham/io.hpp"
#include "piham/optimizer.hpp"

#include <cstdint>
#include <string>

namespace piham {

// Subcommand entry points. Each writes its outputs atomically and throws
// (DataError, NumericError, std::invalid_argument) on failure; the CLI
// frontend maps exceptions to exit codes.

struct GenerateOptions {
  std::string config_path;  // optional GeneratorConfig JSON; defaults if ""
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;  // CLI --seed overrides the config file's seed
};

// Writes dataset CSVs, manifest.json, and ground_truth.json; returns the
// manifest path.
std::string cmd_generate(const GenerateOptions& options);

struct FitOptions {
  std::string manifest_path;
  int communities = 3;
  OptimizerSettings settings;
  int threads = 0;  // 0 = PIHAM_THREADS env or hardware concurrency
  bool with_covariance = false;
  std::string out_path = "model.json";
};

void cmd_fit(const FitOptions& options);

struct CvOptions {
  std::string manifest_path;
  int k_min = 1;
  int k_max = 10;
  int n_folds = 5;
  OptimizerSettings settings;
  int threads = 0;
  std::string out_path = "cv_report.csv";
};

// Per-K model-selection table: one row per K with AUC for binary layers,
// MAE for count layers/attributes, RMSE for real-valued ones, accuracy for
// categorical attributes; a trailing block marks the best K per metric.
void cmd_cv(const CvOptions& options);

struct PredictOptions {
  std::string model_path;
  std::string manifest_path;
  std::string mask_path;  // optional entry list; "" predicts everything
  std::string out_path = "predictions.csv";
};

void cmd_predict(const PredictOptions& options);

struct PpcOptions {
  std::string model_path;
  std::string manifest_path;
  int n_samples = 500;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_path = "ppc.csv";
};

// Requires a model saved with covariance blocks.
void cmd_ppc(const PpcOptions& options);

struct InterpretOptions {
  std::string model_path;
  std::string out_path = "interpretation.csv";
};

// Per-node memberships (softmax point estimate and Dirichlet mean), alpha
// vectors, Overlap, and barycenter variance. Requires covariance blocks.
void cmd_interpret(const InterpretOptions& options);

}  // namespace piham
