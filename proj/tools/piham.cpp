#include "piham/commands.hpp"
#include "piham/types.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

void add_optimizer_flags(CLI::App* cmd, piham::OptimizerSettings& settings) {
  cmd->add_option("--restarts", settings.n_restarts,
                  "number of random initializations");
  cmd->add_option("--iters", settings.max_iterations,
                  "Adam iteration budget per restart");
  cmd->add_option("--lr", settings.learning_rate, "Adam step size");
  cmd->add_option("--tol", settings.tolerance,
                  "objective-change convergence tolerance");
  cmd->add_option("--seed", settings.rng_seed, "root RNG seed");
  cmd->add_option("--init-variance", settings.init_variance,
                  "variance of the Gaussian initialization");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "piham: probabilistic inference for heterogeneous attributed "
      "multilayer networks"};
  app.require_subcommand(1);

  piham::GenerateOptions generate_options;
  CLI::App* generate =
      app.add_subcommand("generate", "sample a synthetic dataset");
  generate->add_option("--config", generate_options.config_path,
                       "generator config JSON; defaults when omitted");
  generate->add_option("--out", generate_options.out_dir,
                       "output directory")->required();
  CLI::Option* seed_option =
      generate->add_option("--seed", generate_options.seed,
                           "RNG seed (overrides config)");

  piham::FitOptions fit_options;
  CLI::App* fit = app.add_subcommand("fit", "MAP fit with Adam restarts");
  fit->add_option("--manifest", fit_options.manifest_path, "dataset manifest")
      ->required();
  fit->add_option("--k", fit_options.communities, "number of communities");
  add_optimizer_flags(fit, fit_options.settings);
  fit->add_option("--threads", fit_options.threads,
                  "worker threads (0 = PIHAM_THREADS or hardware)");
  fit->add_flag("--with-covariance", fit_options.with_covariance,
                "also compute Laplace covariance blocks");
  fit->add_option("--out", fit_options.out_path, "fitted model path");

  piham::CvOptions cv_options;
  std::vector<int> k_range;
  int cv_single_k = 0;
  CLI::App* cv = app.add_subcommand(
      "cv", "cross-validated model selection over a K range");
  cv->add_option("--manifest", cv_options.manifest_path, "dataset manifest")
      ->required();
  CLI::Option* k_range_option =
      cv->add_option("--k-range", k_range, "min and max K")
          ->expected(2);
  cv->add_option("--k", cv_single_k, "single K (shorthand for --k-range K K)")
      ->excludes(k_range_option);
  cv->add_option("--folds", cv_options.n_folds, "number of folds");
  add_optimizer_flags(cv, cv_options.settings);
  cv->add_option("--threads", cv_options.threads,
                 "worker threads (0 = PIHAM_THREADS or hardware)");
  cv->add_option("--out", cv_options.out_path, "report CSV path");

  piham::PredictOptions predict_options;
  CLI::App* predict =
      app.add_subcommand("predict", "expected values from a fitted model");
  predict->add_option("--model", predict_options.model_path, "fitted model")
      ->required();
  predict->add_option("--manifest", predict_options.manifest_path,
                      "dataset manifest")->required();
  predict->add_option("--mask", predict_options.mask_path,
                      "CSV of entries to predict (kind,name,source,target)");
  predict->add_option("--out", predict_options.out_path,
                      "predictions CSV path");

  piham::PpcOptions ppc_options;
  CLI::App* ppc =
      app.add_subcommand("ppc", "posterior-predictive check distances");
  ppc->add_option("--model", ppc_options.model_path,
                  "fitted model (needs covariance)")->required();
  ppc->add_option("--manifest", ppc_options.manifest_path, "dataset manifest")
      ->required();
  ppc->add_option("--samples", ppc_options.n_samples,
                  "number of posterior-predictive replicas");
  ppc->add_option("--seed", ppc_options.seed, "root RNG seed");
  ppc->add_option("--threads", ppc_options.threads,
                  "worker threads (0 = PIHAM_THREADS or hardware)");
  ppc->add_option("--out", ppc_options.out_path, "distances CSV path");

  piham::InterpretOptions interpret_options;
  CLI::App* interpret = app.add_subcommand(
      "interpret", "per-node posterior membership summaries");
  interpret->add_option("--model", interpret_options.model_path,
                        "fitted model (needs covariance)")->required();
  interpret->add_option("--out", interpret_options.out_path,
                        "interpretation CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& error) {
    app.exit(error);
    return 1;
  }

  try {
    if (generate->parsed()) {
      generate_options.seed_given = seed_option->count() > 0;
      piham::cmd_generate(generate_options);
    } else if (fit->parsed()) {
      piham::cmd_fit(fit_options);
    } else if (cv->parsed()) {
      if (k_range_option->count() > 0) {
        cv_options.k_min = k_range[0];
        cv_options.k_max = k_range[1];
      } else if (cv_single_k > 0) {
        cv_options.k_min = cv_single_k;
        cv_options.k_max = cv_single_k;
      }
      piham::cmd_cv(cv_options);
    } else if (predict->parsed()) {
      piham::cmd_predict(predict_options);
    } else if (ppc->parsed()) {
      piham::cmd_ppc(ppc_options);
    } else if (interpret->parsed()) {
      piham::cmd_interpret(interpret_options);
    }
  } catch (const piham::DataError& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 2;
  } catch (const piham::NumericError& error) {
    std::cerr << "numeric failure: " << error.what() << "\n";
    return 3;
  } catch (const std::exception& error) {
    std::cerr << "failure: " << error.what() << "\n";
    return 3;
  }
  return 0;
}
