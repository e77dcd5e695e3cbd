#include "piham/inference.hpp"

#include "piham/gradient.hpp"
#include "piham/parallel.hpp"
#include "piham/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <random>

namespace piham {

namespace {

std::string block_name(const BlockSpan& span) {
  switch (span.kind) {
    case BlockSpan::Kind::out_row:
      return "out_membership row " + std::to_string(span.entity);
    case BlockSpan::Kind::in_row:
      return "in_membership row " + std::to_string(span.entity);
    case BlockSpan::Kind::affinity:
      return "affinity layer " + std::to_string(span.entity);
    case BlockSpan::Kind::attribute:
      return "attribute loading " + std::to_string(span.entity);
  }
  return "unknown block";
}

}  // namespace

FitResult fit_map(const HeterogeneousDataset& data, const ObservationMask& mask,
                  const ModelConfig& config, const OptimizerSettings& settings,
                  int n_threads) {
  config.validate();
  settings.validate();
  const Index dim = parameter_count(config, data.n_nodes);
  const double init_sd = std::sqrt(settings.init_variance);

  ObjectiveGradient objective = [&](const Vector& flat, Vector& grad) {
    return log_posterior_with_gradient(
        data, unpack(flat, config, data.n_nodes), mask, config, grad);
  };

  std::vector<AdamResult> runs(settings.n_restarts);
  parallel_for(settings.n_restarts, resolve_threads(n_threads), [&](Index r) {
    std::mt19937_64 rng =
        substream(settings.rng_seed, static_cast<std::uint64_t>(r));
    std::normal_distribution<double> draw(settings.init_mean, init_sd);
    Vector init(dim);
    for (Index p = 0; p < dim; ++p) init(p) = draw(rng);
    try {
      runs[r] = adam_minimize(objective, init, settings);
    } catch (const std::domain_error&) {
      // A diverged restart is skipped; only all of them failing is fatal.
    }
  });

  FitResult result;
  result.restart_trace.reserve(runs.size());
  int best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    double value = runs[r].objective_trace.empty()
                       ? -std::numeric_limits<double>::infinity()
                       : runs[r].objective_trace.back();
    double recorded =
        std::isfinite(value) ? value : std::numeric_limits<double>::lowest();
    result.restart_trace.push_back({static_cast<int>(r), recorded,
                                    runs[r].iterations, runs[r].converged});
    if (std::isfinite(value) && value > best_value) {
      best_value = value;
      best = static_cast<int>(r);
    }
  }
  if (best < 0)
    throw NumericError("every optimizer restart ended at a non-finite value");

  result.map_state = unpack(runs[best].state, config, data.n_nodes);
  result.final_log_posterior = best_value;
  result.best_restart = best;
  return result;
}

CovarianceReport laplace_covariance(const HeterogeneousDataset& data,
                                    const LatentState& map_state,
                                    const ObservationMask& mask,
                                    const ModelConfig& config, int n_threads) {
  CovarianceReport report;
  Vector grad;
  log_posterior_with_gradient(data, map_state, mask, config, grad);
  report.gradient_inf_norm = grad.cwiseAbs().maxCoeff();
  report.gradient_flagged = report.gradient_inf_norm > 1e-3;

  std::vector<HessianBlock> hessian =
      block_hessian(data, map_state, mask, config, nullptr, 1e-4,
                    resolve_threads(n_threads));

  report.blocks.resize(hessian.size());
  std::vector<std::string> failures(hessian.size());
  parallel_for(static_cast<Index>(hessian.size()),
               resolve_threads(n_threads), [&](Index b) {
    const HessianBlock& block = hessian[b];
    Matrix negated = -block.matrix;
    const Index n = negated.rows();
    double jitter = 0.0;
    Eigen::LLT<Matrix> llt(negated);
    while (llt.info() != Eigen::Success) {
      jitter = jitter == 0.0 ? kJitterFloor : jitter * 10.0;
      if (jitter > kJitterCap) {
        failures[b] = block_name(block.span);
        return;
      }
      llt.compute(negated + jitter * Matrix::Identity(n, n));
    }
    Matrix covariance = llt.solve(Matrix::Identity(n, n));
    covariance = (0.5 * (covariance + covariance.transpose())).eval();
    report.blocks[b] = {block.span, std::move(covariance), jitter,
                        block.asymmetry};
  });

  std::string failed;
  for (const std::string& name : failures) {
    if (name.empty()) continue;
    failed += failed.empty() ? name : ", " + name;
  }
  if (!failed.empty())
    throw NumericError(
        "negated Hessian not positive definite within the jitter cap for: " +
        failed);
  return report;
}

PosteriorEstimate fit_posterior(const HeterogeneousDataset& data,
                                const ObservationMask& mask,
                                const ModelConfig& config,
                                const OptimizerSettings& settings,
                                int n_threads) {
  FitResult fit = fit_map(data, mask, config, settings, n_threads);
  PosteriorEstimate posterior;
  posterior.covariance =
      laplace_covariance(data, fit.map_state, mask, config, n_threads);
  posterior.map_state = std::move(fit.map_state);
  posterior.final_log_posterior = fit.final_log_posterior;
  posterior.restart_trace = std::move(fit.restart_trace);
  return posterior;
}

MembershipPosterior membership_posterior(const PosteriorEstimate& posterior,
                                         Index node) {
  for (const CovarianceBlock& block : posterior.covariance.blocks) {
    if (block.span.kind == BlockSpan::Kind::out_row &&
        block.span.entity == node) {
      MembershipPosterior out;
      out.mean = posterior.map_state.out_membership.row(node);
      out.variance_diag = block.covariance.diagonal();
      return out;
    }
  }
  throw std::invalid_argument("no covariance block for node " +
                              std::to_string(node));
}

}  // namespace piham
