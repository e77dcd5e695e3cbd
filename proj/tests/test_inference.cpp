#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "piham/inference.hpp"
#include "piham/rng.hpp"
#include "piham/types.hpp"

using namespace piham;

namespace {

HeterogeneousDataset sample_dataset(Index n, std::uint64_t seed) {
  HeterogeneousDataset data;
  data.n_nodes = n;
  data.layer_kinds = {{LayerFamily::bernoulli}, {LayerFamily::poisson}};
  std::mt19937_64 rng = substream(seed, 0);
  std::bernoulli_distribution coin(0.4);
  std::poisson_distribution<int> counts(1.0);
  Matrix a0 = Matrix::Zero(n, n), a1 = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      a0(i, j) = coin(rng) ? 1.0 : 0.0;
      a1(i, j) = counts(rng);
    }
  data.layers = {a0, a1};
  data.attribute_kinds = {{AttributeFamily::gaussian, 2, 0.25}};
  Vector gauss(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < n; ++i) gauss(i) = normal(rng);
  data.attributes = {gauss};
  for (Index i = 0; i < n; ++i) data.node_labels.push_back(std::to_string(i));
  return data;
}

OptimizerSettings fast_settings() {
  OptimizerSettings s;
  s.learning_rate = 0.2;
  s.max_iterations = 600;
  s.tolerance = 1e-9;
  s.n_restarts = 3;
  s.init_variance = 1.0;
  s.rng_seed = 7;
  return s;
}

}  // namespace

TEST_CASE("prior-only fit lands on the prior mode with identity covariance") {
  HeterogeneousDataset data = sample_dataset(6, 161);
  ModelConfig config = make_config(data, 3);
  auto empty = ObservationMask::empty(data);
  OptimizerSettings s = fast_settings();
  s.max_iterations = 3000;
  s.tolerance = 1e-10;
  s.n_restarts = 2;

  FitResult fit = fit_map(data, empty, config, s);
  CHECK(pack(fit.map_state).cwiseAbs().maxCoeff() < 1e-4);

  auto report = laplace_covariance(data, fit.map_state, empty, config);
  REQUIRE(report.blocks.size() == block_spans(config, 6).size());
  for (const auto& block : report.blocks) {
    Matrix identity = Matrix::Identity(block.span.size, block.span.size);
    CHECK((block.covariance - identity).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(block.jitter == 0.0);
  }
}

TEST_CASE("prior N(0,9) gives 9 I covariance blocks") {
  HeterogeneousDataset data = sample_dataset(5, 171);
  ModelConfig config = make_config(data, 2);
  config.prior_variance = 9.0;
  auto empty = ObservationMask::empty(data);
  LatentState mode = make_state(config, 5);  // exact prior mode
  auto report = laplace_covariance(data, mode, empty, config);
  for (const auto& block : report.blocks) {
    Matrix expected =
        9.0 * Matrix::Identity(block.span.size, block.span.size);
    CHECK((block.covariance - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK(report.gradient_inf_norm == 0.0);
  CHECK_FALSE(report.gradient_flagged);
}

TEST_CASE("fit_map improves on every restart's record and selects the best") {
  HeterogeneousDataset data = sample_dataset(8, 181);
  ModelConfig config = make_config(data, 2);
  auto mask = ObservationMask::full(data);
  OptimizerSettings s = fast_settings();
  FitResult fit = fit_map(data, mask, config, s);

  REQUIRE(fit.restart_trace.size() == 3);
  double best = fit.restart_trace[0].final_log_posterior;
  for (const auto& record : fit.restart_trace)
    best = std::max(best, record.final_log_posterior);
  CHECK(fit.final_log_posterior == best);
  CHECK(fit.restart_trace[fit.best_restart].final_log_posterior == best);
  CHECK(fit.final_log_posterior ==
        doctest::Approx(log_posterior(data, fit.map_state, mask, config))
            .epsilon(1e-12));
}

TEST_CASE("near-degenerate restarts pick the lowest strictly-best index") {
  HeterogeneousDataset data = sample_dataset(5, 191);
  ModelConfig config = make_config(data, 2);
  auto mask = ObservationMask::full(data);
  OptimizerSettings s = fast_settings();
  s.init_variance = 1e-18;  // restarts start within ~1e-9 of one another
  s.n_restarts = 4;
  FitResult fit = fit_map(data, mask, config, s);
  const double first = fit.restart_trace[0].final_log_posterior;
  for (const auto& record : fit.restart_trace)
    CHECK(record.final_log_posterior == doctest::Approx(first).epsilon(1e-9));
  // strictly-greater selection means every earlier restart sits strictly
  // below the winner, so an exact tie would resolve to the lowest index
  const double best =
      fit.restart_trace[static_cast<std::size_t>(fit.best_restart)]
          .final_log_posterior;
  for (int r = 0; r < fit.best_restart; ++r)
    CHECK(fit.restart_trace[static_cast<std::size_t>(r)].final_log_posterior <
          best);
  for (const auto& record : fit.restart_trace)
    CHECK(record.final_log_posterior <= best);
}

TEST_CASE("fit is deterministic and thread-count invariant") {
  HeterogeneousDataset data = sample_dataset(7, 201);
  ModelConfig config = make_config(data, 2);
  auto mask = ObservationMask::full(data);
  OptimizerSettings s = fast_settings();

  FitResult one = fit_map(data, mask, config, s, 1);
  FitResult four = fit_map(data, mask, config, s, 4);
  CHECK(pack(one.map_state) == pack(four.map_state));
  CHECK(one.final_log_posterior == four.final_log_posterior);
  CHECK(one.best_restart == four.best_restart);

  PosteriorEstimate pa = fit_posterior(data, mask, config, s, 1);
  PosteriorEstimate pb = fit_posterior(data, mask, config, s, 4);
  CHECK(pack(pa.map_state) == pack(pb.map_state));
  REQUIRE(pa.covariance.blocks.size() == pb.covariance.blocks.size());
  for (std::size_t b = 0; b < pa.covariance.blocks.size(); ++b)
    CHECK(pa.covariance.blocks[b].covariance ==
          pb.covariance.blocks[b].covariance);
}

TEST_CASE("multiply-back: covariance times negated Hessian is the identity") {
  HeterogeneousDataset data = sample_dataset(6, 211);
  ModelConfig config = make_config(data, 2);
  auto mask = ObservationMask::full(data);
  OptimizerSettings s = fast_settings();
  s.max_iterations = 1500;
  FitResult fit = fit_map(data, mask, config, s);
  auto report = laplace_covariance(data, fit.map_state, mask, config);
  auto blocks = block_hessian(data, fit.map_state, mask, config);
  REQUIRE(report.blocks.size() == blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Index size = blocks[b].span.size;
    Matrix negated = -blocks[b].matrix +
                     report.blocks[b].jitter * Matrix::Identity(size, size);
    Matrix product = report.blocks[b].covariance * negated;
    CHECK((product - Matrix::Identity(size, size)).cwiseAbs().maxCoeff() <
          1e-8);
  }
}

TEST_CASE("covariance blocks are symmetric") {
  HeterogeneousDataset data = sample_dataset(6, 221);
  ModelConfig config = make_config(data, 2);
  auto mask = ObservationMask::full(data);
  FitResult fit = fit_map(data, mask, config, fast_settings());
  auto report = laplace_covariance(data, fit.map_state, mask, config);
  for (const auto& block : report.blocks)
    CHECK((block.covariance - block.covariance.transpose())
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("membership_posterior exposes the out-row Gaussian") {
  HeterogeneousDataset data = sample_dataset(5, 231);
  ModelConfig config = make_config(data, 3);
  auto mask = ObservationMask::full(data);
  PosteriorEstimate posterior =
      fit_posterior(data, mask, config, fast_settings());
  MembershipPosterior node = membership_posterior(posterior, 2);
  REQUIRE(node.mean.size() == 3);
  REQUIRE(node.variance_diag.size() == 3);
  CHECK(node.mean ==
        posterior.map_state.out_membership.row(2).transpose());
  CHECK((node.variance_diag.array() > 0.0).all());
}

TEST_CASE("a hopeless optimization surfaces as a numeric failure") {
  HeterogeneousDataset data = sample_dataset(5, 241);
  // A Gaussian layer with tiny variance plus an enormous init overflows the
  // quadratic data term, so every restart is non-finite at first evaluation.
  data.layer_kinds.push_back({LayerFamily::gaussian, 1e-12});
  data.layers.push_back(Matrix::Constant(5, 5, 1e12));
  for (Index i = 0; i < 5; ++i) data.layers.back()(i, i) = 0.0;
  ModelConfig config = make_config(data, 2);
  auto mask = ObservationMask::full(data);
  OptimizerSettings s = fast_settings();
  s.init_variance = 1e300;
  s.n_restarts = 2;
  CHECK_THROWS_AS(fit_map(data, mask, config, s), NumericError);
}
