#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "piham/generator.hpp"
#include "piham/model.hpp"
#include "piham/transforms.hpp"

#include <cmath>

using namespace piham;

TEST_CASE("contiguous_groups splits evenly") {
  auto nine = contiguous_groups(9, 3);
  std::vector<Index> expected9 = {0, 0, 0, 1, 1, 1, 2, 2, 2};
  CHECK(nine == expected9);
  auto ten = contiguous_groups(10, 3);
  std::vector<Index> expected10 = {0, 0, 0, 0, 1, 1, 1, 2, 2, 2};
  CHECK(ten == expected10);
}

TEST_CASE("default config shape and validation") {
  GeneratorConfig config;
  CHECK_NOTHROW(config.validate());
  CHECK(config.n_nodes == 100);
  CHECK(config.communities == 3);
  CHECK(config.layer_kinds.size() == 3);
  CHECK(config.attribute_kinds.size() == 3);

  ModelConfig model = config.model_config();
  CHECK(model.communities == 3);
  CHECK(model.directed);

  GeneratorConfig bad = config;
  bad.communities = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  GeneratorConfig negative = config;
  negative.membership_out_in.variance = -1.0;
  CHECK_THROWS_AS(negative.validate(), std::invalid_argument);
}

TEST_CASE("generate_dataset produces a valid typed dataset") {
  GeneratorConfig config;
  config.n_nodes = 40;
  config.rng_seed = 5;
  GeneratedData generated = generate_dataset(config);
  const auto& data = generated.dataset;
  CHECK_NOTHROW(data.validate());
  CHECK(data.n_nodes == 40);
  CHECK(data.directed);
  REQUIRE(data.layers.size() == 3);
  REQUIRE(data.attributes.size() == 3);

  // Bernoulli entries binary, diagonal clean, Poisson entries integral.
  for (Index i = 0; i < 40; ++i) {
    CHECK(data.layers[0](i, i) == 0.0);
    for (Index j = 0; j < 40; ++j) {
      const double b = data.layers[0](i, j);
      CHECK((b == 0.0 || b == 1.0));
      const double p = data.layers[1](i, j);
      CHECK(p >= 0.0);
      CHECK(p == std::floor(p));
    }
    const double z = data.attributes[0](i);
    CHECK(z >= 0.0);
    CHECK(z < 4.0);
  }

  // Ground truth is self-consistent.
  CHECK(generated.truth.hard_groups == contiguous_groups(40, 3));
  CHECK(generated.truth.out_simplex.rows() == 40);
  for (Index i = 0; i < 40; ++i) {
    CHECK(generated.truth.out_simplex.row(i).sum() ==
          doctest::Approx(1.0).epsilon(1e-12));
    Index argmax = 0;
    for (Index k = 1; k < 3; ++k)
      if (generated.truth.out_simplex(i, k) >
          generated.truth.out_simplex(i, argmax))
        argmax = k;
    CHECK(argmax == generated.truth.hard_groups[i]);
  }
}

TEST_CASE("same seed reproduces everything; different seeds differ") {
  GeneratorConfig config;
  config.n_nodes = 30;
  config.rng_seed = 11;
  GeneratedData a = generate_dataset(config);
  GeneratedData b = generate_dataset(config);
  CHECK(pack(a.truth.latent) == pack(b.truth.latent));
  for (std::size_t l = 0; l < 3; ++l)
    CHECK(a.dataset.layers[l] == b.dataset.layers[l]);
  for (std::size_t x = 0; x < 3; ++x)
    CHECK(a.dataset.attributes[x] == b.dataset.attributes[x]);

  config.rng_seed = 12;
  GeneratedData c = generate_dataset(config);
  CHECK(a.dataset.layers[0] != c.dataset.layers[0]);
}

TEST_CASE("membership hyperpriors land where declared (Monte Carlo)") {
  GeneratorConfig config;
  config.n_nodes = 10000;
  config.communities = 3;
  config.rng_seed = 21;
  GroundTruth truth = sample_latent(config);
  double in_sum = 0.0, out_sum = 0.0;
  Index in_count = 0, out_count = 0;
  for (Index i = 0; i < config.n_nodes; ++i)
    for (Index k = 0; k < 3; ++k) {
      if (k == truth.hard_groups[i]) {
        in_sum += truth.latent.out_membership(i, k);
        ++in_count;
      } else {
        out_sum += truth.latent.out_membership(i, k);
        ++out_count;
      }
    }
  CHECK(in_sum / in_count == doctest::Approx(2.0).epsilon(0.01));
  CHECK(out_sum / out_count == doctest::Approx(-1.0).epsilon(0.01));
}

TEST_CASE("affinities are assortative after the link") {
  GeneratorConfig config;
  config.n_nodes = 20;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    config.rng_seed = seed;
    GroundTruth truth = sample_latent(config);
    for (std::size_t l = 0; l < config.layer_kinds.size(); ++l) {
      Matrix g = transform_g(config.layer_kinds[l], truth.latent.affinity[l]);
      double diag = 0.0, off = 0.0;
      for (Index a = 0; a < 3; ++a)
        for (Index b = 0; b < 3; ++b)
          (a == b ? diag : off) += g(a, b);
      CHECK(diag / 3.0 > off / 6.0);
    }
  }
}

TEST_CASE("forced near-one Bernoulli rate yields the complete digraph") {
  GeneratorConfig config;
  config.n_nodes = 12;
  config.layer_kinds = {{LayerFamily::bernoulli}};
  config.attribute_kinds = {};
  config.rng_seed = 31;
  GroundTruth truth = sample_latent(config);
  truth.latent.affinity[0].setConstant(60.0);  // logistic caps at 1 - 1e-12
  auto layers = sample_network(truth, config, 1);
  REQUIRE(layers.size() == 1);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j)
      CHECK(layers[0](i, j) == (i == j ? 0.0 : 1.0));
}

TEST_CASE("forced one-hot categorical loading yields a constant column") {
  GeneratorConfig config;
  config.n_nodes = 15;
  config.layer_kinds = {};
  config.attribute_kinds = {{AttributeFamily::categorical, 4}};
  config.rng_seed = 41;
  GroundTruth truth = sample_latent(config);
  truth.latent.attribute_loading[0].setConstant(-30.0);
  truth.latent.attribute_loading[0].col(2).setConstant(30.0);
  auto columns = sample_attributes(truth, config, 1);
  REQUIRE(columns.size() == 1);
  for (Index i = 0; i < 15; ++i) CHECK(columns[0](i, 0) == 2.0);
}

TEST_CASE("Poisson layer empirical mean tracks the rate field") {
  GeneratorConfig config;
  config.n_nodes = 500;
  config.layer_kinds = {{LayerFamily::poisson}};
  config.attribute_kinds = {};
  config.rng_seed = 51;
  GroundTruth truth = sample_latent(config);
  Matrix rate = expected_edge_matrix(truth.latent, config.model_config(), 0);
  auto layers = sample_network(truth, config, 1);
  double observed = 0.0, expected = 0.0;
  Index count = 0;
  for (Index i = 0; i < 500; ++i)
    for (Index j = 0; j < 500; ++j) {
      if (i == j) continue;
      observed += layers[0](i, j);
      expected += rate(i, j);
      ++count;
    }
  CHECK(observed / count ==
        doctest::Approx(expected / count).epsilon(0.02));
}

TEST_CASE("categorical frequencies track the mean probabilities") {
  GeneratorConfig config;
  config.n_nodes = 10000;
  config.layer_kinds = {};
  config.attribute_kinds = {{AttributeFamily::categorical, 4}};
  config.rng_seed = 61;
  GroundTruth truth = sample_latent(config);
  Matrix pi =
      expected_attribute_matrix(truth.latent, config.model_config(), 0);
  auto columns = sample_attributes(truth, config, 1);
  Vector frequency = Vector::Zero(4);
  for (Index i = 0; i < config.n_nodes; ++i)
    frequency(static_cast<Index>(columns[0](i, 0))) += 1.0;
  frequency /= static_cast<double>(config.n_nodes);
  Vector target = pi.colwise().mean().transpose();
  for (Index z = 0; z < 4; ++z)
    CHECK(frequency(z) == doctest::Approx(target(z)).epsilon(0.02));
}

TEST_CASE("Bernoulli density matches the Monte Carlo mean of lambda") {
  GeneratorConfig config;
  config.n_nodes = 200;
  config.rng_seed = 71;
  GeneratedData generated = generate_dataset(config);
  Matrix lambda =
      expected_edge_matrix(generated.truth.latent, config.model_config(), 0);
  double density = 0.0, mean_rate = 0.0;
  Index pairs = 0;
  for (Index i = 0; i < 200; ++i)
    for (Index j = 0; j < 200; ++j) {
      if (i == j) continue;
      density += generated.dataset.layers[0](i, j);
      mean_rate += lambda(i, j);
      ++pairs;
    }
  density /= pairs;
  mean_rate /= pairs;
  const double sigma =
      std::sqrt(mean_rate * (1.0 - mean_rate) / static_cast<double>(pairs));
  CHECK(std::abs(density - mean_rate) < 3.0 * sigma);
}
