#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sdnn/dataio.hpp"
#include "sdnn/engine.hpp"
#include "test_support.hpp"

namespace sdnn {
namespace {

LayeredNetwork<float> scalar_network(std::size_t layers, float weight, float bias) {
  LayeredNetwork<float> net;
  for (std::size_t l = 0; l < layers; ++l) {
    net.layers.push_back(SparseMatrix<float>::identity(1, weight));
    net.biases.emplace_back(1, bias);
  }
  return net;
}

TEST(Infer, SingleScalarLayer) {
  auto net = scalar_network(1, 1.0f, 0.0f);
  DenseBatch<float> y0(1, 1, {1.0f});
  auto out = infer(y0, net);
  EXPECT_EQ(out.activations(0, 0), 1.0f);
  EXPECT_EQ(out.categories, (std::vector<std::size_t>{1}));
  EXPECT_GT(out.t_dnn, 0.0);
  auto s = infer(sparsify(y0), net, 2);
  EXPECT_EQ(s.activations.at(0, 0), 1.0f);
}

TEST(Infer, ZeroInputsStayZero) {
  auto net = generate_network(challenge_spec(64, 12));
  // Positive bias would light up any live row; zero rows must ignore it.
  for (auto& b : net.biases) b = BiasVector<float>(64, 0.5f);
  SparseMatrix<float> y0(10, 64);
  auto out = infer(y0, net);
  EXPECT_EQ(out.activations.nnz(), 0u);
  EXPECT_TRUE(out.categories.empty());
  auto dense = infer(densify(y0), net);
  for (float v : dense.activations.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_TRUE(dense.categories.empty());
}

TEST(Infer, MatchesOracleOnGeneratedNetwork) {
  NetworkSpec spec;
  spec.radices = {2, 2, 2, 2, 2};
  spec.n_layers = 10;
  spec.weight_value = 0.6;
  spec.bias_value = -0.3;
  auto net = generate_network(spec);
  auto y0 = synthetic_inputs<float>(16, 32, 0.4, 3);
  auto ref = oracle_infer(y0, net);
  for (std::size_t workers : {1u, 2u, 0u}) {
    auto out_s = infer(y0, net, workers);
    auto out_d = infer(densify(y0), net, workers);
    auto got = densify(out_s.activations);
    for (std::size_t i = 0; i < 16; ++i) {
      for (std::size_t j = 0; j < 32; ++j) {
        EXPECT_TRUE(testing::close_rel(got(i, j), ref(i, j), 1e-5));
        EXPECT_TRUE(testing::close_rel(out_d.activations(i, j), ref(i, j), 1e-5));
      }
    }
    EXPECT_EQ(out_s.categories, extract_categories(ref));
    EXPECT_EQ(out_d.categories, extract_categories(ref));
  }
}

TEST(Infer, ShapeErrorNamesLayer) {
  auto net = scalar_network(3, 1.0f, 0.0f);
  net.layers[2] = SparseMatrix<float>::identity(2);
  net.biases[2] = BiasVector<float>(2, 0.0f);
  try {
    infer(DenseBatch<float>(1, 1, {1.0f}), net);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(oracle_infer(DenseBatch<float>(1, 1, {1.0f}), net), ShapeError);
  EXPECT_THROW(infer(DenseBatch<float>(1, 3), scalar_network(1, 1.0f, 0.0f)), ShapeError);
}

TEST(ExtractCategories, Examples) {
  EXPECT_TRUE(extract_categories(DenseBatch<float>(4, 3)).empty());
  DenseBatch<float> d(2, 2, {0.0f, 0.0f, 0.0f, 0.5f});
  EXPECT_EQ(extract_categories(d), (std::vector<std::size_t>{2}));
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = testing::random_sparse<float>(rng, 20, 6, 0.1, 0.0, 3.0);
    EXPECT_EQ(extract_categories(m), extract_categories(densify(m)));
  }
}

TEST(OracleInfer, NoLayersReturnsInput) {
  LayeredNetwork<float> empty;
  DenseBatch<float> y0(2, 3, {1, 0, 2, 0, 0, 3});
  auto out = oracle_infer(y0, empty);
  EXPECT_EQ(out, convert<double>(y0));
}

TEST(OracleInfer, ScalarRecurrenceDoublesUntilClip) {
  for (std::size_t layers = 0; layers <= 8; ++layers) {
    auto net = scalar_network(layers, 2.0f, 0.0f);
    DenseBatch<float> y0(1, 1, {1.0f});
    const double expected = std::min(std::pow(2.0, double(layers)), 32.0);
    EXPECT_EQ(oracle_infer(y0, net)(0, 0), expected) << layers;
    if (layers > 0) {
      EXPECT_EQ(infer(y0, net).activations(0, 0), expected);
    }
  }
}

TEST(Verify, Examples) {
  EXPECT_TRUE(verify({}, {}));
  EXPECT_TRUE(verify({1, 2}, {1, 2}));
  EXPECT_FALSE(verify({1, 2}, {1, 3}));
  EXPECT_FALSE(verify({1}, {1, 2}));
}

TEST(ComputeRate, Examples) {
  EXPECT_EQ(compute_rate(1e11, 1.0), 1e11);
  const double n_ops = 60000.0 * static_cast<double>(count_connections(120, 1024));
  EXPECT_EQ(n_ops, 2.359296e11);
  EXPECT_EQ(compute_rate(n_ops, 2.0), compute_rate(n_ops, 1.0) / 2.0);
  EXPECT_THROW(compute_rate(1.0, 0.0), InvariantError);
  EXPECT_THROW(compute_rate(1.0, -1.0), InvariantError);
}

TEST(RunChallenge, ResultInvariantsAndJson) {
  auto net = generate_network(challenge_spec(64, 6));
  auto y0 = synthetic_inputs<float>(40, 64, 0.25, 9);
  auto truth = extract_categories(oracle_infer(y0, net));
  for (auto rep : {Representation::dense, Representation::sparse}) {
    ChallengeOptions opts;
    opts.representation = rep;
    opts.repetitions = 3;
    auto results = run_challenge(y0, net, truth, opts);
    ASSERT_EQ(results.size(), 3u);
    for (const auto& r : results) {
      EXPECT_TRUE(r.correct);
      EXPECT_EQ(r.n_inputs, 40u);
      EXPECT_EQ(r.n_connections, count_connections(6, 64));
      EXPECT_EQ(r.n_ops, r.n_inputs * r.n_connections);
      EXPECT_GT(r.t_dnn, 0.0);
      EXPECT_DOUBLE_EQ(r.rate, double(r.n_ops) / r.t_dnn);
    }
    const auto& best = fastest(results);
    for (const auto& r : results) EXPECT_LE(best.t_dnn, r.t_dnn);
    auto j = to_json(best);
    for (const char* key : {"n_neurons", "n_layers", "n_inputs", "n_connections", "n_ops",
                            "t_dnn_seconds", "rate", "correct", "workers", "representation"}) {
      EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j["representation"], to_string(rep));
  }
  ChallengeOptions bad;
  bad.repetitions = 0;
  EXPECT_THROW(run_challenge(y0, net, truth, bad), InvariantError);
  auto wrong = truth;
  wrong.push_back(1000);
  EXPECT_FALSE(run_challenge(y0, net, wrong, ChallengeOptions{}).front().correct);
}

TEST(Infer, WorkerCountIndependence) {
  std::mt19937_64 rng(31);
  auto net = testing::random_network(rng, 48, 8, 0.15);
  auto y0 = synthetic_inputs<float>(50, 48, 0.3, 4);
  auto ref = infer(y0, net, 1);
  auto ref_d = infer(densify(y0), net, 1);
  for (std::size_t w : {2u, 0u, 7u}) {
    EXPECT_EQ(infer(y0, net, w).activations, ref.activations);
    EXPECT_EQ(infer(densify(y0), net, w).activations, ref_d.activations);
  }
}

TEST(Infer, NegativeBiasSparsityNonIncreasing) {
  // Weight 1/32 with fan-in 32 averages the inputs, so nothing saturates.
  // Layer 0 fans each input pixel out to 32 neurons and may grow nnz; from
  // there on the live set only thins out.
  for (std::size_t n : {64u, 256u, 1024u}) {
    auto spec = challenge_spec(n, 30);
    spec.weight_value = 1.0 / 32.0;
    spec.bias_value = -0.05;
    auto net = generate_network(spec);
    for (double density : {0.1, 0.3, 0.6}) {
      auto y = layer_forward(synthetic_inputs<float>(32, n, density, n), net.layers[0],
                             net.biases[0]);
      std::size_t prev = y.nnz();
      for (std::size_t l = 1; l < net.n_layers(); ++l) {
        y = layer_forward(y, net.layers[l], net.biases[l]);
        EXPECT_LE(y.nnz(), prev) << "n " << n << " density " << density << " layer " << l;
        prev = y.nnz();
      }
    }
  }
}

}  // namespace
}  // namespace sdnn
