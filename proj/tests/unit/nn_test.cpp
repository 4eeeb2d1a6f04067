// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "flexpose/error.hpp"
#include "flexpose/nn/adam.hpp"
#include "flexpose/nn/checkpoint.hpp"
#include "flexpose/nn/graph.hpp"
#include "flexpose/nn/layers.hpp"
#include "support/gradcheck.hpp"

using namespace flexpose;
using namespace flexpose::nn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : t.data()) v = normal(rng);
  return t;
}

}  // namespace

TEST(DenseForward, ZeroInputBroadcastsBias) {
  Tensor x = Tensor::matrix(3, 2);
  Tensor w = Tensor::from_rows({{1.5, -2.0, 0.5}, {3.0, 1.0, 7.0}});
  Tensor b = Tensor({3}, {0.1, 0.2, 0.3});
  Tensor y = dense_forward(x, w, b);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(y(r, c), b[c]);
}

TEST(DenseForward, IdentityWeightsReturnInput) {
  Tensor x = Tensor::from_rows({{1.25, -3.5}, {0.0, 9.0}});
  Tensor w = Tensor::from_rows({{1, 0}, {0, 1}});
  EXPECT_EQ(dense_forward(x, w, Tensor::vector(2)), x);
}

TEST(DenseForward, HandMultiply) {
  Tensor y = dense_forward(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{1, 0}, {0, 1}}),
                           Tensor({2}, {3, 4}));
  EXPECT_EQ(y, Tensor::from_rows({{4, 6}}));
}

TEST(DenseForward, ShapeMismatchThrows) {
  EXPECT_THROW(dense_forward(Tensor::matrix(1, 3), Tensor::matrix(2, 2), Tensor::vector(2)),
               DimensionError);
  EXPECT_THROW(dense_forward(Tensor::matrix(1, 2), Tensor::matrix(2, 2), Tensor::vector(3)),
               DimensionError);
}

TEST(LstmStep, ZeroWeightsGiveHalfGates) {
  const Tensor w_in = Tensor::matrix(3, 8);
  const Tensor w_rec = Tensor::matrix(2, 8);
  const Tensor bias = Tensor::vector(8);
  LstmState prev{Tensor::from_rows({{0.3, -0.7}}), Tensor::from_rows({{0.8, -1.2}})};
  LstmState next = lstm_step(Tensor::from_rows({{5, -2, 1}}), prev, w_in, w_rec, bias);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_DOUBLE_EQ(next.c[j], 0.5 * prev.c[j]);
    EXPECT_DOUBLE_EQ(next.h[j], 0.5 * std::tanh(0.5 * prev.c[j]));
  }
  LstmState from_zero =
      lstm_step(Tensor::from_rows({{5, -2, 1}}), LstmState::zeros(1, 2), w_in, w_rec, bias);
  EXPECT_EQ(from_zero.h, Tensor::matrix(1, 2));
}

TEST(LstmStep, ZeroLengthSequenceLeavesStateUnchanged) {
  Rng rng(3);
  LstmStack stack("s", 4, 5, 2, rng);
  auto state = stack.zero_state(2);
  state[0].h = random_tensor({2, 5}, rng);
  const auto before = state;
  std::vector<Tensor> empty_sequence;
  for (const Tensor& x : empty_sequence) stack.infer_step(x, state);
  ASSERT_EQ(state.size(), before.size());
  for (std::size_t l = 0; l < state.size(); ++l) {
    EXPECT_EQ(state[l].h, before[l].h);
    EXPECT_EQ(state[l].c, before[l].c);
  }
}

TEST(LstmStep, NonFiniteInputRaisesNumericError) {
  Rng rng(5);
  LstmLayer layer("l", 2, 3, rng);
  Tensor x = Tensor::from_rows({{std::nan(""), 1.0}});
  EXPECT_THROW(layer.infer_step(x, LstmState::zeros(1, 3)), NumericError);
}

TEST(LstmStep, GraphAndInferencePathsAgreeToRoundoff) {
  Rng rng(11);
  LstmStack stack("s", 3, 4, 2, rng);
  std::vector<Tensor> xs;
  for (int t = 0; t < 5; ++t) xs.push_back(random_tensor({2, 3}, rng));
  auto state = stack.zero_state(2);
  Graph g;
  auto gs = stack.graph_state(g, stack.zero_state(2));
  for (const Tensor& x : xs) {
    Tensor y = stack.infer_step(x, state);
    Var yv = stack.step(g, g.constant(x), gs);
    ASSERT_TRUE(y.same_shape(g.value(yv)));
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], g.value(yv)[i], 1e-13);
  }
}

TEST(LstmInit, ForgetBiasAndOrthogonalRecurrence) {
  Rng rng(2);
  LstmLayer layer("l", 3, 4, rng);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(layer.bias.value[j], 0.0);
    EXPECT_EQ(layer.bias.value[4 + j], 1.0);
  }
  const Tensor& w = layer.w_recurrent.value;
  for (std::size_t gate = 0; gate < 4; ++gate)
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        double dot = 0.0;
        for (std::size_t r = 0; r < 4; ++r) dot += w(r, gate * 4 + a) * w(r, gate * 4 + b);
        EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
      }
}

TEST(GradientCheck, Dense) {
  Rng rng(1);
  Dense dense("d", 4, 3, rng);
  const Tensor x = random_tensor({5, 4}, rng);
  const Tensor target = random_tensor({5, 3}, rng);
  const double err = test_support::gradient_check(dense.parameters(), [&](Graph& g) {
    return g.mse(dense.forward(g, g.constant(x)), g.constant(target));
  });
  EXPECT_LT(err, 1e-4);
}

TEST(GradientCheck, LstmStackOverSequence) {
  Rng rng(7);
  LstmStack stack("s", 3, 4, 2, rng);
  Dense head("h", 4, 2, rng);
  std::vector<Tensor> xs, ys;
  for (int t = 0; t < 6; ++t) {
    xs.push_back(random_tensor({2, 3}, rng));
    ys.push_back(random_tensor({2, 2}, rng));
  }
  ParameterList params = stack.parameters();
  for (Parameter* p : head.parameters()) params.push_back(p);
  const double err = test_support::gradient_check(params, [&](Graph& g) {
    auto state = stack.graph_state(g, stack.zero_state(2));
    Var total = g.constant(Tensor::scalar(0.0));
    for (std::size_t t = 0; t < xs.size(); ++t) {
      Var y = head.forward(g, stack.step(g, g.constant(xs[t]), state));
      total = g.add(total, g.mse(y, g.constant(ys[t])));
    }
    return total;
  });
  EXPECT_LT(err, 1e-4);
}

TEST(GradientCheck, ElementwiseAndStructuralOps) {
  Rng rng(9);
  Parameter a("a", random_tensor({3, 4}, rng));
  Parameter b("b", random_tensor({3, 4}, rng));
  Parameter bias("bias", random_tensor({4}, rng));
  const double err = test_support::gradient_check({&a, &b, &bias}, [&](Graph& g) {
    Var va = g.param(a), vb = g.param(b);
    Var s = g.add(g.sigmoid(va), g.tanh(vb));
    Var m = g.mul(s, g.exp(g.scale(vb, 0.3)));
    Var r = g.relu(g.add_bias(g.sub(m, g.square(va)), g.param(bias)));
    Var cat = g.concat_cols({r, g.abs(va), g.add_scalar(vb, 2.0)});
    Var sl = g.slice_cols(cat, 2, 9);
    return g.add(g.mean(g.square(sl)), g.scale(g.sum(g.slice_cols(cat, 9, 12)), 0.1));
  });
  EXPECT_LT(err, 1e-4);
}

TEST(GradientCheck, MseMatchesClosedForm) {
  Parameter a("a", Tensor({2}, {0.0, 0.0}));
  const Tensor b({2}, {3.0, 4.0});
  Graph g;
  Var loss = g.mse(g.param(a), g.constant(b));
  EXPECT_DOUBLE_EQ(g.value(loss)[0], 12.5);
  a.zero_grad();
  g.backward(loss);
  // 2 (a - b) / count
  EXPECT_DOUBLE_EQ(a.grad[0], -3.0);
  EXPECT_DOUBLE_EQ(a.grad[1], -4.0);
  const double err = test_support::gradient_check(
      {&a}, [&](Graph& gg) { return gg.mse(gg.param(a), gg.constant(b)); });
  EXPECT_LT(err, 1e-4);
}

TEST(Mse, IdenticalInputsGiveZeroAndMismatchThrows) {
  Graph g;
  Tensor t = Tensor::from_rows({{1, 2, 3}});
  EXPECT_EQ(g.value(g.mse(g.constant(t), g.constant(t)))[0], 0.0);
  EXPECT_THROW(g.mse(g.constant(t), g.constant(Tensor::matrix(1, 2))), DimensionError);
}

TEST(Graph, NonScalarLossRejected) {
  Graph g;
  Var v = g.constant(Tensor::matrix(2, 2));
  EXPECT_THROW(g.backward(v), DimensionError);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  Parameter p("p", Tensor({3}, {1.0, -2.0, 0.5}));
  AdamState state;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step({&p}, state, cfg);
  EXPECT_EQ(p.value, Tensor({3}, {1.0, -2.0, 0.5}));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("p", Tensor::scalar(0.0));
  p.grad[0] = 1.0;
  AdamState state;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step({&p}, state, cfg);
  EXPECT_NEAR(p.value[0], -0.1, 1e-8);
}

TEST(Adam, StepCounterIncreasesAndWeightDecayModes) {
  Parameter coupled("c", Tensor::scalar(2.0));
  Parameter decoupled("d", Tensor::scalar(2.0));
  AdamState sc, sd;
  AdamConfig cc;
  cc.learning_rate = 0.01;
  cc.weight_decay = 0.5;
  AdamConfig cd = cc;
  cd.decoupled_weight_decay = true;
  adam_step({&coupled}, sc, cc);
  adam_step({&decoupled}, sd, cd);
  // Coupled: gradient becomes wd * w = 1, Adam normalizes to lr.
  EXPECT_NEAR(coupled.value[0], 2.0 - 0.01, 1e-9);
  // Decoupled: zero gradient, only the direct decay lr * wd * w.
  EXPECT_NEAR(decoupled.value[0], 2.0 - 0.01 * 0.5 * 2.0, 1e-12);
  adam_step({&coupled}, sc, cc);
  EXPECT_EQ(sc.step, 2u);
}

TEST(Adam, ClipGradNormRescales) {
  Parameter p("p", Tensor({2}, {0.0, 0.0}));
  p.grad[0] = 3.0;
  p.grad[1] = 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm({&p}, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(p.grad[0], 0.6);
  EXPECT_DOUBLE_EQ(p.grad[1], 0.8);
}

namespace {

// Small LSTM regressor trained for K steps; returns the flattened parameters.
std::vector<double> train_tiny(std::uint64_t seed, int steps, double* final_loss = nullptr) {
  Rng rng(seed);
  LstmStack stack("s", 2, 32, 1, rng);
  Dense head("h", 32, 1, rng);
  std::vector<Tensor> xs, ys;
  Rng data_rng(99);
  for (int t = 0; t < 8; ++t) {
    xs.push_back(random_tensor({16, 2}, data_rng));
    ys.push_back(random_tensor({16, 1}, data_rng, 0.5));
  }
  ParameterList params = stack.parameters();
  for (Parameter* p : head.parameters()) params.push_back(p);
  AdamConfig cfg;
  cfg.learning_rate = 1e-2;
  Adam adam(params, cfg);
  double loss_value = 0.0;
  for (int s = 0; s < steps; ++s) {
    adam.zero_grad();
    Graph g;
    auto state = stack.graph_state(g, stack.zero_state(16));
    std::vector<Var> losses;
    Var total = g.constant(Tensor::scalar(0.0));
    for (std::size_t t = 0; t < xs.size(); ++t) {
      Var y = head.forward(g, stack.step(g, g.constant(xs[t]), state));
      total = g.add(total, g.mse(y, g.constant(ys[t])));
    }
    Var loss = g.scale(total, 1.0 / static_cast<double>(xs.size()));
    loss_value = g.value(loss)[0];
    g.backward(loss);
    clip_grad_norm(params, 1.0);
    adam.step();
  }
  if (final_loss) *final_loss = loss_value;
  std::vector<double> flat;
  for (Parameter* p : params) flat.insert(flat.end(), p->value.data().begin(), p->value.data().end());
  return flat;
}

}  // namespace

TEST(Training, DeterministicGivenSeed) {
  EXPECT_EQ(train_tiny(42, 20), train_tiny(42, 20));
  EXPECT_NE(train_tiny(42, 20), train_tiny(43, 20));
}

TEST(Training, OverfitsSixteenSequences) {
  double loss = 1.0;
  train_tiny(5, 3000, &loss);
  EXPECT_LT(loss, 1e-3);
}

TEST(Checkpoint, RoundTripPreservesBitsAndMetadata) {
  Rng rng(4);
  Dense dense("d", 3, 2, rng);
  CheckpointMeta meta{"dense-test", 4, 17, {{"note", "x"}}};
  const auto path = std::filesystem::temp_directory_path() / "flexpose_ckpt_test.bin";
  save_checkpoint(path, meta, dense.parameters());
  Checkpoint ckpt = load_checkpoint(path);
  EXPECT_EQ(ckpt.meta.kind, "dense-test");
  EXPECT_EQ(ckpt.meta.seed, 4u);
  EXPECT_EQ(ckpt.meta.step, 17u);
  EXPECT_EQ(ckpt.meta.extra.at("note"), "x");
  Rng other(8);
  Dense restored("d", 3, 2, other);
  load_parameters(ckpt, restored.parameters());
  EXPECT_EQ(restored.weight.value, dense.weight.value);
  EXPECT_EQ(restored.bias.value, dense.bias.value);

  Dense wrong("d", 4, 2, other);
  EXPECT_THROW(load_parameters(ckpt, wrong.parameters()), DimensionError);
  std::filesystem::remove(path);
}
