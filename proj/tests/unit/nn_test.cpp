// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "descnet/nn/attention.hpp"
#include "descnet/nn/dense.hpp"
#include "descnet/nn/dropout.hpp"
#include "descnet/nn/embedding.hpp"
#include "descnet/nn/gru.hpp"
#include "descnet/nn/loss.hpp"
#include "descnet/nn/sequence_ops.hpp"
#include "descnet/numerics/optim.hpp"

namespace descnet::nn {
namespace {

using numerics::Parameter;
using numerics::Tape;
using TD = numerics::Tensor<double>;

TD random_tensor(numerics::Shape shape, Rng& rng, double limit = 1.0) {
  TD t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

TEST(GruCell, ZeroWeightsHalveTheState) {
  Rng rng(1);
  GRUCell<double> cell("c", 3, 2, rng);
  for (auto* p : cell.params()) p->value.fill(0.0);
  Tape<double> tape;
  const auto bound = cell.bind(tape);
  const auto h = gru_cell_step<double>(bound, tape.constant(TD({1, 3}, {0.3, -2, 5})), tape.constant(TD({1, 2}, {0.8, -0.4})));
  EXPECT_DOUBLE_EQ(h.value()[0], 0.4);
  EXPECT_DOUBLE_EQ(h.value()[1], -0.2);
}

TEST(GruCell, ZeroIsAFixedPointWithZeroBiases) {
  Rng rng(2);
  GRUCell<double> cell("c", 3, 4, rng);
  Tape<double> tape;
  const auto h = gru_cell_step<double>(cell.bind(tape), tape.constant(TD({2, 3})), tape.constant(TD({2, 4})));
  for (double v : h.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(GruCell, MatchesHandWrittenEquations) {
  Rng rng(3);
  GRUCell<double> cell("c", 2, 3, rng);
  for (auto* p : cell.params()) p->value = random_tensor(p->value.shape(), rng);
  const TD x = random_tensor({1, 2}, rng), hp = random_tensor({1, 3}, rng);
  Tape<double> tape;
  const auto h = gru_cell_step<double>(cell.bind(tape), tape.constant(x), tape.constant(hp));
  auto lin = [&](const Parameter<double>& W, const Parameter<double>& U, const Parameter<double>& b, const TD& hin, int j) {
    double s = b.value[j];
    for (int i = 0; i < 2; ++i) s += x[i] * W.value.at(i, j);
    for (int i = 0; i < 3; ++i) s += hin[i] * U.value.at(i, j);
    return s;
  };
  for (int j = 0; j < 3; ++j) {
    const double z = 1 / (1 + std::exp(-lin(cell.W_z, cell.U_z, cell.b_z, hp, j)));
    TD rh({1, 3});
    for (int k = 0; k < 3; ++k) rh[k] = hp[k] / (1 + std::exp(-lin(cell.W_r, cell.U_r, cell.b_r, hp, k)));
    const double cand = std::tanh(lin(cell.W_h, cell.U_h, cell.b_h, rh, j));
    EXPECT_NEAR(h.value()[j], (1 - z) * hp[j] + z * cand, 1e-14);
  }
}

TEST(GruCell, RejectsMisshapenInput) {
  Rng rng(4);
  GRUCell<double> cell("c", 3, 2, rng);
  Tape<double> tape;
  EXPECT_THROW(gru_cell_step<double>(cell.bind(tape), tape.constant(TD({1, 4})), tape.constant(TD({1, 2}))), ShapeError);
}

TEST(BiGru, PalindromeWithTiedWeightsMirrorsDirections) {
  Rng rng(5);
  BiGRU<double> layer("g", 3, 4, rng);
  for (auto* p : layer.forward_cell.params()) p->value = random_tensor(p->value.shape(), rng);
  auto fwd = layer.forward_cell.params(), bwd = layer.backward_cell.params();
  for (std::size_t i = 0; i < fwd.size(); ++i) bwd[i]->value = fwd[i]->value;

  const std::size_t L = 6, len = 5;
  TD x({L, 1, 3});
  const TD a = random_tensor({3, 3}, rng);
  const int pattern[5] = {0, 1, 2, 1, 0};
  for (std::size_t t = 0; t < len; ++t) {
    for (int d = 0; d < 3; ++d) x[t * 3 + d] = a.at(pattern[t], d);
  }
  Tape<double> tape;
  const std::vector<std::size_t> lengths{len};
  const auto h = bigru_forward(tape, layer, tape.constant(x), lengths);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(h.value()[t * 8 + k], h.value()[(len - 1 - t) * 8 + 4 + k], 1e-14);
    }
  }
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(h.value()[(L - 1) * 8 + k], 0.0);
}

TEST(BiGru, LengthOneSeesOneStepBothWays) {
  Rng rng(6);
  BiGRU<double> layer("g", 2, 3, rng);
  TD x = random_tensor({4, 1, 2}, rng);
  Tape<double> tape;
  const std::vector<std::size_t> lengths{1};
  const auto h = bigru_forward(tape, layer, tape.constant(x), lengths);
  const auto f = gru_cell_step<double>(layer.forward_cell.bind(tape), tape.constant(TD({1, 2}, {x[0], x[1]})), tape.constant(TD({1, 3})));
  const auto b = gru_cell_step<double>(layer.backward_cell.bind(tape), tape.constant(TD({1, 2}, {x[0], x[1]})), tape.constant(TD({1, 3})));
  for (int k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(h.value()[k], f.value()[k]);
    EXPECT_DOUBLE_EQ(h.value()[3 + k], b.value()[k]);
  }
}

TEST(BiGru, PaddedPositionsGetNoGradientAndLengthZeroIsZero) {
  Rng rng(7);
  BiGRU<double> layer("g", 2, 3, rng);
  Parameter<double> x("x", random_tensor({4, 2, 2}, rng));
  Tape<double> tape;
  const std::vector<std::size_t> lengths{2, 0};
  const auto h = bigru_forward(tape, layer, tape.parameter(x), lengths);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t k = 0; k < 6; ++k) {
      if (t >= 2) EXPECT_EQ(h.value()[(t * 2 + 0) * 6 + k], 0.0);
      EXPECT_EQ(h.value()[(t * 2 + 1) * 6 + k], 0.0);
    }
  }
  tape.backward(numerics::sum(h));
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t d = 0; d < 2; ++d) {
      if (t >= 2) EXPECT_EQ(x.grad[(t * 2 + 0) * 2 + d], 0.0);
      EXPECT_EQ(x.grad[(t * 2 + 1) * 2 + d], 0.0);
    }
  }
}

TEST(BiGru, StatesStayInsideUnitInterval) {
  Rng rng(8);
  BiGRU<double> layer("g", 5, 6, rng);
  for (auto* p : layer.params()) {
    for (auto& v : p->value.values()) v = rng.uniform(-2, 2);
  }
  TD x({10, 3, 5});
  for (auto& v : x.values()) v = rng.uniform(-3, 3);
  Tape<double> tape;
  const std::vector<std::size_t> lengths{10, 7, 1};
  const auto h = bigru_forward(tape, layer, tape.constant(x), lengths);
  for (double v : h.value().values()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
}

// Saturated f32 gates round to exactly +-1; the state must still not leave [-1, 1].
TEST(BiGru, SaturatedSinglePrecisionStatesStayBounded) {
  Rng rng(8);
  BiGRU<float> layer("g", 5, 6, rng);
  for (auto* p : layer.params()) {
    for (auto& v : p->value.values()) v = static_cast<float>(rng.uniform(-3, 3));
  }
  numerics::Tensor<float> x({10, 3, 5});
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform(-100, 100));
  Tape<float> tape;
  const std::vector<std::size_t> lengths{10, 7, 1};
  const auto h = bigru_forward(tape, layer, tape.constant(x), lengths);
  for (float v : h.value().values()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Pooling, HandComputedValues) {
  Tape<double> tape;
  const auto x = tape.constant(TD({3, 1, 2}, {1, -2, 3, 0, 99, 99}));
  const std::vector<std::size_t> lengths{2};
  EXPECT_EQ(max_pool_time(x, lengths).value(), TD({1, 2}, {3, 0}));
  EXPECT_EQ(avg_pool_time(x, lengths).value(), TD({1, 2}, {2, -1}));
  const std::vector<std::size_t> one{1};
  EXPECT_EQ(max_pool_time(x, one).value(), TD({1, 2}, {1, -2}));
  EXPECT_EQ(avg_pool_time(x, one).value(), TD({1, 2}, {1, -2}));
}

TEST(Pooling, ConstantSequenceAndEmptyExample) {
  Tape<double> tape;
  const auto x = tape.constant(TD({3, 2, 1}, {4, 9, 4, 9, 4, 9}));
  const std::vector<std::size_t> lengths{3, 0};
  EXPECT_EQ(max_pool_time(x, lengths).value(), TD({2, 1}, {4, 0}));
  EXPECT_EQ(avg_pool_time(x, lengths).value(), TD({2, 1}, {4, 0}));
}

TEST(Attention, SingleValidStepTakesAllWeight) {
  Rng rng(9);
  AttentionLayer<double> layer("a", 4, 3, rng);
  const TD h = random_tensor({3, 1, 4}, rng);
  Tape<double> tape;
  const std::vector<std::size_t> lengths{1};
  const auto out = attention_forward(tape, layer, tape.constant(h), lengths);
  EXPECT_EQ(out.weights.value()[0], 1.0);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(out.context.value()[k], h[k]);
}

TEST(Attention, IdenticalStatesShareWeightEvenly) {
  Rng rng(10);
  AttentionLayer<double> layer("a", 2, 2, rng);
  Tape<double> tape;
  const std::vector<std::size_t> lengths{2};
  const auto out = attention_forward(tape, layer, tape.constant(TD({2, 1, 2}, {0.3, -0.7, 0.3, -0.7})), lengths);
  EXPECT_DOUBLE_EQ(out.weights.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(out.weights.value()[1], 0.5);
  EXPECT_NEAR(out.context.value()[0], 0.3, 1e-15);
  EXPECT_NEAR(out.context.value()[1], -0.7, 1e-15);
}

TEST(Attention, WeightsSumToOneAndContextInConvexHull) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    AttentionLayer<double> layer("a", 3, 4, rng);
    for (auto* p : layer.params()) p->value = random_tensor(p->value.shape(), rng, 2.0);
    const TD h = random_tensor({5, 3, 3}, rng);
    const std::vector<std::size_t> lengths{5, 2, 0};
    Tape<double> tape;
    const auto out = attention_forward(tape, layer, tape.constant(h), lengths);
    for (std::size_t b = 0; b < 3; ++b) {
      double s = 0;
      for (std::size_t t = 0; t < 5; ++t) {
        const double w = out.weights.value()[t * 3 + b];
        EXPECT_GE(w, 0.0);
        if (t >= lengths[b]) EXPECT_EQ(w, 0.0);
        s += w;
      }
      if (lengths[b] > 0) EXPECT_NEAR(s, 1.0, 1e-12);
      for (std::size_t k = 0; k < 3; ++k) {
        double lo = 1e9, hi = -1e9;
        for (std::size_t t = 0; t < lengths[b]; ++t) {
          lo = std::min(lo, h[(t * 3 + b) * 3 + k]);
          hi = std::max(hi, h[(t * 3 + b) * 3 + k]);
        }
        const double v = out.context.value()[b * 3 + k];
        if (lengths[b] == 0) EXPECT_EQ(v, 0.0);
        else {
          EXPECT_GE(v, lo - 1e-12);
          EXPECT_LE(v, hi + 1e-12);
        }
      }
    }
  }
}

TEST(Dropout, IdentityAtRateZeroOrInference) {
  Rng rng(12);
  Tape<float> tape;
  numerics::Tensor<float> x({100}, 2.0f);
  const auto v = tape.constant(x);
  EXPECT_EQ(dropout(v, 0.0, true, rng).value(), x);
  EXPECT_EQ(dropout(v, 0.7, false, rng).value(), x);
  EXPECT_THROW(dropout(v, 1.0, true, rng), InputError);
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
  Rng rng(13);
  Tape<double> tape;
  const auto y = dropout(tape.constant(TD({100000}, 1.0)), 0.5, true, rng);
  double kept = 0, total = 0;
  for (double v : y.value().values()) {
    kept += v != 0 ? 1 : 0;
    total += v;
    if (v != 0) EXPECT_EQ(v, 2.0);
  }
  EXPECT_NEAR(kept / 1e5, 0.5, 0.01);
  EXPECT_NEAR(total / 1e5, 1.0, 0.02);
}

TEST(Loss, ClosedFormValues) {
  Tape<double> tape;
  const auto uniform = tape.constant(TD({2, 4}, 0.25));
  TD onehot({2, 4});
  onehot.at(0, 1) = 1;
  onehot.at(1, 3) = 1;
  EXPECT_NEAR(categorical_cross_entropy(uniform, onehot).value()[0], std::log(4.0), 1e-12);
  const auto half = tape.constant(TD({3, 2}, 0.5));
  EXPECT_NEAR(binary_cross_entropy(half, TD({3, 2}, {1, 0, 0, 0, 1, 1})).value()[0], std::log(2.0), 1e-12);
  EXPECT_LT(categorical_cross_entropy(tape.constant(onehot), onehot).value()[0], 1e-6);
}

TEST(Loss, CategoricalRejectsNonOneHotTargets) {
  Tape<double> tape;
  EXPECT_THROW(categorical_cross_entropy(tape.constant(TD({1, 2}, 0.5)), TD({1, 2}, {1, 1})), InputError);
}

TEST(Loss, PermutationEquivariantInClassAxis) {
  Rng rng(14);
  TD p = random_tensor({2, 3}, rng);
  for (auto& v : p.values()) v = 0.05 + 0.9 * std::abs(v);
  const TD t({2, 3}, {1, 0, 1, 0, 1, 0});
  const int perm[3] = {2, 0, 1};
  TD pp({2, 3}), tp({2, 3});
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      pp.at(r, c) = p.at(r, perm[c]);
      tp.at(r, c) = t.at(r, perm[c]);
    }
  }
  Tape<double> tape;
  EXPECT_NEAR(binary_cross_entropy(tape.constant(p), t).value()[0], binary_cross_entropy(tape.constant(pp), tp).value()[0],
              1e-15);
  TD q({1, 3}, {0.2, 0.5, 0.3}), qp({1, 3}), oh({1, 3}, {0, 1, 0}), ohp({1, 3});
  for (int c = 0; c < 3; ++c) {
    qp[c] = q[perm[c]];
    ohp[c] = oh[perm[c]];
  }
  EXPECT_DOUBLE_EQ(categorical_cross_entropy(tape.constant(q), oh).value()[0],
                   categorical_cross_entropy(tape.constant(qp), ohp).value()[0]);
}

TEST(Embedding, PaddingRowStaysZeroUnderTraining) {
  Rng rng(15);
  EmbeddingLayer<float> layer("e", 6, 4, rng);
  std::vector<numerics::Parameter<float>*> params{&layer.table()};
  const std::vector<std::int32_t> ids{2, 0, 5, 0, 1, 3};
  for (long step = 1; step <= 20; ++step) {
    layer.table().zero_grad();
    Tape<float> tape;
    const auto e = layer.forward(tape.parameter(layer.table()), ids, 3, 2);
    tape.backward(numerics::sum(numerics::mul(e, e)));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(layer.table().grad.at(0, k), 0.0f);
    numerics::adam_step<float>(params, {0.1}, step);
  }
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(layer.table().value.at(0, k), 0.0f);
  EXPECT_NE(layer.table().value.at(2, 0), 0.0f);
}

TEST(Embedding, InitialisedInsideSmallRange) {
  Rng rng(16);
  EmbeddingLayer<double> layer("e", 50, 8, rng);
  for (std::size_t r = 1; r < 50; ++r) {
    for (std::size_t k = 0; k < 8; ++k) EXPECT_LE(std::abs(layer.table().value.at(r, k)), 0.05);
  }
}

TEST(Embedding, PretrainedFileOverwritesCoveredRows) {
  Vocabulary vocab(10);
  vocab.add("cat", 1);
  vocab.add("dog", 1);
  const auto path = std::filesystem::temp_directory_path() / "descnet_vectors.txt";
  {
    std::ofstream out(path);
    out << "cat 0.5 -1 2\nunknown 1 1 1\n";
  }
  Rng rng(17);
  EmbeddingLayer<double> layer("e", vocab.size(), 3, rng);
  const double dog_before = layer.table().value.at(3, 0);
  EXPECT_EQ(load_pretrained_embeddings(path.string(), vocab, layer), 1u);
  EXPECT_EQ(layer.table().value.at(2, 0), 0.5);
  EXPECT_EQ(layer.table().value.at(2, 2), 2.0);
  EXPECT_EQ(layer.table().value.at(3, 0), dog_before);
  {
    std::ofstream out(path);
    out << "cat 0.5 -1\n";
  }
  EXPECT_THROW(load_pretrained_embeddings(path.string(), vocab, layer), InputError);
  std::filesystem::remove(path);
}

TEST(Dense, HeadActivations) {
  Rng rng(18);
  DenseLayer<double> soft("d", 4, 3, Activation::softmax, rng), sig("s", 4, 3, Activation::sigmoid, rng);
  Tape<double> tape;
  const auto x = tape.constant(random_tensor({5, 4}, rng, 3.0));
  const auto p = soft.forward(tape, x), q = sig.forward(tape, x);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      s += p.value().at(r, c);
      EXPECT_GT(q.value().at(r, c), 0.0);
      EXPECT_LT(q.value().at(r, c), 1.0);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace descnet::nn
