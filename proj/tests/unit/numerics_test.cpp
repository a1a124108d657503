// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "descnet/numerics/grad_check.hpp"
#include "descnet/numerics/ops.hpp"
#include "descnet/numerics/optim.hpp"
#include "descnet/rng.hpp"
#include "descnet/verify/suite.hpp"

namespace descnet::numerics {
namespace {

using TD = Tensor<double>;

TD random_tensor(Shape shape, Rng& rng) {
  TD t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

TEST(Tensor, RejectsMismatchedValuesAndZeroDims) {
  EXPECT_THROW(TD({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(TD(Shape{0, 2}), ShapeError);
}

TEST(Ops, SoftmaxOfZerosIsUniform) {
  Tape<double> tape;
  const auto y = softmax_fn(tape.constant(TD({1, 2})), 1);
  EXPECT_DOUBLE_EQ(y.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(y.value()[1], 0.5);
}

TEST(Ops, SoftmaxIsStableForLargeInputs) {
  Tape<double> tape;
  const auto y = softmax_fn(tape.constant(TD({1, 2}, {1000, 0})), 1);
  EXPECT_NEAR(y.value()[0], 1.0, 1e-12);
  EXPECT_NEAR(y.value()[1], 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(y.value()[1]));
}

TEST(Ops, SigmoidValues) {
  Tape<double> tape;
  const auto y = sigmoid_fn(tape.constant(TD({4}, {0, 800, -800, 2})));
  EXPECT_EQ(y.value()[0], 0.5);
  EXPECT_EQ(y.value()[1], 1.0);
  EXPECT_GE(y.value()[2], 0.0);
  EXPECT_NEAR(y.value()[3], 1 / (1 + std::exp(-2.0)), 1e-15);
}

TEST(Ops, SigmoidSymmetry) {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const double z = rng.uniform(-40, 40);
    EXPECT_NEAR(stable_sigmoid(z) + stable_sigmoid(-z), 1.0, 1e-12);
  }
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    Tape<float> tape;
    Tensor<float> x({3, 7});
    for (auto& v : x.values()) v = static_cast<float>(rng.uniform(-50, 50));
    const auto y = softmax_fn(tape.constant(x), 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_GE(y.value().at(r, c), 0.0f);
        s += y.value().at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Ops, MatmulIdentity) {
  Tape<double> tape;
  const auto a = tape.constant(TD({2, 2}, {1, 2, 3, 4}));
  const auto y = matmul(a, tape.constant(TD({2, 2}, {1, 0, 0, 1})));
  EXPECT_EQ(y.value(), a.value());
}

TEST(Ops, ShapeErrorsNameTheOp) {
  Tape<double> tape;
  try {
    matmul(tape.constant(TD({2, 3})), tape.constant(TD({2, 3})));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("(2,3)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(add(tape.constant(TD({2, 3})), tape.constant(TD({2}))), ShapeError);
}

TEST(Backward, LinearAndQuadratic) {
  Parameter<double> w("w", TD({3}, {0.5, -1, 2}));
  {
    Tape<double> tape;
    tape.backward(sum(tape.parameter(w)));
  }
  EXPECT_EQ(w.grad, TD({3}, {1, 1, 1}));

  Parameter<double> v("v", TD({2}, {1, 2}));
  Tape<double> tape;
  const auto x = tape.parameter(v);
  tape.backward(sum(mul(x, x)));
  EXPECT_EQ(v.grad, TD({2}, {2, 4}));
}

TEST(Backward, AccumulatesWithoutReset) {
  Parameter<double> w("w", TD({2}, {1, 1}));
  for (int i = 0; i < 2; ++i) {
    Tape<double> tape;
    tape.backward(sum(tape.parameter(w)));
  }
  EXPECT_EQ(w.grad, TD({2}, {2, 2}));
  w.zero_grad();
  EXPECT_EQ(w.grad, TD({2}, {0, 0}));
}

TEST(Backward, FanOutAccumulates) {
  Parameter<double> w("w", TD({1}, {3}));
  Tape<double> tape;
  const auto x = tape.parameter(w);
  tape.backward(sum(add(add(x, x), mul(x, x))));
  EXPECT_DOUBLE_EQ(w.grad[0], 2 + 2 * 3);
}

TEST(Backward, NonScalarLossIsAnError) {
  Parameter<double> w("w", TD({2}));
  Tape<double> tape;
  EXPECT_THROW(tape.backward(tape.parameter(w)), ShapeError);
}

TEST(Backward, ConcatSplitsUpstreamExactly) {
  Rng rng(10);
  Parameter<double> a("a", random_tensor({2, 3}, rng)), b("b", random_tensor({2, 4}, rng));
  const TD coeff = random_tensor({2, 7}, rng);
  Tape<double> tape;
  const auto y = concat<double>({tape.parameter(a), tape.parameter(b)}, 1);
  tape.backward(sum(mul(y, tape.constant(coeff))));
  double upstream = 0, pieces = 0;
  for (double c : coeff.values()) upstream += c * c;
  for (double g : a.grad.values()) pieces += g * g;
  for (double g : b.grad.values()) pieces += g * g;
  EXPECT_DOUBLE_EQ(pieces, upstream);
  EXPECT_EQ(a.grad.at(1, 2), coeff.at(1, 2));
  EXPECT_EQ(b.grad.at(0, 0), coeff.at(0, 3));
}

TEST(Backward, IsDeterministic) {
  auto run = [] {
    Rng rng(77);
    Parameter<double> w("w", random_tensor({4, 3}, rng));
    const TD x = random_tensor({5, 4}, rng);
    Tape<double> tape;
    const auto y = softmax_fn(numerics::tanh(matmul(tape.constant(x), tape.parameter(w))), 1);
    tape.backward(sum(mul(y, y)));
    return std::make_pair(y.value(), w.grad);
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  Parameter<double> w("w", TD({3}, {1, 2, 3}));
  const auto r = grad_check([](Tape<double>& t) { return t.constant(TD::scalar(4.0)); }, {&w}, 1e-6);
  EXPECT_EQ(r.max_relative_error, 0.0);
  EXPECT_EQ(r.entries_checked, 3u);
}

TEST(GradCheck, ThreeLayerComposition) {
  Rng rng(31);
  Parameter<double> w1("w1", random_tensor({4, 5}, rng)), w2("w2", random_tensor({5, 5}, rng)),
      w3("w3", random_tensor({5, 3}, rng)), b("b", random_tensor({5}, rng));
  const TD x = random_tensor({2, 4}, rng);
  const TD coeff = random_tensor({2, 3}, rng);
  const auto r = grad_check(
      [&](Tape<double>& t) {
        auto h = numerics::tanh(add(matmul(t.constant(x), t.parameter(w1)), t.parameter(b)));
        h = sigmoid_fn(matmul(h, t.parameter(w2)));
        const auto y = softmax_fn(matmul(h, t.parameter(w3)), 1);
        return sum(mul(y, t.constant(coeff)));
      },
      {&w1, &w2, &w3, &b}, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradCheck, EpsilonRange) {
  Parameter<double> w("w", TD({1}));
  auto fn = [&](Tape<double>& t) { return sum(t.parameter(w)); };
  EXPECT_THROW(grad_check(fn, {&w}, 1e-3), InputError);
  EXPECT_THROW(grad_check(fn, {&w}, 1e-8), InputError);
}

TEST(GradCheck, NonFiniteValueIsAnError) {
  Parameter<double> w("w", TD({1}, {1}));
  auto fn = [&](Tape<double>& t) { return scale(t.parameter(w), std::numeric_limits<double>::infinity()); };
  EXPECT_THROW(grad_check(fn, {&w}, 1e-6), NumericalError);
}

TEST(GradCheck, EveryPrimitiveAndLayerPasses) {
  for (const auto& g : verify::layer_gradient_checks(20190807)) {
    EXPECT_LT(g.result.max_relative_error, g.tolerance) << g.name << ": " << verify::describe(g.result);
  }
}

TEST(GradCheck, CorruptedAdjointIsDetected) {
  fault::corrupt_tanh_adjoint = true;
  const auto checks = verify::layer_gradient_checks(20190807);
  fault::corrupt_tanh_adjoint = false;
  bool tanh_failed = false;
  for (const auto& g : checks) {
    if (g.name.find("tanh") != std::string::npos) tanh_failed |= g.result.max_relative_error >= g.tolerance;
  }
  EXPECT_TRUE(tanh_failed);
}

TEST(Adam, ZeroGradientLeavesValue) {
  Parameter<double> w("w", TD({2}, {1, -1}));
  std::vector<Parameter<double>*> ps{&w};
  adam_step<double>(ps, {}, 1);
  EXPECT_EQ(w.value, TD({2}, {1, -1}));
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  Parameter<double> w("w", TD({2}, {0, 0}));
  std::vector<Parameter<double>*> ps{&w};
  AdamOptions opt;
  opt.learning_rate = 0.01;
  double last_step = 0;
  for (long t = 1; t <= 2000; ++t) {
    w.grad = TD({2}, {3.0, -0.5});
    const double before = w.value[0];
    adam_step<double>(ps, opt, t);
    last_step = w.value[0] - before;
  }
  EXPECT_NEAR(last_step, -0.01, 1e-6);
  EXPECT_GT(w.value[1], 0.0);
}

TEST(Adam, FrozenParameterUntouchedAndNonFiniteGradientRejected) {
  Parameter<double> frozen("frozen", TD({1}, {5}), false), w("w", TD({1}, {1}));
  frozen.grad = TD({1}, {1});
  w.grad = TD({1}, {1});
  std::vector<Parameter<double>*> ps{&frozen, &w};
  adam_step<double>(ps, {}, 1);
  EXPECT_EQ(frozen.value[0], 5.0);
  EXPECT_NE(w.value[0], 1.0);
  w.grad[0] = std::nan("");
  try {
    adam_step<double>(ps, {}, 2);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos) << e.what();
  }
}

TEST(Sgd, StepsAgainstGradient) {
  Parameter<double> w("w", TD({1}, {1}));
  w.grad = TD({1}, {2});
  std::vector<Parameter<double>*> ps{&w};
  sgd_step<double>(ps, 0.1);
  EXPECT_DOUBLE_EQ(w.value[0], 0.8);
}

}  // namespace
}  // namespace descnet::numerics
