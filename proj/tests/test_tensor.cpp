// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "favoa/favoa.hpp"
#include "oracles.hpp"

using namespace favoa;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, bool grad = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return Tensor::matrix(r, c, v, grad);
}

}  // namespace

TEST(Tensor, FactoriesAndShape) {
  const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_EQ(Tensor::scalar(4).item(), 4.0);
  EXPECT_THROW(t.item(), DimensionError);
}

TEST(Tensor, MatmulIdentityAndProjection) {
  const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(matmul(eye, m).to_vector(), m.to_vector());
  const Tensor proj = Tensor::matrix(2, 2, {1, 0, 0, 0});
  const Tensor col = Tensor::matrix(2, 1, {5, 7});
  EXPECT_EQ(matmul(proj, col).to_vector(), (std::vector<double>{5, 0}));
}

TEST(Tensor, MatmulMatchesTripleLoop) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_matrix(3, 4, rng), b = random_matrix(4, 2, rng);
    const auto expected = oracle::matmul(a.to_vector(), b.to_vector(), 3, 4, 2);
    const auto got = matmul(a, b).to_vector();
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-12);
  }
}

TEST(Tensor, MatmulShapeMismatchNamesShapes) {
  const Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
}

TEST(Tensor, ElementwiseValues) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::vector({0.0}))[0], 0.5);
  EXPECT_DOUBLE_EQ(favoa::tanh(Tensor::vector({0.0}))[0], 0.0);
  EXPECT_DOUBLE_EQ(relu(Tensor::vector({-3.0}))[0], 0.0);
  EXPECT_EQ(hadamard(Tensor::vector({1, 2, 3}), Tensor::vector({4, 5, 6})).to_vector(),
            (std::vector<double>{4, 10, 18}));
  EXPECT_EQ(elementwise(ElementwiseOp::add, Tensor::vector({1}), Tensor::vector({2}))[0], 3.0);
  EXPECT_THROW(add(Tensor::vector({1, 2}), Tensor::vector({1})), DimensionError);
  EXPECT_THROW(elementwise(ElementwiseOp::add, Tensor::vector({1})), ContractError);
}

TEST(Tensor, SigmoidStableAtExtremes) {
  const auto s = sigmoid(Tensor::vector({-800.0, 800.0})).to_vector();
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 1.0);
}

TEST(Tensor, ConcatRules) {
  EXPECT_EQ(concat(Tensor::vector({1, 2}), Tensor::vector({3})).to_vector(),
            (std::vector<double>{1, 2, 3}));
  const Tensor x = Tensor::vector({4, 5});
  EXPECT_EQ(concat(x, Tensor::zeros({0})).to_vector(), x.to_vector());
  EXPECT_THROW(concat(Tensor::zeros({2, 3}), Tensor::zeros({2, 2}), 0), DimensionError);

  Tensor a = Tensor::vector({1, 2, 3}, true), b = Tensor::vector({4}, true);
  backward(sum(concat(a, b)));
  EXPECT_EQ(std::vector<double>(a.grad().begin(), a.grad().end()), (std::vector<double>{1, 1, 1}));
}

TEST(Tensor, SoftmaxDirectFormulaAndStability) {
  EXPECT_EQ(softmax(Tensor::vector({0, 0}), 0).to_vector(), (std::vector<double>{0.5, 0.5}));
  const auto big = softmax(Tensor::vector({1000, 0}), 0).to_vector();
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_GE(big[1], 0.0);
  EXPECT_TRUE(std::isfinite(big[0]));
  const auto got = softmax(Tensor::vector({1, 2, 3}), 0).to_vector();
  const auto want = oracle::softmax({1, 2, 3});
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  EXPECT_THROW(softmax(Tensor::vector({NAN, 1.0}), 0), NumericError);
}

TEST(Tensor, SoftmaxRowsAreProbabilityVectors) {
  std::mt19937_64 rng(9);
  const auto m = softmax(random_matrix(5, 7, rng), 1);
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      EXPECT_GT(m.at(r, c), 0.0);
      EXPECT_LT(m.at(r, c), 1.0);
      total += m.at(r, c);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Tensor, BackwardAnalyticCases) {
  Tensor x = Tensor::scalar(3.0, true);
  backward(hadamard(x, x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);

  Tensor y = Tensor::zeros({4}, true);
  backward(sum(sigmoid(y)));
  for (double g : y.grad()) EXPECT_DOUBLE_EQ(g, 0.25);

  EXPECT_THROW(backward(Tensor::vector({1, 2}, true)), ContractError);
}

TEST(Tensor, ReusedNodeAccumulatesGradient) {
  Tensor x = Tensor::vector({2.0}, true);
  const Tensor y = add(hadamard(x, x), x);  // x^2 + x
  backward(sum(y));
  EXPECT_DOUBLE_EQ(x.grad()[0], 5.0);
}

TEST(Tensor, TapeIsTopologicallyOrdered) {
  Tensor a = Tensor::vector({1, 2}, true), b = Tensor::vector({3, 4}, true);
  const Tensor loss = sum(hadamard(sigmoid(add(a, b)), a));
  const auto entries = Tape::record(loss).entries();
  ASSERT_FALSE(entries.empty());
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t in : entries[i].inputs) EXPECT_LT(in, i);
  EXPECT_EQ(entries.back().op, "sum");
}

TEST(Tensor, NoGradGuardRecordsNothing) {
  Tensor x = Tensor::vector({1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = sigmoid(x);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.is_leaf());
}

TEST(Tensor, IdenticalInputsGiveBitIdenticalOutputs) {
  std::mt19937_64 r1(5), r2(5);
  const auto a = softmax(matmul(random_matrix(4, 3, r1), random_matrix(3, 4, r1)), 1).to_vector();
  const auto b = softmax(matmul(random_matrix(4, 3, r2), random_matrix(3, 4, r2)), 1).to_vector();
  EXPECT_EQ(a, b);
}

TEST(GradientCheck, SumOfSquaresIsTight) {
  std::mt19937_64 rng(1);
  const Tensor x = random_matrix(3, 3, rng);
  const auto report = finite_difference_check([](const Tensor& v) { return sum(hadamard(v, v)); }, x);
  EXPECT_LT(report.max_relative_error, 1e-7);
}

TEST(GradientCheck, ConstantHasZeroGradients) {
  const auto report = finite_difference_check(
      [](const Tensor&) { return Tensor::scalar(2.0); }, Tensor::vector({1, 2, 3}));
  for (const auto& e : report.elements) {
    EXPECT_EQ(e.analytic, 0.0);
    EXPECT_EQ(e.numeric, 0.0);
  }
  EXPECT_TRUE(report.passed());
}

TEST(GradientCheck, EveryOpPassesAtRandomPoints) {
  std::mt19937_64 rng(21);
  const Tensor w = random_matrix(3, 4, rng);
  const Tensor m = random_matrix(4, 3, rng);
  const Tensor r = random_matrix(3, 4, rng);
  using Fn = std::function<Tensor(const Tensor&)>;
  const std::vector<std::pair<std::string, Fn>> cases = {
      {"add", [&](const Tensor& x) { return sum(hadamard(add(x, w), r)); }},
      {"sub", [&](const Tensor& x) { return sum(hadamard(sub(w, x), r)); }},
      {"hadamard", [&](const Tensor& x) { return sum(hadamard(hadamard(x, x), r)); }},
      {"sigmoid", [&](const Tensor& x) { return sum(hadamard(sigmoid(x), r)); }},
      {"tanh", [&](const Tensor& x) { return sum(hadamard(favoa::tanh(x), r)); }},
      {"relu", [&](const Tensor& x) { return sum(hadamard(relu(add(x, Tensor::filled({3, 4}, 0.05))), r)); }},
      {"matmul", [&](const Tensor& x) { return sum(matmul(matmul(x, m), x)); }},
      {"transpose", [&](const Tensor& x) { return sum(hadamard(transpose(transpose(x)), r)); }},
      {"softmax", [&](const Tensor& x) { return sum(hadamard(softmax(x, 1), r)); }},
      {"softmax0", [&](const Tensor& x) { return sum(hadamard(softmax(x, 0), r)); }},
      {"concat", [&](const Tensor& x) { return sum(hadamard(concat(x, x, 1), concat(r, w, 1))); }},
      {"row", [&](const Tensor& x) { return sum(hadamard(row(x, 1), row(r, 2))); }},
      {"reshape", [&](const Tensor& x) { return sum(hadamard(flatten(x), flatten(r))); }},
      {"scale", [&](const Tensor& x) { return sum(hadamard(scale(x, -2.5), r)); }},
  };
  for (const auto& [name, f] : cases) {
    Tensor x = random_matrix(3, 4, rng);
    if (name == "matmul") x = random_matrix(3, 4, rng);
    const auto report = finite_difference_check(f, x);
    EXPECT_TRUE(report.passed()) << name << " max rel err " << report.max_relative_error;
  }
}

TEST(GradientCheck, CorruptedRuleIsDetected) {
  const Tensor x = Tensor::vector({0.3, -0.7, 1.1});
  test_hooks::ScopedRuleCorruption corrupt("sigmoid");
  const auto report = finite_difference_check([](const Tensor& v) { return sum(sigmoid(v)); }, x);
  EXPECT_FALSE(report.passed());
  EXPECT_NEAR(report.max_relative_error, 0.5, 1e-6);
}
