#include "k2v/nn/tape.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "k2v/error.hpp"
#include "k2v/nn/functional.hpp"
#include "support/gradcheck.hpp"

using namespace k2v::nn;
using k2v::testing::gradient_check;
using k2v::testing::random_tensor;

TEST(Tape, QuadraticGradientIsTheParameter) {
  ParameterSet ps;
  ps.add("p", Tensor::matrix(1, 4, {0.5, -1.25, 3.0, 2.0}));
  Tape tape;
  Var p = tape.param(ps, "p");
  Var loss = scale(sum(square(p)), 0.5);
  tape.backward(loss);
  EXPECT_EQ(ps.at("p").grad, ps.at("p").value);
}

TEST(Tape, UnreachableParameterHasExactlyZeroGradient) {
  ParameterSet ps;
  ps.add("used", Tensor::matrix(1, 2, {1.0, 2.0}));
  ps.add("unused", Tensor::matrix(1, 2, {3.0, 4.0}));
  Tape tape;
  Var loss = sum(square(tape.param(ps, "used")));
  tape.param(ps, "unused");
  tape.backward(loss);
  for (double g : ps.at("unused").grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(Tape, SecondBackwardWithoutResetIsRejected) {
  ParameterSet ps;
  ps.add("p", Tensor::matrix(1, 1, {2.0}));
  {
    Tape tape;
    Var loss = sum(square(tape.param(ps, "p")));
    tape.backward(loss);
    EXPECT_THROW(tape.backward(loss), k2v::StateError);
  }
  Tape other;
  Var loss = sum(square(other.param(ps, "p")));
  EXPECT_THROW(other.backward(loss), k2v::StateError);
  ps.zero_grad();
  Tape fresh;
  EXPECT_NO_THROW(fresh.backward(sum(square(fresh.param(ps, "p")))));
}

TEST(Tape, FrozenLeavesReceiveNoGradient) {
  ParameterSet ps;
  ps.add("w", Tensor::matrix(1, 2, {1.0, 1.0}));
  const ParameterSet& frozen = ps;
  Tape tape;
  Var x = tape.constant(Tensor::matrix(1, 2, {1.0, 2.0}));
  Var loss = sum(mul(x, tape.frozen(frozen, "w")));
  tape.backward(loss);
  EXPECT_FALSE(ps.grad_pending());
}

TEST(SoftmaxCrossEntropy, UniformLogits) {
  const double logits[] = {0, 0, 0, 0};
  EXPECT_NEAR(softmax_cross_entropy(logits, 2), std::log(4.0), 1e-12);
  EXPECT_NEAR(std::log(4.0), 1.3863, 1e-4);
}

TEST(SoftmaxCrossEntropy, SaturatedCorrectClass) {
  const double logits[] = {100, 0};
  EXPECT_NEAR(softmax_cross_entropy(logits, 0), 0.0, 1e-12);
}

TEST(SoftmaxCrossEntropy, MatchesNaiveFormula) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(5);
    for (double& v : z) v = n(rng);
    const std::size_t target = static_cast<std::size_t>(trial) % z.size();
    double denom = 0;
    for (double v : z) denom += std::exp(v);
    const double naive = -std::log(std::exp(z[target]) / denom);
    EXPECT_NEAR(softmax_cross_entropy(z, target), naive, 1e-9);
    const auto p = softmax(z);
    double s = 0;
    for (double v : p) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(SoftmaxCrossEntropy, TargetOutOfRange) {
  const double logits[] = {1, 2};
  EXPECT_THROW(softmax_cross_entropy(logits, 2), k2v::IndexError);
  Tape tape;
  Var z = tape.constant(Tensor::matrix(1, 2, {1, 2}));
  const std::size_t bad[] = {5};
  EXPECT_THROW(softmax_cross_entropy(z, bad), k2v::IndexError);
}

TEST(Cosine, Examples) {
  const double u[] = {1, 2, 3};
  const double v[] = {4, 5, 6};
  EXPECT_NEAR(cosine_similarity(u, u), 1.0, 1e-15);
  const double a[] = {1, 0}, b[] = {0, 3};
  EXPECT_EQ(cosine_similarity(a, b), 0.0);
  // 32 / (sqrt(14) sqrt(77)), by hand.
  EXPECT_NEAR(cosine_similarity(u, v), 32.0 / (std::sqrt(14.0) * std::sqrt(77.0)), 1e-15);
  EXPECT_NEAR(cosine_similarity(u, v), 0.9746, 1e-4);
  const double z[] = {0, 0, 0};
  EXPECT_THROW(cosine_similarity(u, z), k2v::DegenerateVectorError);
}

TEST(Cosine, RangeSymmetryAndScaleInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0.1, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    Tensor u = random_tensor(rng, 1, 6), v = random_tensor(rng, 1, 6);
    const double c = cosine_similarity(u.values(), v.values());
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EXPECT_EQ(c, cosine_similarity(v.values(), u.values()));
    const double alpha = pos(rng), beta = pos(rng);
    Tensor su = u, sv = v;
    for (double& x : su.values()) x *= alpha;
    for (double& x : sv.values()) x *= beta;
    EXPECT_NEAR(cosine_similarity(su.values(), sv.values()), c, 1e-9);
  }
}

TEST(Tape, CosineRowsMatchesScalarHelper) {
  std::mt19937_64 rng(5);
  Tape tape;
  Tensor a = random_tensor(rng, 3, 4), b = random_tensor(rng, 3, 4);
  Var c = cosine_rows(tape.constant(a), tape.constant(b));
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_NEAR(c.value()[r], cosine_similarity(a.row_span(r), b.row_span(r)), 1e-15);
  }
  EXPECT_THROW(cosine_rows(tape.constant(a), tape.constant(Tensor({3, 4}))), k2v::DegenerateVectorError);
}

TEST(Tape, ElementwiseOpsAgreeWithFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    ParameterSet ps;
    ps.add("a", random_tensor(rng, 3, 4));
    ps.add("b", random_tensor(rng, 4, 5));
    ps.add("r", random_tensor(rng, 1, 5));
    Tensor w = random_tensor(rng, 3, 5);
    auto loss = [&](Tape& t) {
      Var y = add_row(matmul(t.param(ps, "a"), t.param(ps, "b")), t.param(ps, "r"));
      Var z = add(mul(sigmoid(y), tanh(y)), scale(square(y), 0.1));
      return sum(mul(z, t.constant(w)));
    };
    EXPECT_LT(gradient_check(ps, loss).max_rel_error, 1e-4);
  }
}
