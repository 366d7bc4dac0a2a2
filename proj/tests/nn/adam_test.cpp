#include "k2v/nn/adam.hpp"

#include <gtest/gtest.h>

#include "k2v/error.hpp"
#include "k2v/nn/tape.hpp"

using namespace k2v::nn;

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParameterSet ps;
  ps.add("p", Tensor::matrix(1, 3, {1, -2, 3}));
  const Tensor before = ps.at("p").value;
  ps.mark_grad_pending();
  AdamState st;
  adam_step(ps, st);
  EXPECT_EQ(ps.at("p").value, before);
}

TEST(Adam, FirstStepMovesByTheLearningRate) {
  // m = 0.1, v = 0.001; bias-corrected mhat = vhat = 1, so the step is
  // lr / (1 + eps).
  ParameterSet ps;
  ps.add("p", Tensor::matrix(1, 1, {0.5}));
  ps.at("p").grad[0] = 1.0;
  ps.mark_grad_pending();
  AdamState st;
  st.learning_rate = 0.001;
  adam_step(ps, st);
  EXPECT_NEAR(ps.at("p").value[0], 0.5 - 0.001 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 1u);
  EXPECT_EQ(ps.at("p").grad[0], 0.0);
  EXPECT_FALSE(ps.grad_pending());
}

TEST(Adam, StepCounterIncrementsByOne) {
  ParameterSet ps;
  ps.add("p", Tensor::matrix(1, 1, {0.5}));
  AdamState st;
  for (int i = 1; i <= 3; ++i) {
    Tape tape;
    tape.backward(sum(square(tape.param(ps, "p"))));
    adam_step(ps, st);
    EXPECT_EQ(st.step, static_cast<std::uint64_t>(i));
  }
}

TEST(Adam, MissingGradientsIsAnError) {
  ParameterSet ps;
  ps.add("p", Tensor::matrix(1, 1, {0.5}));
  AdamState st;
  EXPECT_THROW(adam_step(ps, st), k2v::StateError);
}
