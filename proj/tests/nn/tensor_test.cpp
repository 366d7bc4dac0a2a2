#include "k2v/nn/tensor.hpp"

#include <gtest/gtest.h>

#include <limits>

#include "k2v/error.hpp"

using k2v::nn::Tensor;

TEST(Tensor, PayloadMustMatchShape) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), k2v::DimensionError);
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t(1, 2), 6.0);
}

TEST(Tensor, RankOneIsASingleRow) {
  Tensor t({4}, 1.5);
  EXPECT_EQ(t.rows(), 1u);
  EXPECT_EQ(t.cols(), 4u);
}

TEST(Tensor, FinitenessCheck) {
  Tensor t = Tensor::identity(3);
  EXPECT_TRUE(t.all_finite());
  t(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(k2v::nn::require_finite(t, "t"), k2v::NonFiniteError);
}
