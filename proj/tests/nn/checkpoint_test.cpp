#include "k2v/nn/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "k2v/error.hpp"
#include "k2v/nn/layers.hpp"

using namespace k2v::nn;

TEST(Checkpoint, RoundTripIsBitwise) {
  ParameterSet ps(5);
  add_bilstm(ps, "cell", 3, 4);
  add_dense(ps, "fc", 8, 2);
  const auto path = std::filesystem::temp_directory_path() / "k2v_ckpt_test.k2v";
  save_parameters(path, ps);
  ParameterSet back = load_parameters(path);
  EXPECT_TRUE(ps.same_values(back));
  std::filesystem::remove(path);
}

TEST(Checkpoint, LayoutStartsWithMagicAndLittleEndianFields) {
  const std::string bytes = encode_k2v1({{"ab", Tensor::matrix(1, 1, {1.0})}});
  ASSERT_EQ(bytes.substr(0, 4), "K2V1");
  // u32 name length = 2, "ab", u32 rank = 2, two u64 dims, one f64.
  EXPECT_EQ(bytes.size(), 4u + 4 + 2 + 4 + 16 + 8);
  EXPECT_EQ(bytes[4], 2);
  EXPECT_EQ(bytes.substr(8, 2), "ab");
  // 1.0 = 0x3ff0000000000000, stored least significant byte first.
  EXPECT_EQ(static_cast<unsigned char>(bytes.back()), 0x3f);
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  EXPECT_THROW(decode_k2v1("XXXX"), k2v::FormatError);
  std::string bytes = encode_k2v1({{"w", Tensor::matrix(2, 2, {1, 2, 3, 4})}});
  bytes.pop_back();
  EXPECT_THROW(decode_k2v1(bytes), k2v::FormatError);
  EXPECT_TRUE(decode_k2v1("K2V1").empty());
}
