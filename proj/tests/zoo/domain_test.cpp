#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "k2v/error.hpp"
#include "k2v/zoo/domain.hpp"

namespace k2v::zoo {
namespace {

TEST(Domain, CountsFollowSplitSizes) {
  SyntheticDomainSpec spec = make_domain_spec(1, 0, 4, 32, 0.15, SplitSizes{});
  DomainData data = generate_domain(spec);
  EXPECT_EQ(data.train.size(), 200u);
  EXPECT_EQ(data.train.samples.rows(), 200u);
  EXPECT_EQ(data.train.samples.cols(), 32u);
  EXPECT_EQ(data.validation.size(), 120u);
  EXPECT_EQ(data.query.size(), 160u);
  EXPECT_EQ(data.train.rows_of(2).size(), 50u);
}

TEST(Domain, SameSeedSameData) {
  SyntheticDomainSpec spec = make_domain_spec(9, 3, 5, 32, 0.15, SplitSizes{});
  DomainData a = generate_domain(spec);
  DomainData b = generate_domain(spec);
  EXPECT_EQ(a.train.samples, b.train.samples);
  EXPECT_EQ(a.test.samples, b.test.samples);
  EXPECT_EQ(a.train.labels, b.train.labels);
}

TEST(Domain, SplitsAreDistinctStreams) {
  DomainData d = generate_domain(make_domain_spec(9, 3, 3, 32, 0.15, SplitSizes{}));
  EXPECT_NE(d.train.samples.row_span(0)[0], d.query.samples.row_span(0)[0]);
  EXPECT_NE(d.query.samples.row_span(0)[0], d.test.samples.row_span(0)[0]);
}

TEST(Domain, RegionsDoNotOverlap) {
  for (std::size_t i = 0; i < 8; ++i) {
    SyntheticDomainSpec s = make_domain_spec(4, i, 6, 32, 0.15, SplitSizes{});
    for (std::size_t c = 0; c < s.category_count; ++c) {
      for (std::size_t bit = 0; bit < kRegionBits; ++bit) {
        const double v = s.centers(c, bit);
        EXPECT_GE(std::abs(v), 0.4);
        EXPECT_EQ(v < 0, ((i >> bit) & 1) != 0);
      }
    }
  }
}

TEST(Domain, RejectsBadSpecs) {
  EXPECT_THROW(make_domain_spec(1, 0, 1, 32, 0.15, SplitSizes{}), InvalidArgument);
  EXPECT_THROW(make_domain_spec(1, 0, 3, 32, 0.0, SplitSizes{}), InvalidArgument);
  EXPECT_THROW(make_domain_spec(1, 0, 3, 32, -1.0, SplitSizes{}), InvalidArgument);
  SyntheticDomainSpec dup = make_domain_spec(1, 0, 3, 32, 0.15, SplitSizes{});
  for (std::size_t j = 0; j < 32; ++j) dup.centers(1, j) = dup.centers(0, j);
  EXPECT_THROW(dup.validate(), InvalidArgument);
}

TEST(Domain, JsonRoundTripKeepsDigest) {
  SyntheticDomainSpec spec = make_domain_spec(5, 2, 4, 32, 0.15, SplitSizes{});
  SyntheticDomainSpec back = domain_spec_from_json(to_json(spec));
  EXPECT_EQ(back.digest(), spec.digest());
  EXPECT_EQ(back.centers, spec.centers);
}

TEST(Domain, SampleTaskIsBalanced) {
  DomainData d = generate_domain(make_domain_spec(5, 2, 6, 32, 0.15, SplitSizes{}));
  Rng rng(3);
  QueryTask t = sample_task(d.query, 4, 5, rng, "t");
  EXPECT_EQ(t.category_count, 4u);
  EXPECT_EQ(t.size(), 20u);
  EXPECT_EQ(t.per_category(), 5u);
  EXPECT_THROW(sample_task(d.query, 7, 5, rng, "t"), InvalidArgument);
}

}  // namespace
}  // namespace k2v::zoo
