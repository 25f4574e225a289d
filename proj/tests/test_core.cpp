#include <gtest/gtest.h>

#include <random>

#include "fdrl/core.hpp"
#include "fdrl/error.hpp"

using namespace fdrl;

TEST(Partition, ComplementOfSinglePad) {
  const auto p = make_partition(4, {0});
  EXPECT_EQ(p.non_pad_ids(), (std::vector<TokenId>{1, 2, 3}));
  EXPECT_EQ(p.pad_ids(), (std::vector<TokenId>{0}));
}

TEST(Partition, ComplementOfTwoPads) {
  const auto p = make_partition(8, {0, 7});
  EXPECT_EQ(p.non_pad_ids(), (std::vector<TokenId>{1, 2, 3, 4, 5, 6}));
}

TEST(Partition, RejectsDegenerateAndOutOfRange) {
  EXPECT_THROW(make_partition(4, {0, 1, 2, 3}), DegeneratePartitionError);
  EXPECT_THROW(make_partition(4, {}), DegeneratePartitionError);
  EXPECT_THROW(make_partition(4, {4}), RangeError);
  EXPECT_THROW(make_partition(4, {-1}), RangeError);
}

TEST(ExtractStates, IndicatorOfNonPad) {
  const auto p = make_partition(8, {0});
  EXPECT_EQ(extract_states(std::vector<TokenId>{5, 0, 0, 7}, p), (StateSequence{1, 0, 0, 1}));
  EXPECT_EQ(extract_states(std::vector<TokenId>{0, 0, 0}, p), (StateSequence{0, 0, 0}));
  EXPECT_EQ(extract_states(std::vector<TokenId>{1, 2, 0, 3, 0}, p), (StateSequence{1, 1, 0, 1, 0}));
  EXPECT_THROW(extract_states(std::vector<TokenId>{8}, p), RangeError);
}

TEST(Intervals, ConstructionRejectsEmptyOrReversed) {
  EXPECT_THROW(TimeInterval(1.0, 1.0), InvalidIntervalError);
  EXPECT_THROW(TimeInterval(2.0, 1.0), InvalidIntervalError);
}

TEST(Intervals, Normalize) {
  EXPECT_EQ(make_interval_set({{0, 1}, {2, 3}}), make_interval_set({{0, 1}, {2, 3}}));
  EXPECT_EQ(make_interval_set({{0, 2}, {1, 3}}).intervals(), (std::vector<TimeInterval>{{0, 3}}));
  EXPECT_EQ(make_interval_set({{0, 1}, {1, 2}}).intervals(), (std::vector<TimeInterval>{{0, 2}}));
  EXPECT_EQ(make_interval_set({{2, 3}, {0, 1}})[0].start(), 0.0);
}

TEST(Intervals, NormalizePreservesUnionMeasure) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TimeInterval> raw;
    std::vector<char> grid(200, 0);
    for (int k = 0; k < 6; ++k) {
      const int a = static_cast<int>(rng() % 190);
      const int b = a + 1 + static_cast<int>(rng() % 10);
      raw.emplace_back(a, b);
      for (int i = a; i < b; ++i) grid[static_cast<std::size_t>(i)] = 1;
    }
    const auto set = normalize_intervals(raw);
    double covered = 0;
    for (char c : grid) covered += c;
    EXPECT_DOUBLE_EQ(set.measure(), covered);
    for (std::size_t i = 1; i < set.size(); ++i) EXPECT_LT(set[i - 1].end(), set[i].start());
  }
}

TEST(Intervals, IntersectDuration) {
  const auto set = make_interval_set({{0, 1}, {2, 3}});
  EXPECT_DOUBLE_EQ(intersect_duration(TimeInterval(0.5, 2.5), set), 1.0);
  EXPECT_DOUBLE_EQ(intersect_duration(TimeInterval(3, 4), set), 0.0);
  EXPECT_DOUBLE_EQ(intersect_duration(TimeInterval(1, 2), set), 0.0);
  EXPECT_DOUBLE_EQ(intersect_duration(TimeInterval(-1, 5), set), 2.0);
}

TEST(Intervals, MergeShortGaps) {
  const auto set = make_interval_set({{0, 1}, {1.5, 2}, {4, 5}});
  EXPECT_EQ(set.merge_gaps_shorter_than(1.0).intervals(), (std::vector<TimeInterval>{{0, 2}, {4, 5}}));
  // Strictly shorter: a gap of exactly 2.0 stays.
  EXPECT_EQ(set.merge_gaps_shorter_than(2.0).size(), 2u);
}
