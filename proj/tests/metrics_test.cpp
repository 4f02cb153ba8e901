#include "asys/metrics.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

namespace {

using asys::ScoredBatch;

// Exhaustive positive/negative pair counting, the textbook definition.
std::optional<double> pairwise_auc(const ScoredBatch& batch) {
  double wins = 0.0;
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < batch.scores.size(); ++i) {
    if (batch.labels[i] != 1) continue;
    ++pos;
    for (std::size_t j = 0; j < batch.scores.size(); ++j) {
      if (batch.labels[j] != 0) continue;
      if (batch.scores[i] > batch.scores[j]) wins += 1.0;
      else if (batch.scores[i] == batch.scores[j]) wins += 0.5;
    }
  }
  neg = batch.scores.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

TEST(Auc, PerfectRanking) {
  EXPECT_EQ(asys::auc({{0.1, 0.9}, {0, 1}}), std::optional<double>(1.0));
  EXPECT_EQ(asys::auc({{0.9, 0.1}, {0, 1}}), std::optional<double>(0.0));
}

TEST(Auc, AllScoresTiedIsHalf) {
  const auto value = asys::auc({{0.4, 0.4, 0.4, 0.4}, {0, 1, 0, 1}});
  ASSERT_TRUE(value.has_value());
  EXPECT_DOUBLE_EQ(*value, 0.5);
}

TEST(Auc, PartialTieCountsHalf) {
  // Pairs: (0.5+, 0.5-) ties -> 0.5; (0.8+, 0.5-) wins -> 1. AUC = 1.5 / 2.
  const auto value = asys::auc({{0.5, 0.5, 0.8}, {0, 1, 1}});
  ASSERT_TRUE(value.has_value());
  EXPECT_DOUBLE_EQ(*value, 0.75);
}

TEST(Auc, SingleClassIsUndefined) {
  EXPECT_FALSE(asys::auc({{0.2, 0.8}, {1, 1}}).has_value());
  EXPECT_FALSE(asys::auc({{0.2, 0.8}, {0, 0}}).has_value());
}

TEST(Auc, RejectsMalformedBatches) {
  EXPECT_THROW(asys::auc({{}, {}}), std::invalid_argument);
  EXPECT_THROW(asys::auc({{0.5}, {0, 1}}), std::invalid_argument);
  EXPECT_THROW(asys::auc({{1.5}, {1}}), std::invalid_argument);
  EXPECT_THROW(asys::auc({{-0.1}, {0}}), std::invalid_argument);
  EXPECT_THROW(asys::auc({{0.5}, {2}}), std::invalid_argument);
}

TEST(Auc, MatchesPairwiseOracleWithTies) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size_dist(2, 12);
  std::uniform_int_distribution<int> level_dist(0, 4);
  std::uniform_int_distribution<int> label_dist(0, 1);
  const double levels[] = {0.1, 0.25, 0.5, 0.75, 0.9};

  for (int trial = 0; trial < 500; ++trial) {
    ScoredBatch batch;
    const int n = size_dist(rng);
    for (int i = 0; i < n; ++i) {
      batch.scores.push_back(levels[level_dist(rng)]);
      batch.labels.push_back(label_dist(rng));
    }
    const auto fast = asys::auc(batch);
    const auto slow = pairwise_auc(batch);
    ASSERT_EQ(fast.has_value(), slow.has_value());
    if (fast) EXPECT_EQ(*fast, *slow);  // same dyadic rationals, bit-exact
  }
}

TEST(Logloss, KnownValues) {
  EXPECT_DOUBLE_EQ(asys::logloss({{0.5}, {1}}), std::log(2.0));
  EXPECT_DOUBLE_EQ(asys::logloss({{0.5}, {0}}), std::log(2.0));
  EXPECT_DOUBLE_EQ(asys::logloss({{0.8, 0.4}, {1, 0}}),
                   0.5 * (-std::log(0.8) - std::log(0.6)));
}

TEST(Logloss, ClipsExtremeScores) {
  EXPECT_DOUBLE_EQ(asys::logloss({{0.0}, {1}}), -std::log(1e-7));
  // For label 0 the clipped score is 1 - eps, so the loss term is
  // -log(1 - (1 - eps)), which differs from -log(eps) in the last bits.
  EXPECT_DOUBLE_EQ(asys::logloss({{1.0}, {0}}), -std::log(1.0 - (1.0 - 1e-7)));
  EXPECT_LT(asys::logloss({{1.0}, {1}}), 1.1e-7);
}

TEST(WindowedAuc, PoolsChunksPerWindow) {
  std::vector<std::pair<std::size_t, ScoredBatch>> records;
  records.push_back({0, {{0.1, 0.9}, {0, 1}}});
  records.push_back({1, {{0.2, 0.7}, {0, 1}}});
  records.push_back({2, {{0.8, 0.3}, {1, 0}}});  // still perfectly ranked
  records.push_back({3, {{0.6, 0.4}, {0, 1}}});  // inverted pair

  const asys::MetricSeries series = asys::windowed_auc(records, 2);
  ASSERT_EQ(series.size(), 2u);
  EXPECT_EQ(series[0].window, 0u);
  EXPECT_DOUBLE_EQ(series[0].value, 1.0);
  EXPECT_EQ(series[0].samples, 4u);
  EXPECT_EQ(series[1].window, 1u);
  ScoredBatch pooled{{0.8, 0.3, 0.6, 0.4}, {1, 0, 0, 1}};
  EXPECT_DOUBLE_EQ(series[1].value, *asys::auc(pooled));
}

TEST(WindowedAuc, DropsSingleClassWindows) {
  std::vector<std::pair<std::size_t, ScoredBatch>> records;
  records.push_back({0, {{0.1, 0.9}, {1, 1}}});
  records.push_back({5, {{0.1, 0.9}, {0, 1}}});
  const asys::MetricSeries series = asys::windowed_auc(records, 5);
  ASSERT_EQ(series.size(), 1u);
  EXPECT_EQ(series[0].window, 1u);
}

TEST(WindowedAuc, RejectsZeroWindowSize) {
  EXPECT_THROW(asys::windowed_auc({}, 0), std::invalid_argument);
}

}  // namespace
