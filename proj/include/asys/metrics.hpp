#pragma once

// Evaluation metrics for scored binary batches: rank-based AUC, clipped
// log-loss, and pooled per-window series over a chunked stream.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace asys {

struct ScoredBatch {
  std::vector<double> scores;  // predicted probabilities, each in [0, 1]
  std::vector<int> labels;     // ground truth, each 0 or 1
};

inline void validate_batch(const ScoredBatch& batch) {
  if (batch.scores.empty())
    throw std::invalid_argument("metrics: empty batch");
  if (batch.scores.size() != batch.labels.size())
    throw std::invalid_argument("metrics: scores/labels size mismatch");
  for (double s : batch.scores)
    if (!(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("metrics: score outside [0, 1]");
  for (int y : batch.labels)
    if (y != 0 && y != 1)
      throw std::invalid_argument("metrics: label not in {0, 1}");
}

// Mann-Whitney AUC with average ranks over tied scores, so a tie between a
// positive and a negative contributes 0.5. Returns nullopt when the batch
// holds a single class, in which case ranking quality is undefined.
inline std::optional<double> auc(const ScoredBatch& batch) {
  validate_batch(batch);
  const std::size_t n = batch.scores.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return batch.scores[a] < batch.scores[b];
  });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && batch.scores[order[j]] == batch.scores[order[i]]) ++j;
    // 1-based ranks i+1 .. j share the group average.
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (batch.labels[order[k]] == 1) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }

  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  const double p = static_cast<double>(positives);
  const double q = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

// Mean binary cross-entropy with scores clipped to [eps, 1 - eps] so that
// confident mistakes stay finite.
inline double logloss(const ScoredBatch& batch, double eps = 1e-7) {
  validate_batch(batch);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.scores.size(); ++i) {
    const double s = std::min(std::max(batch.scores[i], eps), 1.0 - eps);
    total += batch.labels[i] == 1 ? -std::log(s) : -std::log(1.0 - s);
  }
  return total / static_cast<double>(batch.scores.size());
}

struct WindowPoint {
  std::size_t window = 0;  // floor(chunk_index / chunks_per_window)
  double value = 0.0;
  std::size_t samples = 0;
};

using MetricSeries = std::vector<WindowPoint>;

// Pools scored test samples into fixed-size windows of consecutive chunks and
// computes one AUC per window. Windows whose pool is single-class are dropped
// rather than reported as a placeholder value.
inline MetricSeries windowed_auc(const std::vector<std::pair<std::size_t, ScoredBatch>>& chunks,
                                 std::size_t chunks_per_window) {
  if (chunks_per_window == 0)
    throw std::invalid_argument("metrics: chunks_per_window must be positive");

  std::map<std::size_t, ScoredBatch> pools;
  for (const auto& [chunk_index, batch] : chunks) {
    validate_batch(batch);
    ScoredBatch& pool = pools[chunk_index / chunks_per_window];
    pool.scores.insert(pool.scores.end(), batch.scores.begin(), batch.scores.end());
    pool.labels.insert(pool.labels.end(), batch.labels.begin(), batch.labels.end());
  }

  MetricSeries series;
  for (const auto& [window, pool] : pools) {
    const std::optional<double> value = auc(pool);
    if (!value) continue;
    series.push_back({window, *value, pool.scores.size()});
  }
  return series;
}

}  // namespace asys
