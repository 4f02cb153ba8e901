#pragma once

// Adaptive-windowing drift detection over a per-learner history of chunk
// AUCs. A candidate value extends the window, every dyadic cut partitions the
// extended sequence into old/new halves, and the detector flags drift when
// the worst-case mean drop exceeds a Hoeffding-style tolerance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace asys {

struct DetectorConfig {
  int window_len = 12;   // L, number of retained AUC values
  double delta = 0.05;   // confidence level, split evenly across cuts
};

inline void validate_detector_config(const DetectorConfig& config) {
  if (config.window_len < 2)
    throw std::invalid_argument("drift: window_len must be at least 2");
  if (!(config.delta > 0.0 && config.delta < 1.0))
    throw std::invalid_argument("drift: delta must lie in (0, 1)");
}

struct AucWindow {
  DetectorConfig config;
  std::vector<double> values;  // oldest first, at most window_len entries

  bool full() const { return values.size() >= static_cast<std::size_t>(config.window_len); }
};

inline AucWindow make_window(const DetectorConfig& config) {
  validate_detector_config(config);
  return AucWindow{config, {}};
}

// Old-side lengths {L+1 - 2^z > 0}, ascending. The geometric spacing keeps
// the cut set logarithmic in the window length while always including the
// freshest split (old side L, new side 1).
inline std::vector<int> cut_points(int window_len) {
  if (window_len < 2)
    throw std::invalid_argument("drift: window_len must be at least 2");
  std::vector<int> cuts;
  for (long long step = 1; window_len + 1 - step > 0; step *= 2)
    cuts.push_back(static_cast<int>(window_len + 1 - step));
  std::reverse(cuts.begin(), cuts.end());
  return cuts;
}

namespace detail {

inline void validate_cut(const std::vector<double>& extended, int cut) {
  if (extended.size() < 2)
    throw std::invalid_argument("drift: extended window needs at least 2 values");
  if (cut < 1 || static_cast<std::size_t>(cut) >= extended.size())
    throw std::invalid_argument("drift: cut must split the extended window");
}

}  // namespace detail

// Mean of the new side minus mean of the old side, so sustained degradation
// shows up as a negative value.
inline double epsilon_partition(const std::vector<double>& extended, int cut) {
  detail::validate_cut(extended, cut);
  const std::size_t total = extended.size();
  double old_sum = 0.0, new_sum = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(cut); ++i) old_sum += extended[i];
  for (std::size_t i = static_cast<std::size_t>(cut); i < total; ++i) new_sum += extended[i];
  const double old_mean = old_sum / static_cast<double>(cut);
  const double new_mean = new_sum / static_cast<double>(total - cut);
  return new_mean - old_mean;
}

// Tolerance for the cut's partition gap: -R * sqrt(ln(2/delta') / (2 n0))
// with n0 the harmonic pair size 2ab/(a+b), R the observed value range and
// delta' the per-cut share delta/(L+1).
inline double epsilon_cut(const std::vector<double>& extended, int cut, double delta) {
  detail::validate_cut(extended, cut);
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("drift: delta must lie in (0, 1)");

  double lo = extended.front(), hi = extended.front();
  for (double v : extended) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;

  const double a = static_cast<double>(cut);
  const double b = static_cast<double>(extended.size() - static_cast<std::size_t>(cut));
  const double n0 = 2.0 * a * b / (a + b);
  const double delta_cut = delta / static_cast<double>(extended.size());
  return -range * std::sqrt(std::log(2.0 / delta_cut) / (2.0 * n0));
}

struct DriftVerdict {
  double epsilon = std::numeric_limits<double>::infinity();
  bool drifted = false;
  int cut = 0;           // old-side length attaining the minimum, 0 in warm-up
  bool warm_up = false;  // window not yet full, no verdict possible
};

// Tests a candidate AUC against the current window. The statistic is the
// minimum over cuts of (partition gap - tolerance); drift requires it to be
// strictly negative, so a gap exactly at the tolerance does not trigger.
inline DriftVerdict evaluate(const AucWindow& window, double new_auc) {
  validate_detector_config(window.config);
  if (!(new_auc >= 0.0 && new_auc <= 1.0))
    throw std::invalid_argument("drift: auc outside [0, 1]");
  if (!window.full())
    return DriftVerdict{std::numeric_limits<double>::infinity(), false, 0, true};

  std::vector<double> extended = window.values;
  extended.push_back(new_auc);

  DriftVerdict verdict;
  verdict.warm_up = false;
  bool first = true;
  for (int cut : cut_points(window.config.window_len)) {
    const double margin = epsilon_partition(extended, cut) - epsilon_cut(extended, cut, window.config.delta);
    if (first || margin < verdict.epsilon) {
      verdict.epsilon = margin;
      verdict.cut = cut;
      first = false;
    }
  }
  verdict.drifted = verdict.epsilon < 0.0;
  return verdict;
}

// Applies the post-verdict window update. A sliding commit appends the value
// (evicting the oldest once full); a frozen commit leaves the window alone so
// the history still describes the regime the learner was trained on.
inline void commit(AucWindow& window, double new_auc, bool slide) {
  validate_detector_config(window.config);
  if (!(new_auc >= 0.0 && new_auc <= 1.0))
    throw std::invalid_argument("drift: auc outside [0, 1]");
  if (!slide) return;
  if (window.full()) window.values.erase(window.values.begin());
  window.values.push_back(new_auc);
}

}  // namespace asys
