#pragma once

// The drift-aware ensemble controller. Per chunk it scores every learner on
// the incoming train split, asks each learner's detector whether that score
// broke from its history, freezes the learners that drifted (always keeping
// at least one trainable), renormalizes the aggregation weights over the
// survivors and runs one masked optimizer step. Inference always aggregates
// all learners, unmasked.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "asys/drift.hpp"
#include "asys/metrics.hpp"
#include "asys/model.hpp"
#include "asys/streams.hpp"

namespace asys {

enum class Strategy { IncCtr, MoE, AdaMoE };

inline Strategy parse_strategy(const std::string& name) {
  if (name == "incctr") return Strategy::IncCtr;
  if (name == "moe") return Strategy::MoE;
  if (name == "adamoe") return Strategy::AdaMoE;
  throw std::invalid_argument("ensemble: unknown strategy: " + name);
}

inline const char* strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::IncCtr: return "incctr";
    case Strategy::MoE: return "moe";
    case Strategy::AdaMoE: return "adamoe";
  }
  throw std::invalid_argument("ensemble: unknown strategy value");
}

inline bool uses_gate(Strategy strategy) { return strategy != Strategy::IncCtr; }

struct EnsembleConfig {
  ModelConfig model;
  Strategy strategy = Strategy::IncCtr;
  DetectorConfig detector;
  bool asys_enabled = true;
};

struct EnsembleState {
  EnsembleConfig config;
  ModelParams params;
  ModelAdam adam;
  std::vector<AucWindow> windows;  // one per learner
};

inline EnsembleState make_ensemble(const EnsembleConfig& config, std::uint64_t model_seed) {
  validate_model_config(config.model);
  validate_detector_config(config.detector);
  EnsembleState state;
  state.config = config;
  state.params = init_model(config.model, model_seed);
  state.adam = make_adam(state.params);
  state.windows.assign(static_cast<std::size_t>(config.model.num_learners),
                       make_window(config.detector));
  return state;
}

// Convex aggregation of learner scores with explicit weight validation.
inline std::vector<double> aggregate_infer(const std::vector<double>& pctr, std::size_t n,
                                           const std::vector<double>& weights) {
  if (weights.empty() || pctr.size() != n * weights.size())
    throw std::invalid_argument("ensemble: pctr matrix does not match weights");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("ensemble: negative aggregation weight");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("ensemble: aggregation weights must sum to 1");

  const std::size_t m = weights.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < m; ++k) out[i] += weights[k] * pctr[i * m + k];
  return out;
}

// Zeroes masked entries and rescales the survivors to sum to 1.
inline std::vector<double> normalize_masked_weights(const std::vector<double>& weights,
                                                    const std::vector<std::uint8_t>& indicator) {
  if (weights.size() != indicator.size() || weights.empty())
    throw std::invalid_argument("ensemble: weight/indicator size mismatch");
  double survivor_sum = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k] > 0.0)) throw std::invalid_argument("ensemble: weights must be strictly positive");
    if (indicator[k]) {
      survivor_sum += weights[k];
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("ensemble: indicator has no true entry");

  std::vector<double> out(weights.size(), 0.0);
  for (std::size_t k = 0; k < weights.size(); ++k)
    if (indicator[k]) out[k] = weights[k] / survivor_sum;
  return out;
}

// Chunk-level aggregation weights: uniform for plain averaging, mean softmax
// row for the gated strategies.
inline std::vector<double> compute_weights(Strategy strategy, const ForwardCache& cache,
                                           std::size_t m) {
  if (!uses_gate(strategy))
    return std::vector<double>(m, 1.0 / static_cast<double>(m));
  if (cache.gate_prob.empty())
    throw std::invalid_argument("ensemble: strategy needs gate outputs");
  return gate_chunk_weights(cache, m);
}

// The two freeze cases. If anything survived its detector, exactly the
// non-drifted learners train; if every learner drifted, the one with the
// largest statistic (least bad fit, lowest index on ties) trains alone so
// adaptation never stalls.
inline std::vector<std::uint8_t> resolve_indicators(const std::vector<DriftVerdict>& verdicts) {
  if (verdicts.empty()) throw std::invalid_argument("ensemble: no verdicts");
  std::vector<std::uint8_t> indicator(verdicts.size(), 0);
  bool any_survivor = false;
  for (std::size_t k = 0; k < verdicts.size(); ++k) {
    indicator[k] = verdicts[k].drifted ? 0 : 1;
    any_survivor = any_survivor || indicator[k] != 0;
  }
  if (any_survivor) return indicator;

  std::size_t best = 0;
  for (std::size_t k = 1; k < verdicts.size(); ++k)
    if (verdicts[k].epsilon > verdicts[best].epsilon) best = k;
  indicator[best] = 1;
  return indicator;
}

struct StepTrace {
  std::size_t chunk_index = 0;
  std::vector<std::optional<double>> auc;      // per learner, on the train split pre-update
  std::vector<std::optional<double>> epsilon;  // detection statistic; absent in warm-up,
                                               // on undefined AUC, and in baseline mode
  std::vector<std::uint8_t> indicator;
  std::vector<double> weights;                 // unmasked chunk weights w_t
  double train_loss = 0.0;
  std::vector<double> test_scores;             // filled by the harness after infer_step
  std::vector<int> test_labels;
};

namespace detail {

inline void flatten_chunk(const Chunk& chunk, int d_in, std::vector<double>& x,
                          std::vector<int>& y) {
  if (chunk.samples.empty()) throw std::invalid_argument("ensemble: empty chunk");
  x.clear();
  y.clear();
  x.reserve(chunk.samples.size() * static_cast<std::size_t>(d_in));
  y.reserve(chunk.samples.size());
  for (const Sample& sample : chunk.samples) {
    if (sample.features.size() != static_cast<std::size_t>(d_in))
      throw std::invalid_argument("ensemble: sample dimension does not match model d_in");
    x.insert(x.end(), sample.features.begin(), sample.features.end());
    y.push_back(sample.label);
  }
}

}  // namespace detail

// One training step over a chunk's train split. Order matters and is fixed:
// forward, per-learner AUC, detector evaluation, indicator resolution, window
// commits, masked aggregation, backward, optimizer. Baseline mode keeps every
// indicator true and leaves the detectors untouched but runs the exact same
// arithmetic everywhere else.
inline StepTrace train_step(EnsembleState& state, const Chunk& train_part) {
  const std::size_t m = state.params.learners.size();
  const Strategy strategy = state.config.strategy;

  std::vector<double> x;
  std::vector<int> y;
  detail::flatten_chunk(train_part, state.config.model.d_in, x, y);
  const std::size_t n = train_part.samples.size();

  const ForwardCache cache = forward(state.params, x, n, uses_gate(strategy));
  const std::vector<double> weights = compute_weights(strategy, cache, m);

  StepTrace trace;
  trace.chunk_index = train_part.index;
  trace.weights = weights;
  trace.auc.resize(m);
  trace.epsilon.assign(m, std::nullopt);

  ScoredBatch learner_batch;
  learner_batch.labels = y;
  learner_batch.scores.resize(n);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < n; ++i) learner_batch.scores[i] = cache.pctr[i * m + k];
    trace.auc[k] = auc(learner_batch);
  }

  std::vector<std::uint8_t> indicator;
  if (state.config.asys_enabled) {
    std::vector<DriftVerdict> verdicts(m);
    for (std::size_t k = 0; k < m; ++k) {
      if (trace.auc[k]) {
        verdicts[k] = evaluate(state.windows[k], *trace.auc[k]);
        if (!verdicts[k].warm_up) trace.epsilon[k] = verdicts[k].epsilon;
      } else {
        // A single-class split carries no drift evidence: train, keep history.
        verdicts[k] = DriftVerdict{std::numeric_limits<double>::infinity(), false, 0, false};
      }
    }
    indicator = resolve_indicators(verdicts);
    for (std::size_t k = 0; k < m; ++k)
      if (indicator[k] && trace.auc[k]) commit(state.windows[k], *trace.auc[k], true);
  } else {
    indicator.assign(m, 1);
  }
  trace.indicator = indicator;

  const std::vector<double> coeffs = normalize_masked_weights(weights, indicator);
  const bool gate_in_graph = strategy == Strategy::MoE;
  const BackwardResult result = backward_train(state.params, cache, y, coeffs, indicator, gate_in_graph);
  trace.train_loss = result.loss;
  apply_updates(state.params, state.adam, result.grads, indicator, true, gate_in_graph);

  if (strategy == Strategy::AdaMoE) {
    // Decoupled gate half-step against the unmasked aggregation, computed on
    // the cached pre-update forward.
    const BackwardResult gate_result = backward_gate_only(state.params, cache, y);
    const std::vector<std::uint8_t> none(m, 0);
    apply_updates(state.params, state.adam, gate_result.grads, none, false, true);
  }
  return trace;
}

// Scores a chunk with the current parameters; all learners participate.
inline std::vector<double> infer_step(const EnsembleState& state, const Chunk& test_part) {
  const std::size_t m = state.params.learners.size();
  std::vector<double> x;
  std::vector<int> y;
  detail::flatten_chunk(test_part, state.config.model.d_in, x, y);
  const ForwardCache cache = forward(state.params, x, test_part.samples.size(), uses_gate(state.config.strategy));
  const std::vector<double> weights = compute_weights(state.config.strategy, cache, m);
  return aggregate_infer(cache.pctr, test_part.samples.size(), weights);
}

}  // namespace asys
