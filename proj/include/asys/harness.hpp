#pragma once

// Experiment runner: builds a stream and an ensemble from a flat config,
// executes the per-chunk split/train/score loop, pools test scores into the
// overall and windowed AUC, and persists report.json / trace.ndjson / tsv
// series. Also hosts the run comparison and the estimation-bound sweep
// backing the CLI subcommands.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "asys/checkpoint.hpp"
#include "asys/config.hpp"
#include "asys/ensemble.hpp"
#include "asys/estimation_bound.hpp"
#include "asys/metrics.hpp"
#include "asys/streams.hpp"

namespace asys {

struct ExperimentConfig {
  ConfigMap raw;  // echoed into the report verbatim

  bool synthetic = true;
  StreamSpec stream;       // when synthetic
  std::string csv_path;    // when csv
  CsvSchema csv_schema;

  EnsembleConfig ensemble;
  double train_fraction = 0.8;
  std::size_t chunks_per_window = 5;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::string save_checkpoint_path;
};

namespace detail {

inline ConceptSpec parse_concept(const ConfigMap& raw, std::size_t index, std::size_t dim) {
  const std::string base = "concept" + std::to_string(index) + ".";
  ConceptSpec cs;
  cs.mean = has_key(raw, base + "mean") ? get_double_list(raw, base + "mean")
                                             : std::vector<double>(dim, 0.0);
  cs.stddev = has_key(raw, base + "stddev") ? get_double_list(raw, base + "stddev")
                                                 : std::vector<double>(dim, 1.0);
  cs.theta = get_double_list(raw, base + "theta");
  cs.bias = get_double(raw, base + "bias", 0.0);
  cs.label_noise = get_double(raw, base + "label_noise", 0.0);
  if (cs.mean.size() != dim || cs.stddev.size() != dim || cs.theta.size() != dim)
    throw std::runtime_error("config: " + base + "* vectors must have synthetic.dim entries");
  validate_concept(cs);
  return cs;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const ConfigMap& raw) {
  ExperimentConfig config;
  config.raw = raw;

  const std::string source = get_string(raw, "stream.source", "synthetic");
  std::size_t d_in = 0;
  if (source == "synthetic") {
    config.synthetic = true;
    const std::size_t dim = static_cast<std::size_t>(get_int(raw, "synthetic.dim", 0));
    if (dim == 0) throw std::runtime_error("config: synthetic.dim is required");
    const std::size_t concepts = static_cast<std::size_t>(get_int(raw, "synthetic.concepts", 1));
    for (std::size_t i = 0; i < concepts; ++i) {
      const std::size_t duration = static_cast<std::size_t>(
          get_int(raw, "concept" + std::to_string(i) + ".duration", 1));
      config.stream.schedule.emplace_back(detail::parse_concept(raw, i, dim), duration);
    }
    config.stream.cycle = get_bool(raw, "synthetic.cycle", false);
    config.stream.chunk_size = static_cast<std::size_t>(get_int(raw, "synthetic.chunk_size", 2048));
    config.stream.total_chunks = static_cast<std::size_t>(get_int(raw, "synthetic.total_chunks", 0));
    d_in = dim;
  } else if (source == "csv") {
    config.synthetic = false;
    config.csv_path = require_string(raw, "data.path");
    config.csv_schema.label_col = require_string(raw, "data.label_col");
    config.csv_schema.feature_cols = get_string_list(raw, "data.feature_cols");
    config.csv_schema.hash_dim = static_cast<std::size_t>(get_int(raw, "data.hash_dim", 64));
    config.csv_schema.chunk_size = static_cast<std::size_t>(get_int(raw, "data.chunk_size", 2048));
    validate_csv_schema(config.csv_schema);
    d_in = config.csv_schema.hash_dim;
  } else {
    throw std::runtime_error("config: stream.source must be synthetic or csv");
  }

  config.ensemble.model.d_in = static_cast<int>(d_in);
  config.ensemble.model.d_emb = static_cast<int>(get_int(raw, "model.d_emb", 32));
  config.ensemble.model.hidden =
      has_key(raw, "model.hidden") ? get_int_list(raw, "model.hidden") : std::vector<int>{32, 16};
  config.ensemble.model.num_learners = static_cast<int>(get_int(raw, "ensemble.num_learners", 0));
  config.ensemble.model.adam.lr = get_double(raw, "model.lr", 1e-3);
  config.ensemble.model.adam.beta1 = get_double(raw, "model.beta1", 0.9);
  config.ensemble.model.adam.beta2 = get_double(raw, "model.beta2", 0.999);
  config.ensemble.model.adam.eps = get_double(raw, "model.eps", 1e-8);
  config.ensemble.strategy = parse_strategy(get_string(raw, "ensemble.strategy", "incctr"));
  config.ensemble.detector.window_len = static_cast<int>(get_int(raw, "drift.window_len", 12));
  config.ensemble.detector.delta = get_double(raw, "drift.delta", 0.05);
  config.ensemble.asys_enabled = get_bool(raw, "asys.enabled", true);

  config.train_fraction = get_double(raw, "run.train_fraction", 0.8);
  config.chunks_per_window = static_cast<std::size_t>(get_int(raw, "run.chunks_per_window", 5));
  if (config.chunks_per_window == 0)
    throw std::runtime_error("config: run.chunks_per_window must be positive");
  config.seed = get_uint64(raw, "run.seed", 1);
  config.out_dir = get_string(raw, "run.out", "");
  config.save_checkpoint_path = get_string(raw, "run.save_checkpoint", "");

  validate_model_config(config.ensemble.model);
  validate_detector_config(config.ensemble.detector);
  if (config.synthetic) {
    config.stream.seed = config.seed;
    validate_stream_spec(config.stream);
  }
  return config;
}

struct RunReport {
  std::optional<double> overall_auc;
  MetricSeries windowed;
  std::vector<StepTrace> traces;
  double wall_ms = 0.0;
  ConfigMap config_echo;
  std::vector<std::size_t> concept_boundaries;
  std::size_t chunks_per_window = 0;
  std::size_t rejected_rows = 0;
};

// Keeps the model seed decorrelated from the stream seed while staying a pure
// function of the run seed.
inline std::uint64_t model_seed_of(std::uint64_t run_seed) {
  return run_seed ^ 0x9E3779B97F4A7C15ULL;
}

inline RunReport run_experiment(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<Chunk> csv_chunks;
  std::optional<SyntheticStream> synth;
  std::size_t total = 0;
  RunReport report;
  if (config.synthetic) {
    synth.emplace(config.stream);
    total = config.stream.total_chunks;
    report.concept_boundaries = concept_boundaries(config.stream);
  } else {
    CsvResult ingested = ingest_csv(config.csv_path, config.csv_schema);
    csv_chunks = std::move(ingested.chunks);
    report.rejected_rows = ingested.rejected_rows;
    total = csv_chunks.size();
  }

  EnsembleState state = make_ensemble(config.ensemble, model_seed_of(config.seed));

  ScoredBatch pooled;
  std::vector<std::pair<std::size_t, ScoredBatch>> window_records;
  for (std::size_t t = 0; t < total; ++t) {
    const Chunk chunk = config.synthetic ? synth->next() : std::move(csv_chunks[t]);
    try {
      auto [train_part, test_part] = split_chunk(chunk, config.train_fraction);
      StepTrace trace = train_step(state, train_part);
      trace.test_scores = infer_step(state, test_part);
      trace.test_labels.reserve(test_part.samples.size());
      for (const Sample& sample : test_part.samples) trace.test_labels.push_back(sample.label);

      ScoredBatch batch{trace.test_scores, trace.test_labels};
      pooled.scores.insert(pooled.scores.end(), batch.scores.begin(), batch.scores.end());
      pooled.labels.insert(pooled.labels.end(), batch.labels.begin(), batch.labels.end());
      window_records.emplace_back(chunk.index, std::move(batch));
      report.traces.push_back(std::move(trace));
    } catch (const std::exception& e) {
      throw std::runtime_error("chunk " + std::to_string(chunk.index) + ": " + e.what());
    }
  }

  if (!pooled.scores.empty()) report.overall_auc = auc(pooled);
  report.windowed = windowed_auc(window_records, config.chunks_per_window);
  report.config_echo = config.raw;
  report.chunks_per_window = config.chunks_per_window;
  report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  if (!config.save_checkpoint_path.empty()) save_checkpoint(config.save_checkpoint_path, state.params);
  return report;
}

inline RunReport run_experiment(const ConfigMap& raw) {
  return run_experiment(parse_experiment_config(raw));
}

// --- serialization ---------------------------------------------------------

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json trace_to_json(const StepTrace& trace) {
  nlohmann::json j;
  j["chunk"] = trace.chunk_index;
  j["auc"] = nlohmann::json::array();
  for (const auto& a : trace.auc) j["auc"].push_back(detail::optional_json(a));
  j["epsilon"] = nlohmann::json::array();
  for (const auto& e : trace.epsilon) j["epsilon"].push_back(detail::optional_json(e));
  j["indicator"] = nlohmann::json::array();
  for (std::uint8_t b : trace.indicator) j["indicator"].push_back(b ? 1 : 0);
  j["w"] = trace.weights;
  j["train_loss"] = trace.train_loss;
  j["test_scores"] = trace.test_scores;
  j["test_labels"] = trace.test_labels;
  return j;
}

inline nlohmann::json report_to_json(const RunReport& report, bool include_wall = true) {
  nlohmann::json j;
  j["overall_auc"] = detail::optional_json(report.overall_auc);
  j["chunks_per_window"] = report.chunks_per_window;
  j["num_chunks"] = report.traces.size();
  j["rejected_rows"] = report.rejected_rows;
  j["concept_boundaries"] = report.concept_boundaries;
  j["config"] = report.config_echo;
  j["windowed"] = nlohmann::json::array();
  for (const WindowPoint& p : report.windowed)
    j["windowed"].push_back({{"window", p.window}, {"auc", p.value}, {"samples", p.samples}});
  if (include_wall) j["wall_ms"] = report.wall_ms;
  return j;
}

inline void write_tsv(const std::string& path, const std::string& header,
                      const std::vector<std::pair<double, double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("harness: cannot write " + path);
  out << header << '\n';
  out.precision(17);
  for (const auto& [a, b] : rows) out << a << '\t' << b << '\n';
}

// Writes report.json, trace.ndjson and the two ready-to-plot series files
// into `dir`, creating it if needed.
inline void write_run_outputs(const std::string& dir, const RunReport& report) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);

  {
    std::ofstream out(base / "report.json");
    if (!out) throw std::runtime_error("harness: cannot write report.json");
    out << report_to_json(report).dump(2) << '\n';
  }
  {
    std::ofstream out(base / "trace.ndjson");
    if (!out) throw std::runtime_error("harness: cannot write trace.ndjson");
    for (const StepTrace& trace : report.traces) out << trace_to_json(trace).dump() << '\n';
  }
  std::vector<std::pair<double, double>> auc_rows;
  for (const WindowPoint& p : report.windowed)
    auc_rows.emplace_back(static_cast<double>(p.window), p.value);
  write_tsv((base / "auc_window.tsv").string(), "window\tauc", auc_rows);

  std::vector<std::pair<double, double>> loss_rows;
  for (const StepTrace& trace : report.traces)
    loss_rows.emplace_back(static_cast<double>(trace.chunk_index), trace.train_loss);
  write_tsv((base / "train_loss.tsv").string(), "chunk\tloss", loss_rows);
}

// --- run comparison --------------------------------------------------------

struct ReportSummary {
  std::string name;
  std::optional<double> overall_auc;
  std::map<std::size_t, double> windowed;  // window index -> AUC
  std::vector<std::size_t> boundaries;
  std::size_t chunks_per_window = 0;
};

inline ReportSummary summarize(const RunReport& report, std::string name) {
  ReportSummary s;
  s.name = std::move(name);
  s.overall_auc = report.overall_auc;
  for (const WindowPoint& p : report.windowed) s.windowed[p.window] = p.value;
  s.boundaries = report.concept_boundaries;
  s.chunks_per_window = report.chunks_per_window;
  return s;
}

inline ReportSummary summarize_json(const nlohmann::json& j, std::string name) {
  ReportSummary s;
  s.name = std::move(name);
  if (j.contains("overall_auc") && !j["overall_auc"].is_null())
    s.overall_auc = j["overall_auc"].get<double>();
  for (const auto& p : j.at("windowed"))
    s.windowed[p.at("window").get<std::size_t>()] = p.at("auc").get<double>();
  for (const auto& b : j.at("concept_boundaries")) s.boundaries.push_back(b.get<std::size_t>());
  s.chunks_per_window = j.at("chunks_per_window").get<std::size_t>();
  return s;
}

// Drop in windowed AUC across a concept boundary: value of the last window
// fully before the boundary minus the value of the window containing it.
// Positive means performance fell at the switch.
inline std::optional<double> mean_boundary_dip(const ReportSummary& s) {
  if (s.chunks_per_window == 0) return std::nullopt;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t b : s.boundaries) {
    const std::size_t w = b / s.chunks_per_window;
    if (w == 0) continue;
    const auto pre = s.windowed.find(w - 1);
    const auto post = s.windowed.find(w);
    if (pre == s.windowed.end() || post == s.windowed.end()) continue;
    sum += pre->second - post->second;
    ++used;
  }
  if (used == 0) return std::nullopt;
  return sum / static_cast<double>(used);
}

// Side-by-side table of overall AUC and post-boundary dips, plus per-window
// AUC deltas of every run against the first.
inline nlohmann::json compare_runs(const std::vector<ReportSummary>& runs) {
  if (runs.size() < 2) throw std::invalid_argument("compare: need at least two reports");
  for (const ReportSummary& r : runs)
    if (r.chunks_per_window != runs.front().chunks_per_window)
      throw std::invalid_argument("compare: reports disagree on chunks_per_window");

  nlohmann::json out;
  out["chunks_per_window"] = runs.front().chunks_per_window;
  out["runs"] = nlohmann::json::array();
  for (const ReportSummary& r : runs) {
    out["runs"].push_back({{"name", r.name},
                           {"overall_auc", detail::optional_json(r.overall_auc)},
                           {"mean_boundary_dip", detail::optional_json(mean_boundary_dip(r))}});
  }

  out["window_deltas"] = nlohmann::json::array();
  const ReportSummary& base = runs.front();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    nlohmann::json deltas = nlohmann::json::array();
    for (const auto& [window, value] : runs[i].windowed) {
      const auto it = base.windowed.find(window);
      if (it == base.windowed.end()) continue;
      deltas.push_back({{"window", window}, {"delta", value - it->second}});
    }
    out["window_deltas"].push_back({{"name", runs[i].name}, {"vs", base.name}, {"deltas", deltas}});
  }
  return out;
}

// --- estimation-bound sweep --------------------------------------------------

// Random (scorer, shifted, reference) triples for the bound diagnostic. All
// draws come from one master generator so the sweep is one seed away from
// reproducible.
inline std::vector<BoundCheck> run_bound_sweep(std::size_t dim, std::size_t configs,
                                               std::size_t draws, std::uint64_t seed) {
  if (dim == 0 || configs == 0) throw std::invalid_argument("bound: dim and configs must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> weight(-1.5, 1.5);
  std::uniform_real_distribution<double> offset(-1.0, 1.0);
  std::uniform_real_distribution<double> scale(0.2, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<BoundCheck> out;
  out.reserve(configs);
  for (std::size_t c = 0; c < configs; ++c) {
    SigmoidLinearScorer scorer;
    scorer.weights.resize(dim);
    for (double& w : scorer.weights) w = weight(rng);
    scorer.bias = offset(rng);

    GaussianSpec shifted, reference;
    shifted.mean.resize(dim);
    shifted.stddev.resize(dim);
    reference.mean.resize(dim);
    reference.stddev.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      shifted.mean[i] = offset(rng);
      shifted.stddev[i] = scale(rng);
      reference.mean[i] = offset(rng);
      reference.stddev[i] = scale(rng);
    }
    const int label = coin(rng) < 0.5 ? 0 : 1;
    out.push_back(check_estimation_bound(scorer, shifted, reference, label, draws, rng()));
  }
  return out;
}

}  // namespace asys
