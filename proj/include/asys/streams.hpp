#pragma once

// Data plane: chunked sample streams. Synthetic streams draw Gaussian
// features with logistic labels under a concept schedule (so covariate and
// labeling drift can be dialed in independently); CSV ingestion hashes
// categorical columns into a fixed-width signed feature vector. Nothing here
// ever shuffles: file order and generation order are the stream order.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace asys {

struct Sample {
  std::vector<double> features;
  int label = 0;
};

struct Chunk {
  std::size_t index = 0;
  std::vector<Sample> samples;
};

struct ConceptSpec {
  std::vector<double> mean;    // feature Gaussian mean
  std::vector<double> stddev;  // per-coordinate scale, > 0
  std::vector<double> theta;   // labeling weights: y ~ Bernoulli(sigmoid(theta.x + bias))
  double bias = 0.0;
  double label_noise = 0.0;    // independent flip probability, < 0.5
};

inline void validate_concept(const ConceptSpec& cs) {
  const std::size_t d = cs.mean.size();
  if (d == 0) throw std::invalid_argument("streams: concept has no features");
  if (cs.stddev.size() != d || cs.theta.size() != d)
    throw std::invalid_argument("streams: concept vector sizes disagree");
  for (double s : cs.stddev)
    if (!(s > 0.0)) throw std::invalid_argument("streams: stddev must be positive");
  if (!(cs.label_noise >= 0.0 && cs.label_noise < 0.5))
    throw std::invalid_argument("streams: label_noise must lie in [0, 0.5)");
}

struct StreamSpec {
  std::vector<std::pair<ConceptSpec, std::size_t>> schedule;  // concept, duration in chunks
  bool cycle = false;
  std::size_t chunk_size = 2048;
  std::size_t total_chunks = 0;
  std::uint64_t seed = 0;
};

inline void validate_stream_spec(const StreamSpec& spec) {
  if (spec.schedule.empty()) throw std::invalid_argument("streams: empty schedule");
  const std::size_t d = spec.schedule.front().first.mean.size();
  std::size_t covered = 0;
  for (const auto& [cs, duration] : spec.schedule) {
    validate_concept(cs);
    if (cs.mean.size() != d)
      throw std::invalid_argument("streams: concepts disagree on feature dimension");
    if (duration < 1) throw std::invalid_argument("streams: duration must be at least 1");
    covered += duration;
  }
  if (spec.chunk_size < 2) throw std::invalid_argument("streams: chunk_size must be at least 2");
  if (spec.total_chunks < 1) throw std::invalid_argument("streams: total_chunks must be at least 1");
  if (!spec.cycle && spec.total_chunks > covered)
    throw std::invalid_argument("streams: schedule too short for total_chunks without cycling");
}

inline std::size_t feature_dim(const StreamSpec& spec) {
  return spec.schedule.front().first.mean.size();
}

// Index into the schedule of the concept active at chunk t.
inline std::size_t concept_index_at(const StreamSpec& spec, std::size_t t) {
  std::size_t period = 0;
  for (const auto& entry : spec.schedule) period += entry.second;
  std::size_t pos = spec.cycle ? t % period : t;
  for (std::size_t i = 0; i < spec.schedule.size(); ++i) {
    if (pos < spec.schedule[i].second) return i;
    pos -= spec.schedule[i].second;
  }
  throw std::invalid_argument("streams: chunk index beyond schedule");
}

// Chunk indices in (0, total_chunks) where the active concept changes.
inline std::vector<std::size_t> concept_boundaries(const StreamSpec& spec) {
  std::vector<std::size_t> out;
  for (std::size_t t = 1; t < spec.total_chunks; ++t)
    if (concept_index_at(spec, t) != concept_index_at(spec, t - 1)) out.push_back(t);
  return out;
}

class SyntheticStream {
 public:
  explicit SyntheticStream(StreamSpec spec) : spec_(std::move(spec)), rng_(spec_.seed) {
    validate_stream_spec(spec_);
  }

  bool done() const { return next_ >= spec_.total_chunks; }
  const StreamSpec& spec() const { return spec_; }

  // Draw order per sample is fixed (features, label uniform, flip uniform) so
  // streams with equal seeds stay aligned even when the noise rate differs.
  Chunk next() {
    if (done()) throw std::runtime_error("streams: stream exhausted");
    const ConceptSpec& cs = spec_.schedule[concept_index_at(spec_, next_)].first;
    const std::size_t d = cs.mean.size();

    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    Chunk chunk;
    chunk.index = next_;
    chunk.samples.resize(spec_.chunk_size);
    for (Sample& sample : chunk.samples) {
      sample.features.resize(d);
      double z = cs.bias;
      for (std::size_t i = 0; i < d; ++i) {
        sample.features[i] = cs.mean[i] + cs.stddev[i] * unit(rng_);
        z += cs.theta[i] * sample.features[i];
      }
      const double p = 1.0 / (1.0 + std::exp(-z));
      sample.label = coin(rng_) < p ? 1 : 0;
      if (coin(rng_) < cs.label_noise) sample.label = 1 - sample.label;
    }
    ++next_;
    return chunk;
  }

 private:
  StreamSpec spec_;
  std::mt19937_64 rng_;
  std::size_t next_ = 0;
};

// Order-preserving 80/20-style split: first floor(N * train_fraction) samples
// train, the rest test. The small epsilon absorbs the representation error of
// fractions like 0.8 so N=10 still splits 8/2.
inline std::pair<Chunk, Chunk> split_chunk(const Chunk& chunk, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("streams: train_fraction must lie in (0, 1)");
  if (chunk.samples.size() < 2)
    throw std::invalid_argument("streams: chunk too small to split");

  const std::size_t n = chunk.samples.size();
  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction + 1e-9));
  if (n_train == 0 || n_train >= n)
    throw std::invalid_argument("streams: split would leave an empty part");

  Chunk train{chunk.index, {chunk.samples.begin(), chunk.samples.begin() + static_cast<std::ptrdiff_t>(n_train)}};
  Chunk test{chunk.index, {chunk.samples.begin() + static_cast<std::ptrdiff_t>(n_train), chunk.samples.end()}};
  return {std::move(train), std::move(test)};
}

// FNV-1a, the reference 64-bit parameters.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Signed feature hashing: (column, value) -> slot and sign. The unit
// separator keeps ("ab","c") and ("a","bc") from colliding by construction.
inline std::pair<std::size_t, double> hashed_feature(std::string_view column, std::string_view value,
                                                     std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("streams: hash_dim must be positive");
  std::string key;
  key.reserve(column.size() + 1 + value.size());
  key.append(column);
  key.push_back('\x1f');
  key.append(value);
  const std::uint64_t h = fnv1a64(key);
  return {static_cast<std::size_t>(h % dim), (h >> 63) ? -1.0 : 1.0};
}

struct CsvSchema {
  std::string label_col;
  std::vector<std::string> feature_cols;
  std::size_t hash_dim = 64;
  std::size_t chunk_size = 2048;
};

inline void validate_csv_schema(const CsvSchema& schema) {
  if (schema.label_col.empty()) throw std::invalid_argument("streams: label_col missing");
  if (schema.feature_cols.empty()) throw std::invalid_argument("streams: feature_cols missing");
  if (schema.hash_dim == 0) throw std::invalid_argument("streams: hash_dim must be positive");
  if (schema.chunk_size < 2) throw std::invalid_argument("streams: chunk_size must be at least 2");
}

struct CsvResult {
  std::vector<Chunk> chunks;
  std::size_t rejected_rows = 0;  // rows dropped for unparseable labels or short lines
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace detail

// Streams a header-first CSV into hashed chunks in file order. Rows whose
// label is not exactly "0" or "1" (or that are too short) are counted and
// skipped; a trailing partial chunk survives only if it can still be split.
inline CsvResult ingest_csv(const std::string& path, const CsvSchema& schema) {
  validate_csv_schema(schema);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("streams: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) return {};
  const std::vector<std::string> header = detail::split_csv_line(line);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position[header[i]] = i;

  const auto require = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw std::runtime_error("streams: column not in header: " + name);
    return it->second;
  };
  const std::size_t label_pos = require(schema.label_col);
  std::vector<std::size_t> feature_pos;
  for (const std::string& col : schema.feature_cols) feature_pos.push_back(require(col));

  CsvResult result;
  Chunk current;
  current.index = 0;
  std::size_t needed = label_pos;
  for (std::size_t p : feature_pos) needed = std::max(needed, p);

  while (std::getline(in, line)) {
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() <= needed) {
      ++result.rejected_rows;
      continue;
    }
    const std::string& label_str = fields[label_pos];
    if (label_str != "0" && label_str != "1") {
      ++result.rejected_rows;
      continue;
    }

    Sample sample;
    sample.label = label_str == "1" ? 1 : 0;
    sample.features.assign(schema.hash_dim, 0.0);
    for (std::size_t i = 0; i < feature_pos.size(); ++i) {
      const auto [slot, sign] = hashed_feature(schema.feature_cols[i], fields[feature_pos[i]], schema.hash_dim);
      sample.features[slot] += sign;
    }
    current.samples.push_back(std::move(sample));
    if (current.samples.size() == schema.chunk_size) {
      result.chunks.push_back(std::move(current));
      current = Chunk{result.chunks.size(), {}};
    }
  }
  if (current.samples.size() >= 2) result.chunks.push_back(std::move(current));
  return result;
}

}  // namespace asys
