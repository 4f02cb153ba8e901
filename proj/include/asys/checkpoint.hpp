#pragma once

// Parameter checkpoints: a versioned textual map of named tensors. Values are
// written as C hexfloats, which round-trip doubles exactly, so a save/load
// cycle is bitwise lossless. Layout:
//
//   ASYS-CKPT-1
//   dims <d_in> <d_emb> <num_learners> <hidden...>
//   tensor <name> <count>
//   <count hexfloat values, whitespace separated>
//   ...
//   end
//
// Tensor names are backbone.w, backbone.b, learner<k>.layer<l>.w/.b and
// gate.w/gate.b; optimizer state is not persisted.

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asys/model.hpp"

namespace asys {

inline constexpr const char* kCheckpointMagic = "ASYS-CKPT-1";

namespace detail {

inline void write_tensor(std::ostream& out, const std::string& name, const std::vector<double>& v) {
  out << "tensor " << name << ' ' << v.size() << '\n';
  out << std::hexfloat;
  for (std::size_t i = 0; i < v.size(); ++i) out << v[i] << (i + 1 == v.size() ? '\n' : ' ');
  if (v.empty()) out << '\n';
  out << std::defaultfloat;
}

inline std::vector<double> read_tensor(std::istream& in, const std::string& expected_name,
                                       std::size_t expected_count) {
  std::string word, name;
  std::size_t count = 0;
  if (!(in >> word >> name >> count) || word != "tensor")
    throw std::runtime_error("checkpoint: expected tensor header for " + expected_name);
  if (name != expected_name)
    throw std::runtime_error("checkpoint: expected tensor " + expected_name + ", found " + name);
  if (count != expected_count)
    throw std::runtime_error("checkpoint: tensor " + name + " has wrong size");
  std::vector<double> v(count);
  for (double& x : v) {
    std::string token;
    if (!(in >> token)) throw std::runtime_error("checkpoint: truncated tensor " + name);
    try {
      std::size_t used = 0;
      x = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw std::runtime_error("checkpoint: bad value in tensor " + name + ": " + token);
    }
  }
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << kCheckpointMagic << '\n';
  out << "dims " << params.config.d_in << ' ' << params.config.d_emb << ' '
      << params.learners.size();
  for (int h : params.config.hidden) out << ' ' << h;
  out << '\n';

  detail::write_tensor(out, "backbone.w", params.backbone.w);
  detail::write_tensor(out, "backbone.b", params.backbone.b);
  for (std::size_t k = 0; k < params.learners.size(); ++k) {
    for (std::size_t l = 0; l < params.learners[k].size(); ++l) {
      const std::string base = "learner" + std::to_string(k) + ".layer" + std::to_string(l);
      detail::write_tensor(out, base + ".w", params.learners[k][l].w);
      detail::write_tensor(out, base + ".b", params.learners[k][l].b);
    }
  }
  detail::write_tensor(out, "gate.w", params.gate.w);
  detail::write_tensor(out, "gate.b", params.gate.b);
  out << "end\n";
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

// Rebuilds the parameter block (optimizer hyperparameters keep defaults; the
// checkpoint stores structure and weights only).
inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

  std::string magic;
  if (!std::getline(in, magic) || magic != kCheckpointMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);

  std::string word;
  ModelConfig config;
  std::size_t m = 0;
  if (!(in >> word) || word != "dims")
    throw std::runtime_error("checkpoint: missing dims header");
  if (!(in >> config.d_in >> config.d_emb >> m))
    throw std::runtime_error("checkpoint: bad dims header");
  config.hidden.clear();
  {
    std::string rest;
    std::getline(in, rest);
    std::stringstream ss(rest);
    int h = 0;
    while (ss >> h) config.hidden.push_back(h);
  }
  config.num_learners = static_cast<int>(m);
  validate_model_config(config);

  ModelParams params;
  params.config = config;
  const auto layer_of = [](int in_dim, int out_dim, std::vector<double> w, std::vector<double> b) {
    LinearLayer layer;
    layer.in = in_dim;
    layer.out = out_dim;
    layer.w = std::move(w);
    layer.b = std::move(b);
    return layer;
  };

  // Reads are sequenced through locals: tensors appear in file order, and
  // argument evaluation order would otherwise be unspecified.
  const std::size_t bb = static_cast<std::size_t>(config.d_in) * config.d_emb;
  std::vector<double> w = detail::read_tensor(in, "backbone.w", bb);
  std::vector<double> b = detail::read_tensor(in, "backbone.b", static_cast<std::size_t>(config.d_emb));
  params.backbone = layer_of(config.d_in, config.d_emb, std::move(w), std::move(b));
  params.learners.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    int prev = config.d_emb;
    std::vector<int> outs = config.hidden;
    outs.push_back(1);
    for (std::size_t l = 0; l < outs.size(); ++l) {
      const std::string base = "learner" + std::to_string(k) + ".layer" + std::to_string(l);
      const std::size_t wn = static_cast<std::size_t>(prev) * outs[l];
      w = detail::read_tensor(in, base + ".w", wn);
      b = detail::read_tensor(in, base + ".b", static_cast<std::size_t>(outs[l]));
      params.learners[k].push_back(layer_of(prev, outs[l], std::move(w), std::move(b)));
      prev = outs[l];
    }
  }
  const std::size_t gw = static_cast<std::size_t>(config.d_emb) * m;
  w = detail::read_tensor(in, "gate.w", gw);
  b = detail::read_tensor(in, "gate.b", m);
  params.gate = layer_of(config.d_emb, static_cast<int>(m), std::move(w), std::move(b));

  if (!(in >> word) || word != "end")
    throw std::runtime_error("checkpoint: missing end marker");
  return params;
}

}  // namespace asys
