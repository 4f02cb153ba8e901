#pragma once

// Shared-backbone ensemble model: one linear+ReLU backbone feeding m sigmoid
// MLP learners and an optional softmax gate. Training is plain reverse-mode
// accumulation written out by hand so the update order is fixed and runs are
// bit-reproducible; Adam moments live per tensor and advance only when that
// tensor is actually updated.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace asys {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct ModelConfig {
  int d_in = 0;
  int d_emb = 32;
  std::vector<int> hidden = {32, 16};
  int num_learners = 0;
  AdamConfig adam;
};

inline void validate_model_config(const ModelConfig& config) {
  if (config.d_in <= 0) throw std::invalid_argument("model: d_in must be positive");
  if (config.d_emb <= 0) throw std::invalid_argument("model: d_emb must be positive");
  if (config.hidden.empty()) throw std::invalid_argument("model: hidden layer list is empty");
  for (int h : config.hidden)
    if (h <= 0) throw std::invalid_argument("model: hidden sizes must be positive");
  if (config.num_learners < 1) throw std::invalid_argument("model: need at least 1 learner");
  if (!(config.adam.lr > 0.0)) throw std::invalid_argument("model: lr must be positive");
  if (!(config.adam.beta1 >= 0.0 && config.adam.beta1 < 1.0) ||
      !(config.adam.beta2 >= 0.0 && config.adam.beta2 < 1.0))
    throw std::invalid_argument("model: adam betas must lie in [0, 1)");
  if (!(config.adam.eps > 0.0)) throw std::invalid_argument("model: adam eps must be positive");
}

// Row-major dense layer, w[r * in + c], z = w x + b.
struct LinearLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

struct ModelParams {
  ModelConfig config;
  LinearLayer backbone;                          // d_in -> d_emb, ReLU
  std::vector<std::vector<LinearLayer>> learners;  // per learner: hidden stack then 1-unit head
  LinearLayer gate;                              // d_emb -> m, softmax rows
};

namespace detail {

inline LinearLayer make_layer(int in, int out, std::mt19937_64& rng) {
  LinearLayer layer;
  layer.in = in;
  layer.out = out;
  layer.w.resize(static_cast<std::size_t>(in) * out);
  layer.b.assign(static_cast<std::size_t>(out), 0.0);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : layer.w) v = dist(rng);
  return layer;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

inline ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  validate_model_config(config);
  std::mt19937_64 rng(seed);
  ModelParams params;
  params.config = config;
  params.backbone = detail::make_layer(config.d_in, config.d_emb, rng);
  params.learners.resize(static_cast<std::size_t>(config.num_learners));
  for (auto& stack : params.learners) {
    int prev = config.d_emb;
    for (int h : config.hidden) {
      stack.push_back(detail::make_layer(prev, h, rng));
      prev = h;
    }
    stack.push_back(detail::make_layer(prev, 1, rng));
  }
  params.gate = detail::make_layer(config.d_emb, config.num_learners, rng);
  return params;
}

struct ForwardCache {
  std::size_t n = 0;
  std::vector<double> input;      // n x d_in
  std::vector<double> embed;      // n x d_emb, post-ReLU
  // acts[k][l]: n x hidden[l], post-ReLU activations of learner k.
  std::vector<std::vector<std::vector<double>>> acts;
  std::vector<double> pctr;       // n x m, sigmoid head outputs
  std::vector<double> gate_prob;  // n x m softmax rows, empty when gate skipped
  // Smallest |pre-activation| seen at any ReLU; finite-difference checks use
  // it to reject configurations sitting on a kink.
  double min_abs_preact = std::numeric_limits<double>::infinity();
};

namespace detail {

// z = W x + b for one sample laid out in a flat row.
inline void affine_row(const LinearLayer& layer, const double* x, double* z) {
  for (int r = 0; r < layer.out; ++r) {
    double acc = layer.b[static_cast<std::size_t>(r)];
    const double* wr = layer.w.data() + static_cast<std::size_t>(r) * layer.in;
    for (int c = 0; c < layer.in; ++c) acc += wr[c] * x[c];
    z[r] = acc;
  }
}

}  // namespace detail

inline ForwardCache forward(const ModelParams& params, const std::vector<double>& x,
                            std::size_t n, bool with_gate) {
  const ModelConfig& cfg = params.config;
  validate_model_config(cfg);
  if (n == 0) throw std::invalid_argument("model: empty batch");
  if (x.size() != n * static_cast<std::size_t>(cfg.d_in))
    throw std::invalid_argument("model: input size does not match n * d_in");

  const std::size_t m = params.learners.size();
  ForwardCache cache;
  cache.n = n;
  cache.input = x;
  cache.embed.resize(n * static_cast<std::size_t>(cfg.d_emb));
  cache.acts.assign(m, {});
  cache.pctr.resize(n * m);
  if (with_gate) cache.gate_prob.resize(n * m);

  std::vector<double> z(static_cast<std::size_t>(cfg.d_emb));
  for (std::size_t i = 0; i < n; ++i) {
    detail::affine_row(params.backbone, x.data() + i * cfg.d_in, z.data());
    double* e = cache.embed.data() + i * cfg.d_emb;
    for (int r = 0; r < cfg.d_emb; ++r) {
      cache.min_abs_preact = std::min(cache.min_abs_preact, std::fabs(z[static_cast<std::size_t>(r)]));
      e[r] = z[static_cast<std::size_t>(r)] > 0.0 ? z[static_cast<std::size_t>(r)] : 0.0;
    }
  }

  for (std::size_t k = 0; k < m; ++k) {
    const auto& stack = params.learners[k];
    auto& acts = cache.acts[k];
    acts.resize(stack.size() - 1);
    for (std::size_t l = 0; l + 1 < stack.size(); ++l)
      acts[l].resize(n * static_cast<std::size_t>(stack[l].out));

    std::vector<double> buf;
    for (std::size_t i = 0; i < n; ++i) {
      const double* cur = cache.embed.data() + i * cfg.d_emb;
      for (std::size_t l = 0; l + 1 < stack.size(); ++l) {
        buf.resize(static_cast<std::size_t>(stack[l].out));
        detail::affine_row(stack[l], cur, buf.data());
        double* a = acts[l].data() + i * static_cast<std::size_t>(stack[l].out);
        for (int r = 0; r < stack[l].out; ++r) {
          cache.min_abs_preact = std::min(cache.min_abs_preact, std::fabs(buf[static_cast<std::size_t>(r)]));
          a[r] = buf[static_cast<std::size_t>(r)] > 0.0 ? buf[static_cast<std::size_t>(r)] : 0.0;
        }
        cur = a;
      }
      double logit = 0.0;
      detail::affine_row(stack.back(), cur, &logit);
      cache.pctr[i * m + k] = detail::sigmoid(logit);
    }
  }

  if (with_gate) {
    std::vector<double> logits(m);
    for (std::size_t i = 0; i < n; ++i) {
      detail::affine_row(params.gate, cache.embed.data() + i * cfg.d_emb, logits.data());
      double peak = logits[0];
      for (std::size_t k = 1; k < m; ++k) peak = std::max(peak, logits[k]);
      double sum = 0.0;
      double* g = cache.gate_prob.data() + i * m;
      for (std::size_t k = 0; k < m; ++k) {
        g[k] = std::exp(logits[k] - peak);
        sum += g[k];
      }
      for (std::size_t k = 0; k < m; ++k) g[k] /= sum;
    }
  }
  return cache;
}

// Column means of the softmax rows: the chunk-level mixture weight.
inline std::vector<double> gate_chunk_weights(const ForwardCache& cache, std::size_t m) {
  if (cache.gate_prob.size() != cache.n * m)
    throw std::invalid_argument("model: cache has no gate probabilities");
  std::vector<double> w(m, 0.0);
  for (std::size_t i = 0; i < cache.n; ++i)
    for (std::size_t k = 0; k < m; ++k) w[k] += cache.gate_prob[i * m + k];
  for (std::size_t k = 0; k < m; ++k) w[k] /= static_cast<double>(cache.n);
  return w;
}

// s_i = sum_k coeffs[k] * pctr[i][k].
inline std::vector<double> aggregate(const ForwardCache& cache, const std::vector<double>& coeffs) {
  const std::size_t m = coeffs.size();
  if (cache.pctr.size() != cache.n * m)
    throw std::invalid_argument("model: coefficient count does not match learner count");
  std::vector<double> s(cache.n, 0.0);
  for (std::size_t i = 0; i < cache.n; ++i)
    for (std::size_t k = 0; k < m; ++k) s[i] += coeffs[k] * cache.pctr[i * m + k];
  return s;
}

struct LayerGrad {
  std::vector<double> w;
  std::vector<double> b;
};

struct ModelGrads {
  LayerGrad backbone;
  std::vector<std::vector<LayerGrad>> learners;
  LayerGrad gate;
};

namespace detail {

inline LayerGrad zero_grad(const LinearLayer& layer) {
  return LayerGrad{std::vector<double>(layer.w.size(), 0.0),
                   std::vector<double>(layer.b.size(), 0.0)};
}

inline ModelGrads zero_grads(const ModelParams& params) {
  ModelGrads g;
  g.backbone = zero_grad(params.backbone);
  g.learners.resize(params.learners.size());
  for (std::size_t k = 0; k < params.learners.size(); ++k)
    for (const auto& layer : params.learners[k]) g.learners[k].push_back(zero_grad(layer));
  g.gate = zero_grad(params.gate);
  return g;
}

constexpr double kScoreClip = 1e-7;

// Mean BCE and its derivative with respect to each aggregated score.
inline double bce_and_dscore(const std::vector<double>& s, const std::vector<int>& y,
                             std::vector<double>& ds) {
  const double n = static_cast<double>(s.size());
  ds.resize(s.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double c = std::min(std::max(s[i], kScoreClip), 1.0 - kScoreClip);
    loss += y[i] == 1 ? -std::log(c) : -std::log(1.0 - c);
    ds[i] = (c - static_cast<double>(y[i])) / (c * (1.0 - c) * n);
  }
  return loss / n;
}

// Backpropagates d(loss)/d(pctr column k) through one learner stack, adding
// that learner's share of d(loss)/d(embedding) into dembed.
inline void learner_backward(const ModelParams& params, const ForwardCache& cache,
                             std::size_t k, const std::vector<double>& dpctr,
                             std::vector<LayerGrad>& grads, std::vector<double>& dembed) {
  const auto& stack = params.learners[k];
  const std::size_t m = params.learners.size();
  const std::size_t n = cache.n;
  const int d_emb = params.config.d_emb;

  std::vector<double> dcur, dprev;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = cache.pctr[i * m + k];
    double dlogit = dpctr[i] * p * (1.0 - p);

    // Head layer: single output row over the last hidden activation.
    const auto& head = stack.back();
    const double* last_act = cache.acts[k].back().data() + i * static_cast<std::size_t>(head.in);
    auto& head_grad = grads.back();
    for (int c = 0; c < head.in; ++c) head_grad.w[static_cast<std::size_t>(c)] += dlogit * last_act[c];
    head_grad.b[0] += dlogit;

    dcur.assign(static_cast<std::size_t>(head.in), 0.0);
    for (int c = 0; c < head.in; ++c) dcur[static_cast<std::size_t>(c)] = head.w[static_cast<std::size_t>(c)] * dlogit;

    for (std::size_t l = stack.size() - 1; l-- > 0;) {
      const auto& layer = stack[l];
      const double* act = cache.acts[k][l].data() + i * static_cast<std::size_t>(layer.out);
      const double* below = l == 0 ? cache.embed.data() + i * static_cast<std::size_t>(d_emb)
                                   : cache.acts[k][l - 1].data() + i * static_cast<std::size_t>(layer.in);
      // ReLU gate on the layer output, then accumulate the affine grads.
      for (int r = 0; r < layer.out; ++r)
        if (act[r] <= 0.0) dcur[static_cast<std::size_t>(r)] = 0.0;

      auto& lg = grads[l];
      dprev.assign(static_cast<std::size_t>(layer.in), 0.0);
      for (int r = 0; r < layer.out; ++r) {
        const double dz = dcur[static_cast<std::size_t>(r)];
        if (dz == 0.0) continue;
        double* gw = lg.w.data() + static_cast<std::size_t>(r) * layer.in;
        const double* wr = layer.w.data() + static_cast<std::size_t>(r) * layer.in;
        for (int c = 0; c < layer.in; ++c) {
          gw[c] += dz * below[c];
          dprev[static_cast<std::size_t>(c)] += wr[c] * dz;
        }
        lg.b[static_cast<std::size_t>(r)] += dz;
      }
      dcur.swap(dprev);
    }
    double* de = dembed.data() + i * static_cast<std::size_t>(d_emb);
    for (int c = 0; c < d_emb; ++c) de[c] += dcur[static_cast<std::size_t>(c)];
  }
}

// Softmax-rows backward for the gate: dgate_prob -> gate grads + dembed.
inline void gate_backward_rows(const ModelParams& params, const ForwardCache& cache,
                               const std::vector<double>& dgate_prob, LayerGrad& grad,
                               std::vector<double>& dembed) {
  const std::size_t m = params.learners.size();
  const std::size_t n = cache.n;
  const int d_emb = params.config.d_emb;

  std::vector<double> dlogit(m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* g = cache.gate_prob.data() + i * m;
    const double* dg = dgate_prob.data() + i * m;
    double dot = 0.0;
    for (std::size_t k = 0; k < m; ++k) dot += dg[k] * g[k];
    for (std::size_t k = 0; k < m; ++k) dlogit[k] = g[k] * (dg[k] - dot);

    const double* e = cache.embed.data() + i * static_cast<std::size_t>(d_emb);
    double* de = dembed.data() + i * static_cast<std::size_t>(d_emb);
    for (std::size_t k = 0; k < m; ++k) {
      const double dz = dlogit[k];
      if (dz == 0.0) continue;
      double* gw = grad.w.data() + k * static_cast<std::size_t>(d_emb);
      const double* wr = params.gate.w.data() + k * static_cast<std::size_t>(d_emb);
      for (int c = 0; c < d_emb; ++c) {
        gw[c] += dz * e[c];
        de[c] += wr[c] * dz;
      }
      grad.b[k] += dz;
    }
  }
}

// d(loss)/d(embedding) -> backbone grads through the ReLU.
inline void backbone_backward(const ModelParams& params, const ForwardCache& cache,
                              const std::vector<double>& dembed, LayerGrad& grad) {
  const int d_emb = params.config.d_emb;
  const int d_in = params.config.d_in;
  for (std::size_t i = 0; i < cache.n; ++i) {
    const double* e = cache.embed.data() + i * static_cast<std::size_t>(d_emb);
    const double* x = cache.input.data() + i * static_cast<std::size_t>(d_in);
    for (int r = 0; r < d_emb; ++r) {
      if (e[r] <= 0.0) continue;
      const double dz = dembed[i * static_cast<std::size_t>(d_emb) + static_cast<std::size_t>(r)];
      if (dz == 0.0) continue;
      double* gw = grad.w.data() + static_cast<std::size_t>(r) * d_in;
      for (int c = 0; c < d_in; ++c) gw[c] += dz * x[c];
      grad.b[static_cast<std::size_t>(r)] += dz;
    }
  }
}

}  // namespace detail

struct BackwardResult {
  ModelGrads grads;
  double loss = 0.0;
  std::vector<double> scores;  // aggregated train scores, one per sample
};

// Reverse pass for one training step. `coeffs` are the aggregation
// coefficients actually used in the loss; `train_mask[k]` marks learners that
// receive gradient (masked-out learners contribute nothing, not even to the
// backbone). With `gate_in_graph` the coefficients are treated as the
// masked-renormalized chunk weights of the gate, so gradient also flows
// through the renormalization and softmax into the gate and backbone.
inline BackwardResult backward_train(const ModelParams& params, const ForwardCache& cache,
                                     const std::vector<int>& labels,
                                     const std::vector<double>& coeffs,
                                     const std::vector<std::uint8_t>& train_mask,
                                     bool gate_in_graph) {
  const std::size_t m = params.learners.size();
  if (labels.size() != cache.n) throw std::invalid_argument("model: label count mismatch");
  if (coeffs.size() != m || train_mask.size() != m)
    throw std::invalid_argument("model: coefficient/mask size mismatch");
  bool any_unfrozen = false;
  for (std::uint8_t bit : train_mask) any_unfrozen = any_unfrozen || bit != 0;
  if (!any_unfrozen) throw std::invalid_argument("model: every learner is frozen");

  BackwardResult out;
  out.grads = detail::zero_grads(params);
  out.scores = aggregate(cache, coeffs);

  std::vector<double> dscore;
  out.loss = detail::bce_and_dscore(out.scores, labels, dscore);

  std::vector<double> dembed(cache.n * static_cast<std::size_t>(params.config.d_emb), 0.0);
  std::vector<double> dpctr(cache.n);
  for (std::size_t k = 0; k < m; ++k) {
    if (!train_mask[k]) continue;
    for (std::size_t i = 0; i < cache.n; ++i) dpctr[i] = dscore[i] * coeffs[k];
    detail::learner_backward(params, cache, k, dpctr, out.grads.learners[k], dembed);
  }

  if (gate_in_graph) {
    // coeffs[k] = w[k] * mask[k] / S with w the chunk weights and S the
    // masked weight sum; chain through that renormalization, the chunk mean
    // and the row softmax.
    const std::vector<double> w = gate_chunk_weights(cache, m);
    double masked_sum = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      if (train_mask[k]) masked_sum += w[k];

    std::vector<double> dcoeff(m, 0.0);
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t i = 0; i < cache.n; ++i)
        dcoeff[k] += dscore[i] * cache.pctr[i * m + k];

    double coeff_dot = 0.0;
    for (std::size_t k = 0; k < m; ++k) coeff_dot += dcoeff[k] * coeffs[k];

    std::vector<double> dw(m, 0.0);
    for (std::size_t k = 0; k < m; ++k)
      if (train_mask[k]) dw[k] = (dcoeff[k] - coeff_dot) / masked_sum;

    std::vector<double> dgate_prob(cache.n * m);
    const double inv_n = 1.0 / static_cast<double>(cache.n);
    for (std::size_t i = 0; i < cache.n; ++i)
      for (std::size_t k = 0; k < m; ++k) dgate_prob[i * m + k] = dw[k] * inv_n;

    detail::gate_backward_rows(params, cache, dgate_prob, out.grads.gate, dembed);
  }

  detail::backbone_backward(params, cache, dembed, out.grads.backbone);
  return out;
}

// Gate-only reverse pass against the unmasked aggregation: scores use the raw
// chunk weights, learner outputs are treated as constants, and only the gate
// tensors receive gradient.
inline BackwardResult backward_gate_only(const ModelParams& params, const ForwardCache& cache,
                                         const std::vector<int>& labels) {
  const std::size_t m = params.learners.size();
  if (labels.size() != cache.n) throw std::invalid_argument("model: label count mismatch");

  const std::vector<double> w = gate_chunk_weights(cache, m);

  BackwardResult out;
  out.grads = detail::zero_grads(params);
  out.scores = aggregate(cache, w);

  std::vector<double> dscore;
  out.loss = detail::bce_and_dscore(out.scores, labels, dscore);

  std::vector<double> dw(m, 0.0);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < cache.n; ++i)
      dw[k] += dscore[i] * cache.pctr[i * m + k];

  std::vector<double> dgate_prob(cache.n * m);
  const double inv_n = 1.0 / static_cast<double>(cache.n);
  for (std::size_t i = 0; i < cache.n; ++i)
    for (std::size_t k = 0; k < m; ++k) dgate_prob[i * m + k] = dw[k] * inv_n;

  std::vector<double> dembed(cache.n * static_cast<std::size_t>(params.config.d_emb), 0.0);
  detail::gate_backward_rows(params, cache, dgate_prob, out.grads.gate, dembed);
  // Decoupled on purpose: the gate phase never reaches the backbone.
  return out;
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

struct LayerAdam {
  AdamState w;
  AdamState bias;
};

struct ModelAdam {
  LayerAdam backbone;
  std::vector<std::vector<LayerAdam>> learners;
  LayerAdam gate;
};

namespace detail {

inline LayerAdam zero_adam(const LinearLayer& layer) {
  LayerAdam a;
  a.w.m.assign(layer.w.size(), 0.0);
  a.w.v.assign(layer.w.size(), 0.0);
  a.bias.m.assign(layer.b.size(), 0.0);
  a.bias.v.assign(layer.b.size(), 0.0);
  return a;
}

inline void adam_step(std::vector<double>& p, const std::vector<double>& g, AdamState& st,
                      const AdamConfig& cfg) {
  if (p.size() != g.size() || p.size() != st.m.size())
    throw std::invalid_argument("model: adam shape mismatch");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

inline void apply_layer(LinearLayer& layer, const LayerGrad& grad, LayerAdam& adam,
                        const AdamConfig& cfg) {
  adam_step(layer.w, grad.w, adam.w, cfg);
  adam_step(layer.b, grad.b, adam.bias, cfg);
}

}  // namespace detail

inline ModelAdam make_adam(const ModelParams& params) {
  ModelAdam a;
  a.backbone = detail::zero_adam(params.backbone);
  a.learners.resize(params.learners.size());
  for (std::size_t k = 0; k < params.learners.size(); ++k)
    for (const auto& layer : params.learners[k]) a.learners[k].push_back(detail::zero_adam(layer));
  a.gate = detail::zero_adam(params.gate);
  return a;
}

// One optimizer application. Masked-out learners are skipped entirely: their
// parameters, moments and step counters stay bitwise identical.
inline void apply_updates(ModelParams& params, ModelAdam& adam, const ModelGrads& grads,
                          const std::vector<std::uint8_t>& train_mask, bool update_backbone,
                          bool update_gate) {
  const AdamConfig& cfg = params.config.adam;
  if (train_mask.size() != params.learners.size())
    throw std::invalid_argument("model: mask size mismatch");
  for (std::size_t k = 0; k < params.learners.size(); ++k) {
    if (!train_mask[k]) continue;
    for (std::size_t l = 0; l < params.learners[k].size(); ++l)
      detail::apply_layer(params.learners[k][l], grads.learners[k][l], adam.learners[k][l], cfg);
  }
  if (update_backbone) detail::apply_layer(params.backbone, grads.backbone, adam.backbone, cfg);
  if (update_gate) detail::apply_layer(params.gate, grads.gate, adam.gate, cfg);
}

// Loss of the masked training objective with constant coefficients; the
// finite-difference checks differentiate this directly.
inline double training_loss(const ModelParams& params, const std::vector<double>& x, std::size_t n,
                            const std::vector<int>& labels, const std::vector<double>& coeffs) {
  const ForwardCache cache = forward(params, x, n, false);
  const std::vector<double> s = aggregate(cache, coeffs);
  std::vector<double> unused;
  return detail::bce_and_dscore(s, labels, unused);
}

// Same objective when the coefficients come from the gate: recomputes the
// chunk weights and their masked renormalization from scratch.
inline double training_loss_gated(const ModelParams& params, const std::vector<double>& x,
                                  std::size_t n, const std::vector<int>& labels,
                                  const std::vector<std::uint8_t>& train_mask) {
  const ForwardCache cache = forward(params, x, n, true);
  const std::size_t m = params.learners.size();
  const std::vector<double> w = gate_chunk_weights(cache, m);
  double masked_sum = 0.0;
  for (std::size_t k = 0; k < m; ++k)
    if (train_mask[k]) masked_sum += w[k];
  std::vector<double> coeffs(m, 0.0);
  for (std::size_t k = 0; k < m; ++k)
    if (train_mask[k]) coeffs[k] = w[k] / masked_sum;
  const std::vector<double> s = aggregate(cache, coeffs);
  std::vector<double> unused;
  return detail::bce_and_dscore(s, labels, unused);
}

// Unmasked gate objective used by the decoupled gate phase.
inline double gate_loss(const ModelParams& params, const std::vector<double>& x, std::size_t n,
                        const std::vector<int>& labels) {
  const ForwardCache cache = forward(params, x, n, true);
  const std::vector<double> w = gate_chunk_weights(cache, params.learners.size());
  const std::vector<double> s = aggregate(cache, w);
  std::vector<double> unused;
  return detail::bce_and_dscore(s, labels, unused);
}

}  // namespace asys
