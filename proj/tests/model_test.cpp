#include "asys/model.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "asys/ensemble.hpp"

namespace {

using asys::ForwardCache;
using asys::ModelConfig;
using asys::ModelGrads;
using asys::ModelParams;

ModelConfig toy_config(int d_in = 4, int d_emb = 5, std::vector<int> hidden = {6, 3}, int m = 3) {
  ModelConfig config;
  config.d_in = d_in;
  config.d_emb = d_emb;
  config.hidden = std::move(hidden);
  config.num_learners = m;
  return config;
}

void zero_params(ModelParams& params) {
  auto wipe = [](asys::LinearLayer& layer) {
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  };
  wipe(params.backbone);
  for (auto& stack : params.learners)
    for (auto& layer : stack) wipe(layer);
  wipe(params.gate);
}

struct TensorRef {
  std::vector<double>* param;
  const std::vector<double>* grad;
};

std::vector<TensorRef> tensor_refs(ModelParams& params, const ModelGrads& grads, bool with_gate) {
  std::vector<TensorRef> refs;
  refs.push_back({&params.backbone.w, &grads.backbone.w});
  refs.push_back({&params.backbone.b, &grads.backbone.b});
  for (std::size_t k = 0; k < params.learners.size(); ++k) {
    for (std::size_t l = 0; l < params.learners[k].size(); ++l) {
      refs.push_back({&params.learners[k][l].w, &grads.learners[k][l].w});
      refs.push_back({&params.learners[k][l].b, &grads.learners[k][l].b});
    }
  }
  if (with_gate) {
    refs.push_back({&params.gate.w, &grads.gate.w});
    refs.push_back({&params.gate.b, &grads.gate.b});
  }
  return refs;
}

double max_relative_fd_error(ModelParams& params, const ModelGrads& grads, bool with_gate,
                             const std::function<double()>& loss) {
  const double h = 1e-4;
  double worst = 0.0;
  for (TensorRef& ref : tensor_refs(params, grads, with_gate)) {
    for (std::size_t i = 0; i < ref.param->size(); ++i) {
      double& p = (*ref.param)[i];
      const double orig = p;
      p = orig + h;
      const double up = loss();
      p = orig - h;
      const double down = loss();
      p = orig;
      const double fd = (up - down) / (2.0 * h);
      const double analytic = (*ref.grad)[i];
      const double denom = std::max({std::fabs(analytic), std::fabs(fd), 1e-6});
      worst = std::max(worst, std::fabs(analytic - fd) / denom);
    }
  }
  return worst;
}

struct FdProblem {
  ModelParams params;
  std::vector<double> x;
  std::vector<int> y;
  std::vector<std::uint8_t> mask;
  std::size_t n = 0;
};

// Random parameters, inputs and a >=1-unfrozen mask, resampled until every
// ReLU pre-activation is clear of its kink so central differences are valid.
FdProblem make_fd_problem(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> feature(-1.0, 1.0);
  std::uniform_int_distribution<int> label(0, 1);
  std::uniform_int_distribution<int> coin(0, 1);

  for (int attempt = 0; attempt < 100; ++attempt) {
    FdProblem problem;
    problem.n = 8;
    problem.params = asys::init_model(config, rng());
    problem.x.resize(problem.n * static_cast<std::size_t>(config.d_in));
    for (double& v : problem.x) v = feature(rng);
    problem.y.resize(problem.n);
    for (int& v : problem.y) v = label(rng);

    problem.mask.assign(static_cast<std::size_t>(config.num_learners), 0);
    bool any = false;
    for (auto& bit : problem.mask) {
      bit = static_cast<std::uint8_t>(coin(rng));
      any = any || bit;
    }
    if (!any) problem.mask[0] = 1;

    const ForwardCache cache = asys::forward(problem.params, problem.x, problem.n, true);
    if (cache.min_abs_preact > 1e-3) return problem;
  }
  throw std::runtime_error("could not find a kink-free configuration");
}

TEST(Init, ShapesAndDeterminism) {
  const ModelConfig config = toy_config();
  const ModelParams a = asys::init_model(config, 42);
  const ModelParams b = asys::init_model(config, 42);
  const ModelParams c = asys::init_model(config, 43);

  EXPECT_EQ(a.backbone.w.size(), 4u * 5u);
  EXPECT_EQ(a.backbone.b.size(), 5u);
  ASSERT_EQ(a.learners.size(), 3u);
  ASSERT_EQ(a.learners[0].size(), 3u);  // two hidden layers plus head
  EXPECT_EQ(a.learners[0][0].w.size(), 5u * 6u);
  EXPECT_EQ(a.learners[0][1].w.size(), 6u * 3u);
  EXPECT_EQ(a.learners[0][2].w.size(), 3u * 1u);
  EXPECT_EQ(a.gate.w.size(), 5u * 3u);

  EXPECT_EQ(a.backbone.w, b.backbone.w);
  EXPECT_EQ(a.learners[2][1].w, b.learners[2][1].w);
  EXPECT_NE(a.backbone.w, c.backbone.w);
  for (const auto& stack : a.learners)
    for (const auto& layer : stack)
      for (double bias : layer.b) EXPECT_EQ(bias, 0.0);
}

TEST(Init, RejectsBadConfig) {
  EXPECT_THROW(asys::init_model(toy_config(0), 1), std::invalid_argument);
  EXPECT_THROW(asys::init_model(toy_config(4, 0), 1), std::invalid_argument);
  EXPECT_THROW(asys::init_model(toy_config(4, 5, {}), 1), std::invalid_argument);
  EXPECT_THROW(asys::init_model(toy_config(4, 5, {6, 0}), 1), std::invalid_argument);
  EXPECT_THROW(asys::init_model(toy_config(4, 5, {6, 3}, 0), 1), std::invalid_argument);
  ModelConfig bad = toy_config();
  bad.adam.lr = 0.0;
  EXPECT_THROW(asys::init_model(bad, 1), std::invalid_argument);
}

TEST(Forward, ZeroParametersAreSymmetric) {
  const ModelConfig config = toy_config();
  ModelParams params = asys::init_model(config, 1);
  zero_params(params);

  const std::vector<double> x{0.5, -1.0, 2.0, 0.0, 1.5, 0.5, -0.5, 1.0};
  const ForwardCache cache = asys::forward(params, x, 2, true);
  for (double p : cache.pctr) EXPECT_DOUBLE_EQ(p, 0.5);
  for (double g : cache.gate_prob) EXPECT_DOUBLE_EQ(g, 1.0 / 3.0);

  // Aggregation stays at the symmetry point for any valid weights and mask.
  const std::vector<double> coeffs =
      asys::normalize_masked_weights({0.2, 0.5, 0.3}, {1, 0, 1});
  for (double s : asys::aggregate(cache, coeffs)) EXPECT_NEAR(s, 0.5, 1e-12);
}

TEST(Forward, ShapeContractAndDeterminism) {
  const ModelConfig config = toy_config(4, 5, {6, 3}, 2);
  const ModelParams params = asys::init_model(config, 9);
  const std::vector<double> x{0.1, -0.2, 0.3, 0.4};

  const ForwardCache cache = asys::forward(params, x, 1, true);
  EXPECT_EQ(cache.embed.size(), 5u);
  EXPECT_EQ(cache.pctr.size(), 2u);
  EXPECT_EQ(cache.gate_prob.size(), 2u);
  for (double p : cache.pctr) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  double row = 0.0;
  for (double g : cache.gate_prob) row += g;
  EXPECT_NEAR(row, 1.0, 1e-6);

  const ForwardCache again = asys::forward(params, x, 1, true);
  EXPECT_EQ(cache.pctr, again.pctr);
  EXPECT_EQ(cache.gate_prob, again.gate_prob);
  EXPECT_EQ(cache.embed, again.embed);
}

TEST(Forward, RejectsBadInput) {
  const ModelConfig config = toy_config();
  const ModelParams params = asys::init_model(config, 9);
  EXPECT_THROW(asys::forward(params, {0.1, 0.2}, 1, false), std::invalid_argument);
  EXPECT_THROW(asys::forward(params, {}, 0, false), std::invalid_argument);
}

TEST(Backward, RejectsAllFrozen) {
  const ModelConfig config = toy_config();
  const ModelParams params = asys::init_model(config, 5);
  const std::vector<double> x(4 * 2, 0.3);
  const ForwardCache cache = asys::forward(params, x, 2, false);
  EXPECT_THROW(
      asys::backward_train(params, cache, {0, 1}, {0.0, 0.0, 0.0}, {0, 0, 0}, false),
      std::invalid_argument);
}

TEST(Backward, FiniteDifferenceUniformCoefficients) {
  const ModelConfig config = toy_config();
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    FdProblem problem = make_fd_problem(config, seed);
    const std::vector<double> weights(3, 1.0 / 3.0);
    const std::vector<double> coeffs = asys::normalize_masked_weights(weights, problem.mask);

    const ForwardCache cache = asys::forward(problem.params, problem.x, problem.n, false);
    const asys::BackwardResult result =
        asys::backward_train(problem.params, cache, problem.y, coeffs, problem.mask, false);

    const double err = max_relative_fd_error(
        problem.params, result.grads, false,
        [&] { return asys::training_loss(problem.params, problem.x, problem.n, problem.y, coeffs); });
    EXPECT_LE(err, 1e-4) << "seed " << seed;
  }
}

TEST(Backward, FiniteDifferenceGatedCoefficients) {
  const ModelConfig config = toy_config();
  for (std::uint64_t seed = 11; seed <= 14; ++seed) {
    FdProblem problem = make_fd_problem(config, seed);
    const ForwardCache cache = asys::forward(problem.params, problem.x, problem.n, true);
    const std::vector<double> w = asys::gate_chunk_weights(cache, 3);
    const std::vector<double> coeffs = asys::normalize_masked_weights(w, problem.mask);
    const asys::BackwardResult result =
        asys::backward_train(problem.params, cache, problem.y, coeffs, problem.mask, true);

    const double err = max_relative_fd_error(
        problem.params, result.grads, true,
        [&] { return asys::training_loss_gated(problem.params, problem.x, problem.n, problem.y, problem.mask); });
    EXPECT_LE(err, 1e-4) << "seed " << seed;
  }
}

TEST(Backward, FiniteDifferenceGateOnlyPhase) {
  const ModelConfig config = toy_config();
  for (std::uint64_t seed = 21; seed <= 24; ++seed) {
    FdProblem problem = make_fd_problem(config, seed);
    const ForwardCache cache = asys::forward(problem.params, problem.x, problem.n, true);
    const asys::BackwardResult result = asys::backward_gate_only(problem.params, cache, problem.y);

    // Learner and backbone tensors are intentionally out of this objective's
    // graph, so only the gate tensors are compared.
    const double h = 1e-4;
    double worst = 0.0;
    auto check = [&](std::vector<double>& tensor, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < tensor.size(); ++i) {
        const double orig = tensor[i];
        tensor[i] = orig + h;
        const double up = asys::gate_loss(problem.params, problem.x, problem.n, problem.y);
        tensor[i] = orig - h;
        const double down = asys::gate_loss(problem.params, problem.x, problem.n, problem.y);
        tensor[i] = orig;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::fabs(grad[i]), std::fabs(fd), 1e-6});
        worst = std::max(worst, std::fabs(grad[i] - fd) / denom);
      }
    };
    check(problem.params.gate.w, result.grads.gate.w);
    check(problem.params.gate.b, result.grads.gate.b);
    EXPECT_LE(worst, 1e-4) << "seed " << seed;

    for (double g : result.grads.backbone.w) EXPECT_EQ(g, 0.0);
    for (double g : result.grads.learners[0][0].w) EXPECT_EQ(g, 0.0);
  }
}

TEST(Backward, FrozenLearnersGetExactZeros) {
  const ModelConfig config = toy_config();
  FdProblem problem = make_fd_problem(config, 31);
  problem.mask = {1, 0, 1};
  const std::vector<double> coeffs =
      asys::normalize_masked_weights({1.0 / 3, 1.0 / 3, 1.0 / 3}, problem.mask);
  const ForwardCache cache = asys::forward(problem.params, problem.x, problem.n, false);
  const asys::BackwardResult result =
      asys::backward_train(problem.params, cache, problem.y, coeffs, problem.mask, false);

  for (const auto& layer : result.grads.learners[1]) {
    for (double g : layer.w) EXPECT_EQ(g, 0.0);
    for (double g : layer.b) EXPECT_EQ(g, 0.0);
  }
}

TEST(Adam, ZeroGradientLeavesFreshParametersUnchanged) {
  std::vector<double> p{0.7, -0.3};
  asys::AdamState state;
  state.m.assign(2, 0.0);
  state.v.assign(2, 0.0);
  asys::detail::adam_step(p, {0.0, 0.0}, state, {});
  EXPECT_DOUBLE_EQ(p[0], 0.7);
  EXPECT_DOUBLE_EQ(p[1], -0.3);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, FirstStepMovesByAboutLearningRate) {
  std::vector<double> p{0.0};
  asys::AdamState state;
  state.m.assign(1, 0.0);
  state.v.assign(1, 0.0);
  asys::detail::adam_step(p, {1.0}, state, {});
  EXPECT_NEAR(-p[0], 0.0009999999900000001, 1e-15);
}

TEST(Adam, OptimizesScalarQuadratic) {
  std::vector<double> p{1.0};
  asys::AdamState state;
  state.m.assign(1, 0.0);
  state.v.assign(1, 0.0);
  const asys::AdamConfig config{0.1, 0.9, 0.999, 1e-8};
  for (int t = 0; t < 100; ++t) asys::detail::adam_step(p, {2.0 * p[0]}, state, config);
  EXPECT_LT(std::fabs(p[0]), 0.1);
  EXPECT_NEAR(p[0], 0.0029366756811025906, 1e-9);
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<double> p{1.0};
  asys::AdamState state;
  state.m.assign(2, 0.0);
  state.v.assign(2, 0.0);
  EXPECT_THROW(asys::detail::adam_step(p, {1.0}, state, {}), std::invalid_argument);
}

TEST(ApplyUpdates, MaskedLearnersStayBitwiseIdentical) {
  const ModelConfig config = toy_config();
  FdProblem problem = make_fd_problem(config, 41);
  problem.mask = {0, 1, 1};
  asys::ModelAdam adam = asys::make_adam(problem.params);
  // Warm the moments so "unchanged" is not just "still zero".
  const std::vector<double> coeffs_all =
      asys::normalize_masked_weights({1.0 / 3, 1.0 / 3, 1.0 / 3}, {1, 1, 1});
  const ForwardCache cache0 = asys::forward(problem.params, problem.x, problem.n, false);
  const asys::BackwardResult warm =
      asys::backward_train(problem.params, cache0, problem.y, coeffs_all, {1, 1, 1}, false);
  asys::apply_updates(problem.params, adam, warm.grads, {1, 1, 1}, true, false);

  const auto frozen_params = problem.params.learners[0];
  const auto frozen_adam = adam.learners[0];
  const auto moving_before = problem.params.learners[1];

  const std::vector<double> coeffs =
      asys::normalize_masked_weights({1.0 / 3, 1.0 / 3, 1.0 / 3}, problem.mask);
  const ForwardCache cache = asys::forward(problem.params, problem.x, problem.n, false);
  const asys::BackwardResult result =
      asys::backward_train(problem.params, cache, problem.y, coeffs, problem.mask, false);
  asys::apply_updates(problem.params, adam, result.grads, problem.mask, true, false);

  for (std::size_t l = 0; l < frozen_params.size(); ++l) {
    EXPECT_EQ(problem.params.learners[0][l].w, frozen_params[l].w);
    EXPECT_EQ(problem.params.learners[0][l].b, frozen_params[l].b);
    EXPECT_EQ(adam.learners[0][l].w.m, frozen_adam[l].w.m);
    EXPECT_EQ(adam.learners[0][l].w.v, frozen_adam[l].w.v);
    EXPECT_EQ(adam.learners[0][l].w.step, frozen_adam[l].w.step);
  }
  EXPECT_NE(problem.params.learners[1][0].w, moving_before[0].w);  // sanity: others moved
}

}  // namespace
