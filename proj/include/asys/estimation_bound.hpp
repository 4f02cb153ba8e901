#pragma once

// Monte-Carlo check of the estimation-error bound for a sigmoid scorer over
// a shifted input distribution: the expected error under the new inputs is at
// most the Lipschitz constant times the expected input displacement plus the
// expected error under the old inputs.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace asys {

struct SigmoidLinearScorer {
  std::vector<double> weights;
  double bias = 0.0;

  double operator()(const std::vector<double>& x) const {
    if (x.size() != weights.size())
      throw std::invalid_argument("bound: input dimension mismatch");
    double z = bias;
    for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * x[i];
    return 1.0 / (1.0 + std::exp(-z));
  }

  // The sigmoid's derivative peaks at 1/4, so the composition with the
  // linear map is ||w||_2 / 4 Lipschitz in the euclidean norm.
  double lipschitz() const {
    double sq = 0.0;
    for (double w : weights) sq += w * w;
    return 0.25 * std::sqrt(sq);
  }
};

struct GaussianSpec {
  std::vector<double> mean;
  std::vector<double> stddev;  // per-coordinate, each >= 0
};

inline void validate_gaussian(const GaussianSpec& spec) {
  if (spec.mean.empty() || spec.mean.size() != spec.stddev.size())
    throw std::invalid_argument("bound: gaussian mean/stddev size mismatch");
  for (double s : spec.stddev)
    if (!(s >= 0.0))
      throw std::invalid_argument("bound: gaussian stddev must be non-negative");
}

struct BoundCheck {
  double lipschitz = 0.0;
  double lhs = 0.0;          // E |f(x_new) - y|
  double rhs = 0.0;          // L * E ||x_new - x_old|| + E |f(x_old) - y|
  double margin_mean = 0.0;  // per-draw mean of rhs_i - lhs_i
  double margin_se = 0.0;    // standard error of that mean
  bool holds = false;
  std::size_t draws = 0;
};

// Draws paired samples (x_new from `shifted`, x_old from `reference`) and
// accumulates the per-draw margin. The verdict tolerates Monte-Carlo noise:
// the bound is accepted when the margin mean is within three standard errors
// of being non-negative.
inline BoundCheck check_estimation_bound(const SigmoidLinearScorer& scorer,
                                         const GaussianSpec& shifted,
                                         const GaussianSpec& reference,
                                         int label,
                                         std::size_t draws,
                                         std::uint64_t seed) {
  validate_gaussian(shifted);
  validate_gaussian(reference);
  if (shifted.mean.size() != reference.mean.size())
    throw std::invalid_argument("bound: distribution dimension mismatch");
  if (shifted.mean.size() != scorer.weights.size())
    throw std::invalid_argument("bound: scorer dimension mismatch");
  if (label != 0 && label != 1)
    throw std::invalid_argument("bound: label not in {0, 1}");
  if (draws == 0)
    throw std::invalid_argument("bound: draws must be positive");

  const std::size_t dim = shifted.mean.size();
  const double lip = scorer.lipschitz();
  const double y = static_cast<double>(label);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<double> x_new(dim), x_old(dim);
  double lhs_sum = 0.0, rhs_sum = 0.0;
  double margin_sum = 0.0, margin_sq_sum = 0.0;
  for (std::size_t t = 0; t < draws; ++t) {
    double dist_sq = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      x_new[i] = shifted.mean[i] + shifted.stddev[i] * unit(rng);
      x_old[i] = reference.mean[i] + reference.stddev[i] * unit(rng);
      const double d = x_new[i] - x_old[i];
      dist_sq += d * d;
    }
    const double err_new = std::fabs(scorer(x_new) - y);
    const double err_old = std::fabs(scorer(x_old) - y);
    const double lhs_i = err_new;
    const double rhs_i = lip * std::sqrt(dist_sq) + err_old;
    lhs_sum += lhs_i;
    rhs_sum += rhs_i;
    const double margin = rhs_i - lhs_i;
    margin_sum += margin;
    margin_sq_sum += margin * margin;
  }

  BoundCheck out;
  out.lipschitz = lip;
  out.draws = draws;
  const double n = static_cast<double>(draws);
  out.lhs = lhs_sum / n;
  out.rhs = rhs_sum / n;
  out.margin_mean = margin_sum / n;
  const double var = std::max(0.0, margin_sq_sum / n - out.margin_mean * out.margin_mean);
  out.margin_se = draws > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  out.holds = out.margin_mean >= -3.0 * out.margin_se;
  return out;
}

}  // namespace asys
