#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "hyssra/errors.hpp"
#include "hyssra/rng.hpp"

namespace hyssra::nn {

/// Softmax distribution over D arms with its log-probabilities and entropy.
struct Categorical {
  std::vector<double> probs;
  std::vector<double> log_probs;
  double entropy = 0.0;
};

/// Max-shifted softmax and log-sum-exp.
inline Categorical softmax_categorical(std::span<const double> logits) {
  if (logits.empty()) throw InputError("categorical: need at least one logit");
  for (double l : logits) {
    if (!std::isfinite(l)) throw InputError("categorical: non-finite logit");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - top);
  const double log_norm = top + std::log(total);
  Categorical c;
  c.probs.resize(logits.size());
  c.log_probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    c.log_probs[i] = logits[i] - log_norm;
    c.probs[i] = std::exp(c.log_probs[i]);
    if (c.probs[i] > 0.0) c.entropy -= c.probs[i] * c.log_probs[i];
  }
  return c;
}

/// Inverse-CDF draw from a categorical distribution.
template <class URBG>
int sample_index(std::span<const double> probs, URBG& rng) {
  const double u = uniform_unit(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

struct CategoricalDraw {
  int index = 0;
  std::vector<double> log_probs;
  double entropy = 0.0;
};

template <class URBG>
CategoricalDraw categorical_from_logits(std::span<const double> logits, URBG& rng) {
  Categorical c = softmax_categorical(logits);
  CategoricalDraw d;
  d.index = sample_index(std::span<const double>(c.probs), rng);
  d.log_probs = std::move(c.log_probs);
  d.entropy = c.entropy;
  return d;
}

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// log(1 - tanh(u)^2) without cancellation: 2 (log 2 - u - softplus(-2u)).
inline double log_one_minus_tanh_sq(double u) {
  const double x = -2.0 * u;
  const double softplus = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 2.0 * (std::numbers::ln2 - u - softplus);
}

/// Tanh-squashed Gaussian mapped onto the power interval (0, p_max]:
/// u ~ N(mu, sigma^2), a = tanh(u), p = p_max (a + 1) / 2.
struct SquashedDraw {
  double pre_tanh = 0.0;           // u
  double unit_action = 0.0;        // a in (-1, 1)
  double power = 0.0;              // p, W
  double unit_log_density = 0.0;   // log density of a
  double log_density = 0.0;        // log density of p (includes the p_max / 2 scale)
};

inline SquashedDraw squashed_gaussian_from_noise(double mean, double log_std, double p_max, double noise) {
  if (!(log_std >= kLogStdMin && log_std <= kLogStdMax)) {
    throw InputError("squashed_gaussian: log std outside the clamp range");
  }
  const double sigma = std::exp(log_std);
  SquashedDraw d;
  d.pre_tanh = mean + sigma * noise;
  d.unit_action = std::tanh(d.pre_tanh);
  // p_max * sigmoid(2u) == p_max (tanh u + 1) / 2, kept away from an exact zero.
  d.power = std::max(p_max / (1.0 + std::exp(-2.0 * d.pre_tanh)),
                     std::numeric_limits<double>::min());
  const double gaussian = -0.5 * noise * noise - log_std - 0.5 * std::log(2.0 * std::numbers::pi);
  d.unit_log_density = gaussian - log_one_minus_tanh_sq(d.pre_tanh);
  d.log_density = d.unit_log_density - std::log(p_max / 2.0);
  return d;
}

template <class URBG>
SquashedDraw squashed_gaussian_sample(double mean, double log_std, double p_max, URBG& rng) {
  return squashed_gaussian_from_noise(mean, log_std, p_max, standard_normal(rng));
}

/// Density of power p in (0, p_max) under the squashed Gaussian.
inline double squashed_gaussian_log_density(double power, double mean, double log_std, double p_max) {
  const double a = 2.0 * power / p_max - 1.0;
  if (!(a > -1.0 && a < 1.0)) return -std::numeric_limits<double>::infinity();
  const double u = std::atanh(a);
  const double z = (u - mean) / std::exp(log_std);
  const double gaussian = -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi);
  return gaussian - log_one_minus_tanh_sq(u) - std::log(p_max / 2.0);
}

}  // namespace hyssra::nn
