#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hyssra/errors.hpp"

namespace hyssra::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over a flat parameter span.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamOptions options)
      : options_(options), first_(size, 0.0), second_(size, 0.0) {}

  const AdamOptions& options() const { return options_; }
  std::int64_t steps() const { return steps_; }

  void step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != first_.size() || grads.size() != first_.size()) {
      throw ShapeError("Adam::step: parameter/gradient size mismatch");
    }
    for (double g : grads) {
      if (!std::isfinite(g)) throw DivergenceError("Adam::step: non-finite gradient");
    }
    ++steps_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double lr = options_.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i] = b1 * first_[i] + (1.0 - b1) * grads[i];
      second_[i] = b2 * second_[i] + (1.0 - b2) * grads[i] * grads[i];
      const double m_hat = first_[i] / c1;
      const double v_hat = second_[i] / c2;
      params[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }

 private:
  AdamOptions options_;
  std::vector<double> first_;
  std::vector<double> second_;
  std::int64_t steps_ = 0;
};

}  // namespace hyssra::nn
