#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyssra/errors.hpp"
#include "hyssra/rng.hpp"

namespace hyssra::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { kLinear = 0, kElu = 1, kTanh = 2 };

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::kElu:
      return z > 0.0 ? z : std::expm1(z);
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kLinear:
      break;
  }
  return z;
}

/// d activation / dz, given the pre-activation z and the output y = f(z).
inline double activation_slope(Activation a, double z, double y) {
  switch (a) {
    case Activation::kElu:
      return z > 0.0 ? 1.0 : y + 1.0;
    case Activation::kTanh:
      return 1.0 - y * y;
    case Activation::kLinear:
      break;
  }
  return 1.0;
}

/// Multilayer perceptron over column-batched inputs (one column per sample).
/// Parameters live in one flat buffer: for each layer the weight matrix
/// (out x in, column-major) followed by the bias vector.
class DenseNet {
 public:
  DenseNet() = default;

  /// Zero-initialised net. `widths` has one more entry than `activations`.
  DenseNet(std::vector<int> widths, std::vector<Activation> activations)
      : widths_(std::move(widths)), activations_(std::move(activations)) {
    if (widths_.size() < 2 || activations_.size() + 1 != widths_.size()) {
      throw ShapeError("DenseNet: need L + 1 widths for L activations");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l < activations_.size(); ++l) {
      if (widths_[l] < 1 || widths_[l + 1] < 1) throw ShapeError("DenseNet: widths must be >= 1");
      offsets_.push_back(offset);
      offset += static_cast<std::size_t>(widths_[l + 1]) * (widths_[l] + 1);
    }
    params_.assign(offset, 0.0);
    grads_.assign(offset, 0.0);
  }

  /// Hidden layers use `hidden`, the last layer `output`. Weights and biases
  /// start U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  template <class URBG>
  static DenseNet mlp(std::span<const int> widths, Activation hidden, Activation output, URBG& rng) {
    std::vector<Activation> acts(widths.size() - 1, hidden);
    acts.back() = output;
    DenseNet net(std::vector<int>(widths.begin(), widths.end()), std::move(acts));
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(net.widths_[l]));
      auto [begin, end] = net.layer_range(l);
      for (std::size_t i = begin; i < end; ++i) net.params_[i] = uniform_real(rng, -bound, bound);
    }
    return net;
  }

  std::size_t layer_count() const { return activations_.size(); }
  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  const std::vector<int>& widths() const { return widths_; }
  const std::vector<Activation>& activations() const { return activations_; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> gradients() { return grads_; }
  std::span<const double> gradients() const { return grads_; }
  void zero_gradients() { std::fill(grads_.begin(), grads_.end(), 0.0); }

  Eigen::Map<Matrix> weight(std::size_t l) {
    return {params_.data() + offsets_[l], widths_[l + 1], widths_[l]};
  }
  Eigen::Map<const Matrix> weight(std::size_t l) const {
    return {params_.data() + offsets_[l], widths_[l + 1], widths_[l]};
  }
  Eigen::Map<Vector> bias(std::size_t l) {
    return {params_.data() + offsets_[l] + weight_size(l), widths_[l + 1]};
  }
  Eigen::Map<const Vector> bias(std::size_t l) const {
    return {params_.data() + offsets_[l] + weight_size(l), widths_[l + 1]};
  }

  /// Forward pass that records what backward() needs.
  Matrix forward(const Matrix& input) {
    check_input(input);
    const std::size_t layers = layer_count();
    inputs_.resize(layers);
    pre_.resize(layers);
    out_.resize(layers);
    const Matrix* x = &input;
    for (std::size_t l = 0; l < layers; ++l) {
      inputs_[l] = *x;
      pre_[l].noalias() = weight(l) * *x;
      pre_[l].colwise() += bias(l);
      out_[l] = apply(activations_[l], pre_[l]);
      x = &out_[l];
    }
    recorded_ = true;
    return out_.back();
  }

  /// Forward pass with no recording.
  Matrix evaluate(const Matrix& input) const {
    check_input(input);
    Matrix x = input;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      Matrix z = weight(l) * x;
      z.colwise() += bias(l);
      x = apply(activations_[l], z);
    }
    return x;
  }

  std::vector<double> evaluate(std::span<const double> input) const {
    const Matrix col = Eigen::Map<const Matrix>(input.data(), static_cast<Eigen::Index>(input.size()), 1);
    const Matrix out = evaluate(col);
    return {out.data(), out.data() + out.size()};
  }

  /// Reverse pass over the last recorded forward. Adds parameter gradients
  /// into gradients() when `accumulate` is set and returns d loss / d input.
  Matrix backward(const Matrix& upstream, bool accumulate = true) {
    if (!recorded_) throw InputError("DenseNet::backward: no recorded forward pass");
    if (upstream.rows() != output_width() || upstream.cols() != out_.back().cols()) {
      throw ShapeError("DenseNet::backward: upstream gradient shape mismatch");
    }
    Matrix delta = upstream;
    for (std::size_t l = layer_count(); l-- > 0;) {
      if (activations_[l] != Activation::kLinear) {
        delta = delta.cwiseProduct(slopes(activations_[l], pre_[l], out_[l]));
      }
      if (accumulate) {
        Eigen::Map<Matrix> gw(grads_.data() + offsets_[l], widths_[l + 1], widths_[l]);
        Eigen::Map<Vector> gb(grads_.data() + offsets_[l] + weight_size(l), widths_[l + 1]);
        gw.noalias() += delta * inputs_[l].transpose();
        gb += delta.rowwise().sum();
      }
      delta = weight(l).transpose() * delta;
    }
    return delta;
  }

 private:
  std::size_t weight_size(std::size_t l) const {
    return static_cast<std::size_t>(widths_[l + 1]) * static_cast<std::size_t>(widths_[l]);
  }
  std::pair<std::size_t, std::size_t> layer_range(std::size_t l) const {
    return {offsets_[l], offsets_[l] + weight_size(l) + static_cast<std::size_t>(widths_[l + 1])};
  }
  void check_input(const Matrix& input) const {
    if (widths_.empty()) throw ShapeError("DenseNet: empty network");
    if (input.rows() != input_width()) {
      throw ShapeError("DenseNet: input width " + std::to_string(input.rows()) + " != " +
                       std::to_string(input_width()));
    }
  }
  static Matrix apply(Activation a, const Matrix& z) {
    if (a == Activation::kLinear) return z;
    return z.unaryExpr([a](double v) { return activate(a, v); });
  }
  static Matrix slopes(Activation a, const Matrix& z, const Matrix& y) {
    return z.binaryExpr(y, [a](double zv, double yv) { return activation_slope(a, zv, yv); });
  }

  std::vector<int> widths_;
  std::vector<Activation> activations_;
  std::vector<std::size_t> offsets_;
  // Aligned storage keeps Eigen's vectorized reductions on the same lane split
  // every run; plain std::vector alignment varies and so do the last bits.
  std::vector<double, Eigen::aligned_allocator<double>> params_;
  std::vector<double, Eigen::aligned_allocator<double>> grads_;
  std::vector<Matrix> inputs_, pre_, out_;
  bool recorded_ = false;
};

/// target <- (1 - c) target + c source, elementwise over the flat parameters.
inline void polyak_update(DenseNet& target, const DenseNet& source, double c) {
  auto t = target.parameters();
  auto s = source.parameters();
  if (t.size() != s.size()) throw ShapeError("polyak_update: parameter count mismatch");
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - c) * t[i] + c * s[i];
}

}  // namespace hyssra::nn
