#pragma once

#include <array>
#include <span>

#include "hyssra/errors.hpp"
#include "hyssra/neural_core/dense_net.hpp"

namespace hyssra::mhsac {

using nn::Activation;
using nn::DenseNet;
using nn::Matrix;

/// Feed-forward QMIX mixer. Hypernetworks read the joint state s and emit
///   W1 = |hyper_w1(s)| (E x N), b1 = hyper_b1(s), w2 = |hyper_w2(s)|, V(s),
/// and Q_tot = w2 . elu(W1 q + b1) + V(s), monotone in every q^n.
class Mixer {
 public:
  Mixer() = default;

  template <class URBG>
  Mixer(int agents, int state_width, int embed, URBG& rng) : agents_(agents), embed_(embed) {
    if (agents < 1 || state_width < 1 || embed < 1) throw ShapeError("Mixer: widths must be >= 1");
    const std::array<int, 2> w1{state_width, agents * embed};
    const std::array<int, 2> e{state_width, embed};
    const std::array<int, 3> v{state_width, embed, 1};
    hyper_w1_ = DenseNet::mlp(w1, Activation::kLinear, Activation::kLinear, rng);
    hyper_b1_ = DenseNet::mlp(e, Activation::kLinear, Activation::kLinear, rng);
    hyper_w2_ = DenseNet::mlp(e, Activation::kLinear, Activation::kLinear, rng);
    value_ = DenseNet::mlp(v, Activation::kElu, Activation::kLinear, rng);
  }

  int agents() const { return agents_; }
  int embed() const { return embed_; }
  int state_width() const { return hyper_b1_.input_width(); }

  std::array<DenseNet*, 4> nets() { return {&hyper_w1_, &hyper_b1_, &hyper_w2_, &value_}; }
  std::array<const DenseNet*, 4> nets() const { return {&hyper_w1_, &hyper_b1_, &hyper_w2_, &value_}; }

  /// q: N x B, state: S x B. Returns 1 x B and records for backward().
  Matrix forward(const Matrix& q, const Matrix& state) {
    check(q, state);
    q_ = q;
    w1_raw_ = hyper_w1_.forward(state);
    const Matrix b1 = hyper_b1_.forward(state);
    w2_raw_ = hyper_w2_.forward(state);
    const Matrix v = value_.forward(state);
    hidden_pre_ = b1;
    for (Eigen::Index b = 0; b < q.cols(); ++b) {
      for (int n = 0; n < agents_; ++n) {
        for (int e = 0; e < embed_; ++e) {
          hidden_pre_(e, b) += std::abs(w1_raw_(n * embed_ + e, b)) * q(n, b);
        }
      }
    }
    hidden_ = hidden_pre_.unaryExpr([](double z) { return nn::activate(Activation::kElu, z); });
    Matrix out = v;
    out.row(0) += (w2_raw_.cwiseAbs().cwiseProduct(hidden_)).colwise().sum();
    recorded_ = true;
    return out;
  }

  /// Non-recording evaluation.
  Matrix evaluate(const Matrix& q, const Matrix& state) const {
    check(q, state);
    const Matrix w1 = hyper_w1_.evaluate(state);
    Matrix hidden = hyper_b1_.evaluate(state);
    const Matrix w2 = hyper_w2_.evaluate(state);
    Matrix out = value_.evaluate(state);
    for (Eigen::Index b = 0; b < q.cols(); ++b) {
      for (int n = 0; n < agents_; ++n) {
        for (int e = 0; e < embed_; ++e) hidden(e, b) += std::abs(w1(n * embed_ + e, b)) * q(n, b);
      }
    }
    hidden = hidden.unaryExpr([](double z) { return nn::activate(Activation::kElu, z); });
    out.row(0) += (w2.cwiseAbs().cwiseProduct(hidden)).colwise().sum();
    return out;
  }

  /// Accumulates hypernetwork gradients for upstream dL/dQ_tot (1 x B) and
  /// returns dL/dq (N x B).
  Matrix backward(const Matrix& upstream) {
    if (!recorded_) throw InputError("Mixer::backward: no recorded forward pass");
    const Eigen::Index batch = q_.cols();
    if (upstream.rows() != 1 || upstream.cols() != batch) throw ShapeError("Mixer::backward: bad upstream");
    value_.backward(upstream);

    Matrix d_w2(embed_, batch);
    Matrix d_pre(embed_, batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int e = 0; e < embed_; ++e) {
        const double g = upstream(0, b);
        d_w2(e, b) = g * hidden_(e, b) * sign(w2_raw_(e, b));
        const double d_hidden = g * std::abs(w2_raw_(e, b));
        d_pre(e, b) = d_hidden * nn::activation_slope(Activation::kElu, hidden_pre_(e, b), hidden_(e, b));
      }
    }
    hyper_w2_.backward(d_w2);
    hyper_b1_.backward(d_pre);

    Matrix d_w1(agents_ * embed_, batch);
    Matrix d_q = Matrix::Zero(agents_, batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int n = 0; n < agents_; ++n) {
        for (int e = 0; e < embed_; ++e) {
          const double raw = w1_raw_(n * embed_ + e, b);
          d_w1(n * embed_ + e, b) = d_pre(e, b) * q_(n, b) * sign(raw);
          d_q(n, b) += d_pre(e, b) * std::abs(raw);
        }
      }
    }
    hyper_w1_.backward(d_w1);
    return d_q;
  }

  void zero_gradients() {
    for (DenseNet* net : nets()) net->zero_gradients();
  }

 private:
  static double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
  void check(const Matrix& q, const Matrix& state) const {
    if (q.rows() != agents_) throw ShapeError("Mixer: expected one Q row per agent");
    if (state.rows() != state_width() || state.cols() != q.cols()) {
      throw ShapeError("Mixer: state shape mismatch");
    }
  }

  int agents_ = 0;
  int embed_ = 0;
  DenseNet hyper_w1_, hyper_b1_, hyper_w2_, value_;
  Matrix q_, w1_raw_, w2_raw_, hidden_pre_, hidden_;
  bool recorded_ = false;
};

inline void polyak_update(Mixer& target, const Mixer& source, double c) {
  auto t = target.nets();
  auto s = source.nets();
  for (std::size_t i = 0; i < t.size(); ++i) nn::polyak_update(*t[i], *s[i], c);
}

}  // namespace hyssra::mhsac
