#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>
#include <vector>

#include "hyssra/neural_core/adam.hpp"
#include "hyssra/neural_core/checkpoint.hpp"
#include "hyssra/neural_core/dense_net.hpp"
#include "hyssra/neural_core/distributions.hpp"
#include "hyssra/neural_core/grad_check.hpp"
#include "hyssra/rng.hpp"

using namespace hyssra;
using namespace hyssra::nn;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST(DenseNet, ZeroNetGivesZeroOutput) {
  DenseNet net({3, 5, 2}, {Activation::kElu, Activation::kLinear});
  const Matrix y = net.forward(column({1.0, -2.0, 3.0}));
  EXPECT_EQ(y.rows(), 2);
  EXPECT_EQ(y.norm(), 0.0);
}

TEST(DenseNet, IdentityLayerEchoesInput) {
  DenseNet net({3, 3}, {Activation::kLinear});
  net.weight(0) = Matrix::Identity(3, 3);
  const Matrix x = column({0.5, -7.0, 2.25});
  EXPECT_EQ(net.forward(x), x);
  EXPECT_EQ(net.evaluate(x), x);
}

TEST(DenseNet, TwoLayerHandComputed) {
  DenseNet net({2, 2, 2}, {Activation::kElu, Activation::kLinear});
  net.weight(0) << 1.0, 2.0, -3.0, 0.5;
  net.bias(0) << 0.1, 0.2;
  net.weight(1) << 0.4, -1.0, 2.0, 3.0;
  net.bias(1) << -0.5, 0.25;
  const Matrix x = column({0.3, -0.7});
  // z1 = (0.3 - 1.4 + 0.1, -0.9 - 0.35 + 0.2) = (-1.0, -1.05); elu -> e^z - 1
  const double h0 = std::exp(-1.0) - 1.0;
  const double h1 = std::exp(-1.05) - 1.0;
  const Matrix y = net.forward(x);
  EXPECT_NEAR(y(0, 0), 0.4 * h0 - 1.0 * h1 - 0.5, 1e-12);
  EXPECT_NEAR(y(1, 0), 2.0 * h0 + 3.0 * h1 + 0.25, 1e-12);
}

TEST(DenseNet, ShapeErrors) {
  DenseNet net({3, 2}, {Activation::kLinear});
  EXPECT_THROW(net.forward(column({1.0, 2.0})), ShapeError);
  EXPECT_THROW(DenseNet({3}, {}), ShapeError);
  EXPECT_THROW(DenseNet({3, 2}, {Activation::kLinear, Activation::kLinear}), ShapeError);
  net.forward(column({1.0, 2.0, 3.0}));
  EXPECT_THROW(net.backward(column({1.0})), ShapeError);
}

TEST(DenseNet, BackwardWithoutForwardRejected) {
  DenseNet net({2, 1}, {Activation::kLinear});
  EXPECT_THROW(net.backward(column({1.0})), InputError);
}

TEST(DenseNet, LinearWeightGradientIsInput) {
  DenseNet net({3, 1}, {Activation::kLinear});
  const Matrix x = column({0.5, -2.0, 4.0});
  net.forward(x);
  net.backward(column({1.0}));
  const auto g = net.gradients();
  EXPECT_EQ(g[0], 0.5);
  EXPECT_EQ(g[1], -2.0);
  EXPECT_EQ(g[2], 4.0);
  EXPECT_EQ(g[3], 1.0);  // bias
}

TEST(DenseNet, EluSlopeAtNegativePreActivation) {
  DenseNet net({1, 1}, {Activation::kElu});
  net.weight(0)(0, 0) = 1.0;
  const double z = -0.8;
  net.forward(column({z}));
  const Matrix dx = net.backward(column({1.0}));
  EXPECT_NEAR(dx(0, 0), std::exp(z), 1e-15);
  EXPECT_NEAR(net.gradients()[1], std::exp(z), 1e-15);
}

TEST(DenseNet, TanhSlope) {
  DenseNet net({1, 1}, {Activation::kTanh});
  net.weight(0)(0, 0) = 1.0;
  net.forward(column({0.6}));
  EXPECT_NEAR(net.backward(column({1.0}))(0, 0), 1.0 - std::tanh(0.6) * std::tanh(0.6), 1e-15);
}

TEST(DenseNet, BackwardMatchesFiniteDifferences) {
  Rng rng(7);
  const std::vector<int> widths{3, 4, 3, 2};
  for (Activation hidden : {Activation::kElu, Activation::kTanh}) {
    DenseNet net = DenseNet::mlp(std::span<const int>(widths), hidden, Activation::kLinear, rng);
    ASSERT_LE(net.parameter_count(), 64u);
    Matrix x(3, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    Matrix w(2, 5);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = standard_normal(rng);
    auto loss = [&] { return net.evaluate(x).cwiseProduct(w).sum(); };
    net.zero_gradients();
    net.forward(x);
    const Matrix dx = net.backward(w);
    const std::vector<double> analytic(net.gradients().begin(), net.gradients().end());
    EXPECT_LT(grad_check(net.parameters(), analytic, loss).max_relative_error, 1e-4);
    // Input gradient.
    std::vector<double> input(x.data(), x.data() + x.size());
    auto loss_x = [&] {
      const Matrix xi = Eigen::Map<const Matrix>(input.data(), 3, 5);
      return net.evaluate(xi).cwiseProduct(w).sum();
    };
    const std::vector<double> analytic_x(dx.data(), dx.data() + dx.size());
    EXPECT_LT(grad_check(std::span<double>(input), analytic_x, loss_x).max_relative_error, 1e-4);
  }
}

TEST(DenseNet, BackwardAccumulates) {
  Rng rng(8);
  const std::vector<int> widths{2, 3, 1};
  DenseNet net = DenseNet::mlp(std::span<const int>(widths), Activation::kElu, Activation::kLinear, rng);
  const Matrix x = column({0.2, -0.4});
  net.forward(x);
  net.backward(column({1.0}));
  const std::vector<double> once(net.gradients().begin(), net.gradients().end());
  net.backward(column({1.0}));
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(net.gradients()[i], 2.0 * once[i]);
  net.backward(column({1.0}), false);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(net.gradients()[i], 2.0 * once[i]);
}

TEST(DenseNet, Deterministic) {
  Rng a(5), b(5);
  const std::vector<int> widths{4, 8, 3};
  DenseNet x = DenseNet::mlp(std::span<const int>(widths), Activation::kElu, Activation::kLinear, a);
  DenseNet y = DenseNet::mlp(std::span<const int>(widths), Activation::kElu, Activation::kLinear, b);
  const Matrix in = column({1.0, 2.0, 3.0, 4.0});
  EXPECT_EQ(x.forward(in), y.evaluate(in));
}

TEST(GradCheck, LinearRegressionLoss) {
  // L = 0.5 sum (w . x_i - t_i)^2
  std::vector<double> w{0.3, -1.2};
  const std::vector<std::vector<double>> xs{{1.0, 2.0}, {-0.5, 0.7}, {3.0, -1.0}};
  const std::vector<double> ts{0.4, -2.0, 1.5};
  auto loss = [&] {
    double l = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = w[0] * xs[i][0] + w[1] * xs[i][1] - ts[i];
      l += 0.5 * r * r;
    }
    return l;
  };
  std::vector<double> g(2, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = w[0] * xs[i][0] + w[1] * xs[i][1] - ts[i];
    g[0] += r * xs[i][0];
    g[1] += r * xs[i][1];
  }
  const std::vector<double> saved = w;
  EXPECT_LT(grad_check(std::span<double>(w), g, loss).max_relative_error, 1e-6);
  EXPECT_EQ(w, saved);
  g[1] *= 1.1;  // corrupted
  EXPECT_GT(grad_check(std::span<double>(w), g, loss).max_relative_error, 1e-2);
}

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<double> p{1.0, -2.0};
  Adam opt(2, {});
  const std::vector<double> zero{0.0, 0.0};
  for (int i = 0; i < 10; ++i) opt.step(p, zero);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, ConstantGradientStepsByLearningRate) {
  std::vector<double> p{0.0, 0.0};
  Adam opt(2, {0.01, 0.9, 0.999, 1e-8});
  const std::vector<double> g{3.0, -0.5};
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> before = p;
    opt.step(p, g);
    EXPECT_NEAR(p[0] - before[0], -0.01, 1e-8);
    EXPECT_NEAR(p[1] - before[1], 0.01, 1e-8);
  }
}

TEST(Adam, ScalarQuadraticConverges) {
  std::vector<double> p{5.0};
  Adam opt(1, {1e-2, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 5000; ++i) {
    const std::vector<double> g{2.0 * (p[0] - 1.5)};
    opt.step(p, g);
  }
  EXPECT_NEAR(p[0], 1.5, 1e-3);
}

TEST(Adam, NonFiniteGradientSignalsDivergence) {
  std::vector<double> p{1.0};
  Adam opt(1, {});
  EXPECT_THROW(opt.step(p, std::vector<double>{std::nan("")}), DivergenceError);
  EXPECT_THROW(opt.step(p, std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST(Polyak, Examples) {
  DenseNet src({2, 1}, {Activation::kLinear});
  for (double& v : src.parameters()) v = 2.0;
  DenseNet dst({2, 1}, {Activation::kLinear});
  polyak_update(dst, src, 0.0);
  for (double v : dst.parameters()) EXPECT_EQ(v, 0.0);
  polyak_update(dst, src, 1.0);
  for (double v : dst.parameters()) EXPECT_EQ(v, 2.0);
}

TEST(Categorical, EqualLogitsMaximalEntropy) {
  const Categorical c = softmax_categorical(std::vector<double>{0.3, 0.3, 0.3, 0.3});
  EXPECT_NEAR(c.entropy, std::log(4.0), 1e-15);
  for (double p : c.probs) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(Categorical, DominantLogitZeroEntropy) {
  const Categorical c = softmax_categorical(std::vector<double>{0.0, 800.0, -5.0});
  EXPECT_LT(c.entropy, 1e-12);
  EXPECT_DOUBLE_EQ(c.probs[1], 1.0);
  for (double lp : c.log_probs) EXPECT_TRUE(std::isfinite(lp));
}

TEST(Categorical, SampleFrequencies) {
  Rng rng(9);
  const std::vector<double> logits{0.0, std::log(3.0)};
  int ones = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ones += categorical_from_logits(logits, rng).index;
  EXPECT_NEAR(static_cast<double>(ones) / draws, 0.75, 0.01);
}

TEST(Categorical, RejectsBadLogits) {
  Rng rng(1);
  EXPECT_THROW(softmax_categorical(std::vector<double>{}), InputError);
  EXPECT_THROW(categorical_from_logits(std::vector<double>{0.0, INFINITY}, rng), InputError);
  EXPECT_THROW(softmax_categorical(std::vector<double>{std::nan("")}), InputError);
}

TEST(Categorical, PropertiesOnRandomLogits) {
  Rng rng(10);
  for (int t = 0; t < 1000; ++t) {
    const int d = 1 + uniform_index(rng, 8);
    std::vector<double> logits;
    for (int i = 0; i < d; ++i) logits.push_back(uniform_real(rng, -30.0, 30.0));
    const Categorical c = softmax_categorical(logits);
    double sum = 0.0;
    for (double p : c.probs) sum += p;
    ASSERT_NEAR(sum, 1.0, 1e-12);
    ASSERT_GE(c.entropy, 0.0);
    ASSERT_LE(c.entropy, std::log(static_cast<double>(d)) + 1e-12);
  }
}

TEST(SquashedGaussian, TinySigmaCentersPower) {
  Rng rng(2);
  EXPECT_EQ(squashed_gaussian_from_noise(0.0, kLogStdMin, 5e-3, 0.0).power, 2.5e-3);
  for (int i = 0; i < 100; ++i) {
    EXPECT_NEAR(squashed_gaussian_sample(0.0, kLogStdMin, 5e-3, rng).power, 2.5e-3, 1e-10);  // sigma = e^-20
  }
}

TEST(SquashedGaussian, LargeMeanSaturates) {
  Rng rng(3);
  const auto d = squashed_gaussian_sample(50.0, 0.0, 5e-3, rng);
  EXPECT_NEAR(d.power, 5e-3, 1e-15);
  EXPECT_LE(d.power, 5e-3);
  EXPECT_TRUE(std::isfinite(d.log_density));
}

TEST(SquashedGaussian, StaysInsideInterval) {
  Rng rng(4);
  for (int i = 0; i < 100000; ++i) {
    const double mean = uniform_real(rng, -30.0, 30.0);
    const double ls = uniform_real(rng, kLogStdMin, kLogStdMax);
    const auto d = squashed_gaussian_sample(mean, ls, 2.0, rng);
    ASSERT_GT(d.power, 0.0);
    ASSERT_LE(d.power, 2.0);
    ASSERT_TRUE(std::isfinite(d.log_density));
    ASSERT_NEAR(d.log_density, d.unit_log_density - std::log(1.0), 1e-12);
  }
}

TEST(SquashedGaussian, RejectsLogStdOutsideClamp) {
  EXPECT_THROW(squashed_gaussian_from_noise(0.0, 2.5, 1.0, 0.0), InputError);
  EXPECT_THROW(squashed_gaussian_from_noise(0.0, -21.0, 1.0, 0.0), InputError);
}

TEST(SquashedGaussian, LogDensityAgreesWithSampleDensity) {
  const double mean = 0.3, ls = -0.5, p_max = 5e-3;
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto d = squashed_gaussian_sample(mean, ls, p_max, rng);
    if (d.power >= p_max) continue;
    EXPECT_NEAR(squashed_gaussian_log_density(d.power, mean, ls, p_max), d.log_density,
                1e-6 * std::max(1.0, std::abs(d.log_density)));
  }
  EXPECT_EQ(squashed_gaussian_log_density(0.0, mean, ls, p_max), -INFINITY);
}

TEST(SquashedGaussian, HistogramKlAgainstDensity) {
  // 1e6 samples, 200 bins; model bin mass by Simpson integration of exp(log_density).
  const double mean = 0.3, ls = -0.5, p_max = 5e-3;
  const int bins = 200;
  const int samples = 1000000;
  Rng rng(6);
  std::vector<double> counts(bins, 0.0);
  for (int i = 0; i < samples; ++i) {
    const double p = squashed_gaussian_sample(mean, ls, p_max, rng).power;
    counts[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(p / p_max * bins)))] += 1.0;
  }
  const double width = p_max / bins;
  double kl = 0.0;
  double mass = 0.0;
  for (int b = 0; b < bins; ++b) {
    const int sub = 64;
    const double h = width / sub;
    auto f = [&](double p) {
      const double v = squashed_gaussian_log_density(p, mean, ls, p_max);
      return std::isfinite(v) ? std::exp(v) : 0.0;
    };
    double s = f(b * width) + f((b + 1) * width);
    for (int j = 1; j < sub; ++j) s += (j % 2 ? 4.0 : 2.0) * f(b * width + j * h);
    const double q = s * h / 3.0;
    mass += q;
    const double p = counts[static_cast<std::size_t>(b)] / samples;
    if (p > 0.0) kl += p * std::log(p / q);
  }
  EXPECT_NEAR(mass, 1.0, 1e-6);
  EXPECT_LT(kl, 1e-3);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(11);
  const std::vector<int> widths{5, 7, 3};
  DenseNet net = DenseNet::mlp(std::span<const int>(widths), Activation::kElu, Activation::kTanh, rng);
  std::stringstream buf;
  write_net(buf, net);
  const DenseNet back = read_net(buf);
  EXPECT_EQ(back.widths(), net.widths());
  EXPECT_EQ(back.activations(), net.activations());
  ASSERT_EQ(back.parameter_count(), net.parameter_count());
  for (std::size_t i = 0; i < net.parameter_count(); ++i) EXPECT_EQ(back.parameters()[i], net.parameters()[i]);
}

TEST(Checkpoint, HeaderLayout) {
  DenseNet net({2, 1}, {Activation::kElu});
  net.parameters()[0] = 1.5;
  std::stringstream buf;
  write_net(buf, net);
  const std::string bytes = buf.str();
  // magic 4 + version 4 + L 4 + widths 8 + tags 1 + count 8 + 3 doubles
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 1 + 8 + 24);
  EXPECT_EQ(bytes.substr(0, 4), "HSNN");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[20]), 1);  // ELU tag
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 29, sizeof first);
  EXPECT_EQ(first, 1.5);
}

TEST(Checkpoint, RejectsCorruptInput) {
  DenseNet net({2, 1}, {Activation::kLinear});
  std::stringstream buf;
  write_net(buf, net);
  std::string bytes = buf.str();
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream a(bad_magic);
  EXPECT_THROW(read_net(a), InputError);
  std::stringstream b(bytes.substr(0, bytes.size() - 4));
  EXPECT_THROW(read_net(b), InputError);
  std::string bad_tag = bytes;
  bad_tag[20] = 9;
  std::stringstream c(bad_tag);
  EXPECT_THROW(read_net(c), InputError);
}
