#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <utility>
#include <string>
#include <vector>

#include "hyssra/crn_environment.hpp"
#include "hyssra/errors.hpp"
#include "hyssra/mhsac/mixer.hpp"
#include "hyssra/mhsac/replay_buffer.hpp"
#include "hyssra/neural_core/adam.hpp"
#include "hyssra/neural_core/checkpoint.hpp"
#include "hyssra/neural_core/dense_net.hpp"
#include "hyssra/neural_core/distributions.hpp"
#include "hyssra/rng.hpp"

namespace hyssra::mhsac {

using nn::Vector;

struct MhsacOptions {
  int agents = 2;         // N
  int sensed = 2;         // M; D = M + 1 arms
  std::vector<double> max_power;  // p_max per SU, W
  double noise_variance = 1.0;    // sigma^2, scales the T features
  std::vector<int> hidden{256, 128, 64};
  int mixer_embed = 32;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double temperature_lr = 1e-3;
  double gamma = 0.4;
  double polyak = 0.005;
  int batch_size = 64;
  int buffer_capacity = 30000;
  int policy_frequency = 10;
  int warmup_steps = 1000;
  double target_entropy_discrete = 0.02;  // 0.01 M
  double target_entropy_continuous = 0.0;
  double initial_alpha_discrete = 0.05;
  double initial_alpha_continuous = 0.05;

  int arms() const { return sensed + 1; }
  int feature_width() const { return 2 * sensed; }
  int state_width() const { return agents * feature_width(); }
};

inline void validate(const MhsacOptions& o) {
  if (o.agents < 1) throw ConfigError("training: N must be >= 1");
  if (o.sensed < 1) throw ConfigError("training: M must be >= 1");
  if (static_cast<int>(o.max_power.size()) != o.agents) throw ConfigError("training: need one p_max per SU");
  if (!(o.noise_variance > 0.0)) throw ConfigError("training: noise variance must be > 0");
  for (int h : o.hidden) {
    if (h < 1) throw ConfigError("training.hidden_layers: widths must be >= 1");
  }
  if (o.mixer_embed < 1) throw ConfigError("training.mixer_embed: must be >= 1");
  if (!(o.actor_lr > 0.0) || !(o.critic_lr > 0.0) || !(o.temperature_lr > 0.0)) {
    throw ConfigError("training: learning rates must be > 0");
  }
  if (!(o.gamma >= 0.0 && o.gamma < 1.0)) throw ConfigError("training.gamma: must satisfy 0 <= gamma < 1");
  if (!(o.polyak > 0.0 && o.polyak <= 1.0)) throw ConfigError("training.polyak: must be in (0, 1]");
  if (o.batch_size < 1) throw ConfigError("training.batch_size: must be >= 1");
  if (o.buffer_capacity < o.batch_size) throw ConfigError("training.buffer_capacity: must be >= batch_size");
  if (o.policy_frequency < 1) throw ConfigError("training.policy_frequency: must be >= 1");
  if (o.warmup_steps < 0) throw ConfigError("training.warmup_steps: must be >= 0");
  if (!(o.initial_alpha_discrete > 0.0) || !(o.initial_alpha_continuous > 0.0)) {
    throw ConfigError("training: initial temperatures must be > 0");
  }
}

/// Local features of one SU: beliefs, then log(T / sigma^2) floored at log 1e-3.
inline std::vector<double> encode_observation(const env::Observation& obs, double noise_variance) {
  std::vector<double> f;
  f.reserve(obs.beliefs.size() * 2);
  for (int b : obs.beliefs) f.push_back(static_cast<double>(b));
  for (double t : obs.statistics) f.push_back(std::log(std::max(t / noise_variance, 1e-3)));
  return f;
}

inline std::vector<double> encode_joint(const std::vector<env::Observation>& joint, double noise_variance) {
  std::vector<double> f;
  for (const auto& obs : joint) {
    const auto one = encode_observation(obs, noise_variance);
    f.insert(f.end(), one.begin(), one.end());
  }
  return f;
}

/// Minibatch in column layout.
struct Batch {
  int size = 0;
  std::vector<Matrix> obs;       // per agent, 2M x B
  std::vector<Matrix> next_obs;  // per agent, 2M x B
  Matrix state;                  // N 2M x B
  Matrix next_state;
  std::vector<std::vector<int>> arms;  // per agent, B
  std::vector<Matrix> units;           // per agent, 1 x B
  Vector reward;                       // B
};

inline Batch make_batch(const std::vector<Transition>& items, int agents, int feature_width) {
  Batch b;
  b.size = static_cast<int>(items.size());
  const int width = agents * feature_width;
  b.state.resize(width, b.size);
  b.next_state.resize(width, b.size);
  b.reward.resize(b.size);
  b.arms.assign(static_cast<std::size_t>(agents), std::vector<int>(static_cast<std::size_t>(b.size)));
  b.units.assign(static_cast<std::size_t>(agents), Matrix(1, b.size));
  for (int i = 0; i < b.size; ++i) {
    const Transition& t = items[static_cast<std::size_t>(i)];
    if (static_cast<int>(t.features.size()) != width || static_cast<int>(t.next_features.size()) != width ||
        static_cast<int>(t.arms.size()) != agents || static_cast<int>(t.unit_actions.size()) != agents) {
      throw ShapeError("make_batch: transition does not match N and M");
    }
    for (int r = 0; r < width; ++r) {
      b.state(r, i) = t.features[static_cast<std::size_t>(r)];
      b.next_state(r, i) = t.next_features[static_cast<std::size_t>(r)];
    }
    for (int n = 0; n < agents; ++n) {
      b.arms[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)] = t.arms[static_cast<std::size_t>(n)];
      b.units[static_cast<std::size_t>(n)](0, i) = t.unit_actions[static_cast<std::size_t>(n)];
    }
    b.reward(i) = t.reward;
  }
  for (int n = 0; n < agents; ++n) {
    b.obs.push_back(b.state.middleRows(n * feature_width, feature_width));
    b.next_obs.push_back(b.next_state.middleRows(n * feature_width, feature_width));
  }
  return b;
}

/// What act() returns: the env action plus the normalized power tanh(u).
struct Decision {
  env::Action action;
  double unit_action = 0.0;
};

/// Per-agent policy statistics produced while computing the actor loss.
struct ActorLossResult {
  double loss = 0.0;
  double discrete_entropy = 0.0;    // mean over agents and batch of H(pi_d)
  double continuous_entropy = 0.0;  // mean of -log pi_c on the unit scale
};

struct TemperatureLosses {
  double discrete = 0.0;
  double continuous = 0.0;
};

/// Hybrid-action multi-agent SAC with twin D-headed critics per agent and
/// twin QMIX mixers.
class Mhsac {
 public:
  Mhsac(MhsacOptions options, std::uint64_t seed) : opt_(std::move(options)), rng_(seed) {
    validate(opt_);
    const auto n_agents = static_cast<std::size_t>(opt_.agents);
    std::vector<int> actor_widths{opt_.feature_width()};
    std::vector<int> critic_widths{opt_.feature_width() + 1};
    for (int h : opt_.hidden) {
      actor_widths.push_back(h);
      critic_widths.push_back(h);
    }
    actor_widths.push_back(opt_.arms() + 2);
    critic_widths.push_back(opt_.arms());
    for (std::size_t n = 0; n < n_agents; ++n) {
      actors_.push_back(DenseNet::mlp(actor_widths, Activation::kElu, Activation::kLinear, rng_));
      for (int i = 0; i < 2; ++i) {
        critics_[i].push_back(DenseNet::mlp(critic_widths, Activation::kElu, Activation::kLinear, rng_));
        target_critics_[i].push_back(critics_[i].back());
      }
    }
    for (int i = 0; i < 2; ++i) {
      mixers_[i] = Mixer(opt_.agents, opt_.state_width(), opt_.mixer_embed, rng_);
      target_mixers_[i] = mixers_[i];
    }
    const nn::AdamOptions actor_adam{opt_.actor_lr};
    const nn::AdamOptions critic_adam{opt_.critic_lr};
    for (auto& a : actors_) actor_opt_.emplace_back(a.parameter_count(), actor_adam);
    for (int i = 0; i < 2; ++i) {
      for (auto& c : critics_[i]) critic_opt_[i].emplace_back(c.parameter_count(), critic_adam);
      for (DenseNet* net : mixers_[i].nets()) mixer_opt_[i].emplace_back(net->parameter_count(), critic_adam);
    }
    log_alpha_d_ = std::log(opt_.initial_alpha_discrete);
    log_alpha_c_ = std::log(opt_.initial_alpha_continuous);
    alpha_d_opt_ = nn::Adam(1, nn::AdamOptions{opt_.temperature_lr});
    alpha_c_opt_ = nn::Adam(1, nn::AdamOptions{opt_.temperature_lr});
  }

  const MhsacOptions& options() const { return opt_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

  double alpha_discrete() const { return std::exp(log_alpha_d_); }
  double alpha_continuous() const { return std::exp(log_alpha_c_); }
  double log_alpha_discrete() const { return log_alpha_d_; }
  double log_alpha_continuous() const { return log_alpha_c_; }
  void set_log_alphas(double d, double c) {
    log_alpha_d_ = d;
    log_alpha_c_ = c;
  }

  DenseNet& actor(int n) { return actors_.at(static_cast<std::size_t>(n)); }
  const DenseNet& actor(int n) const { return actors_.at(static_cast<std::size_t>(n)); }
  DenseNet& critic(int i, int n) { return critics_.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(n)); }
  DenseNet& target_critic(int i, int n) {
    return target_critics_.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(n));
  }
  Mixer& mixer(int i) { return mixers_.at(static_cast<std::size_t>(i)); }
  Mixer& target_mixer(int i) { return target_mixers_.at(static_cast<std::size_t>(i)); }

  /// Decentralized action from SU n's own features.
  template <class URBG>
  Decision act(int n, std::span<const double> features, URBG& rng, bool deterministic) const {
    if (static_cast<int>(features.size()) != opt_.feature_width()) {
      throw ShapeError("act: observation width must be 2M");
    }
    const std::vector<double> out = actor(n).evaluate(features);
    const int d = opt_.arms();
    const std::span<const double> logits(out.data(), static_cast<std::size_t>(d));
    const double mean = out[static_cast<std::size_t>(d)];
    const double log_std = std::clamp(out[static_cast<std::size_t>(d) + 1], nn::kLogStdMin, nn::kLogStdMax);
    const double p_max = opt_.max_power[static_cast<std::size_t>(n)];
    Decision dec;
    if (deterministic) {
      nn::softmax_categorical(logits);  // rejects non-finite logits
      dec.action.choice = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
      const auto draw = nn::squashed_gaussian_from_noise(mean, log_std, p_max, 0.0);
      dec.action.power = draw.power;
      dec.unit_action = draw.unit_action;
    } else {
      dec.action.choice = nn::categorical_from_logits(logits, rng).index;
      const auto draw = nn::squashed_gaussian_sample(mean, log_std, p_max, rng);
      dec.action.power = draw.power;
      dec.unit_action = draw.unit_action;
    }
    return dec;
  }

  /// Uniform arm and uniform power, used before learning starts.
  template <class URBG>
  Decision random_action(int n, URBG& rng) const {
    Decision dec;
    dec.action.choice = uniform_index(rng, opt_.arms());
    dec.unit_action = uniform_real(rng, -1.0, 1.0);
    const double p_max = opt_.max_power[static_cast<std::size_t>(n)];
    dec.action.power = std::max(p_max * (dec.unit_action + 1.0) / 2.0, std::numeric_limits<double>::min());
    return dec;
  }

  /// One standard-normal row (1 x B) per agent.
  template <class URBG>
  std::vector<Matrix> draw_noise(int batch, URBG& rng) const {
    std::vector<Matrix> noise(static_cast<std::size_t>(opt_.agents), Matrix(1, batch));
    for (auto& row : noise) {
      for (int b = 0; b < batch; ++b) row(0, b) = standard_normal(rng);
    }
    return noise;
  }

  /// y = r + gamma (min_j Qtot'_j(pi^T q'_j; s') + sum_n H^n), with the next
  /// continuous action drawn from the current policy using `noise`.
  Vector target_values(const Batch& batch, const std::vector<Matrix>& noise) const {
    const int bsz = batch.size;
    const int d = opt_.arms();
    Matrix expected[2] = {Matrix(opt_.agents, bsz), Matrix(opt_.agents, bsz)};
    Vector entropy = Vector::Zero(bsz);
    const double ad = alpha_discrete();
    const double ac = alpha_continuous();
    for (int n = 0; n < opt_.agents; ++n) {
      const auto un = static_cast<std::size_t>(n);
      const PolicyOutput pol = policy(actor(n).evaluate(batch.next_obs[un]), noise.at(un));
      Matrix input(opt_.feature_width() + 1, bsz);
      input.topRows(opt_.feature_width()) = batch.next_obs[un];
      input.bottomRows(1) = pol.unit;
      for (int j = 0; j < 2; ++j) {
        const Matrix q = target_critics_[j][un].evaluate(input);
        for (int b = 0; b < bsz; ++b) {
          double v = 0.0;
          for (int a = 0; a < d; ++a) v += pol.probs(a, b) * q(a, b);
          expected[j](n, b) = v;
        }
      }
      for (int b = 0; b < bsz; ++b) entropy(b) += ad * pol.entropy(b) - ac * pol.unit_log_density(b);
    }
    const Matrix q1 = target_mixers_[0].evaluate(expected[0], batch.next_state);
    const Matrix q2 = target_mixers_[1].evaluate(expected[1], batch.next_state);
    Vector y(bsz);
    for (int b = 0; b < bsz; ++b) {
      y(b) = batch.reward(b) + opt_.gamma * (std::min(q1(0, b), q2(0, b)) + entropy(b));
    }
    return y;
  }

  /// 1/2 sum_i mean_b (y - Qtot_i)^2. Leaves gradients in the critics and mixers.
  double critic_loss(const Batch& batch, const Vector& y) {
    const int bsz = batch.size;
    double loss = 0.0;
    for (int i = 0; i < 2; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      mixers_[ui].zero_gradients();
      Matrix taken(opt_.agents, bsz);
      for (int n = 0; n < opt_.agents; ++n) {
        const auto un = static_cast<std::size_t>(n);
        DenseNet& net = critics_[ui][un];
        net.zero_gradients();
        const Matrix q = net.forward(critic_input(batch.obs[un], batch.units[un]));
        for (int b = 0; b < bsz; ++b) taken(n, b) = q(batch.arms[un][static_cast<std::size_t>(b)], b);
      }
      const Matrix qtot = mixers_[ui].forward(taken, batch.state);
      Matrix upstream(1, bsz);
      for (int b = 0; b < bsz; ++b) {
        const double err = qtot(0, b) - y(b);
        loss += 0.5 * err * err / bsz;
        upstream(0, b) = err / bsz;
      }
      const Matrix d_taken = mixers_[ui].backward(upstream);
      for (int n = 0; n < opt_.agents; ++n) {
        const auto un = static_cast<std::size_t>(n);
        Matrix d_q = Matrix::Zero(opt_.arms(), bsz);
        for (int b = 0; b < bsz; ++b) d_q(batch.arms[un][static_cast<std::size_t>(b)], b) = d_taken(n, b);
        critics_[ui][un].backward(d_q);
      }
    }
    return loss;
  }

  /// mean_b sum_n { sum_a pi(a) [alpha_d log pi(a) - min_j q_j(a)] + alpha_c log pi_c },
  /// the continuous action reparameterized as tanh(mu + sigma noise). Leaves
  /// gradients in the actors only.
  ActorLossResult actor_loss(const Batch& batch, const std::vector<Matrix>& noise) {
    const int bsz = batch.size;
    const int d = opt_.arms();
    const double ad = alpha_discrete();
    const double ac = alpha_continuous();
    ActorLossResult res;
    for (int n = 0; n < opt_.agents; ++n) {
      const auto un = static_cast<std::size_t>(n);
      DenseNet& net = actors_[un];
      net.zero_gradients();
      const Matrix raw = net.forward(batch.obs[un]);
      const PolicyOutput pol = policy(raw, noise.at(un));
      const Matrix input = critic_input(batch.obs[un], pol.unit);
      Matrix q[2];
      for (int j = 0; j < 2; ++j) q[j] = critics_[static_cast<std::size_t>(j)][un].forward(input);

      Matrix upstream_critic[2] = {Matrix::Zero(d, bsz), Matrix::Zero(d, bsz)};
      Matrix d_raw = Matrix::Zero(d + 2, bsz);
      for (int b = 0; b < bsz; ++b) {
        double mean_f = 0.0;
        Vector f(d);
        for (int a = 0; a < d; ++a) {
          const int j = q[0](a, b) <= q[1](a, b) ? 0 : 1;
          const double m = q[j](a, b);
          f(a) = ad * pol.log_probs(a, b) - m;
          mean_f += pol.probs(a, b) * f(a);
          upstream_critic[j](a, b) = -pol.probs(a, b) / bsz;
        }
        res.loss += (mean_f + ac * pol.unit_log_density(b)) / bsz;
        res.discrete_entropy += pol.entropy(b);
        res.continuous_entropy -= pol.unit_log_density(b);
        for (int a = 0; a < d; ++a) d_raw(a, b) = pol.probs(a, b) * (f(a) - mean_f) / bsz;
      }
      // d loss / d a through both critics, with the critics left untouched.
      Matrix d_unit = Matrix::Zero(1, bsz);
      for (int j = 0; j < 2; ++j) {
        d_unit += critics_[static_cast<std::size_t>(j)][un].backward(upstream_critic[j], false).bottomRows(1);
      }
      for (int b = 0; b < bsz; ++b) {
        const double a = pol.unit(0, b);
        const double eps = noise[un](0, b);
        const double sigma = std::exp(pol.log_std(0, b));
        const double d_u = d_unit(0, b) * (1.0 - a * a);
        const double d_mean = d_u + ac * 2.0 * a / bsz;
        const double d_log_std = d_u * sigma * eps + ac * (-1.0 + 2.0 * a * sigma * eps) / bsz;
        d_raw(d, b) = d_mean;
        d_raw(d + 1, b) = pol.log_std_active(0, b) ? d_log_std : 0.0;
      }
      net.backward(d_raw);
    }
    const double count = static_cast<double>(opt_.agents) * bsz;
    res.discrete_entropy /= count;
    res.continuous_entropy /= count;
    return res;
  }

  /// alpha (H - H~) for each temperature; d/d log alpha has the same value.
  TemperatureLosses temperature_losses(double discrete_entropy, double continuous_entropy) const {
    return {alpha_discrete() * (discrete_entropy - opt_.target_entropy_discrete),
            alpha_continuous() * (continuous_entropy - opt_.target_entropy_continuous)};
  }

  double critic_update(const Batch& batch) {
    const Vector y = target_values(batch, draw_noise(batch.size, rng_));
    const double loss = critic_loss(batch, y);
    if (!std::isfinite(loss)) throw DivergenceError("critic loss is not finite");
    for (int i = 0; i < 2; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      for (std::size_t n = 0; n < critics_[ui].size(); ++n) {
        critic_opt_[ui][n].step(critics_[ui][n].parameters(), critics_[ui][n].gradients());
      }
      auto nets = mixers_[ui].nets();
      for (std::size_t k = 0; k < nets.size(); ++k) {
        mixer_opt_[ui][k].step(nets[k]->parameters(), nets[k]->gradients());
      }
    }
    return loss;
  }

  ActorLossResult actor_update(const Batch& batch) {
    const ActorLossResult res = actor_loss(batch, draw_noise(batch.size, rng_));
    if (!std::isfinite(res.loss)) throw DivergenceError("actor loss is not finite");
    for (std::size_t n = 0; n < actors_.size(); ++n) {
      actor_opt_[n].step(actors_[n].parameters(), actors_[n].gradients());
    }
    return res;
  }

  TemperatureLosses temperature_update(double discrete_entropy, double continuous_entropy) {
    const TemperatureLosses l = temperature_losses(discrete_entropy, continuous_entropy);
    if (!std::isfinite(l.discrete) || !std::isfinite(l.continuous)) {
      throw DivergenceError("temperature loss is not finite");
    }
    double gd = l.discrete;
    double gc = l.continuous;
    alpha_d_opt_.step(std::span<double>(&log_alpha_d_, 1), std::span<const double>(&gd, 1));
    alpha_c_opt_.step(std::span<double>(&log_alpha_c_, 1), std::span<const double>(&gc, 1));
    return l;
  }

  void target_sync(double c) {
    for (int i = 0; i < 2; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      for (std::size_t n = 0; n < critics_[ui].size(); ++n) {
        nn::polyak_update(target_critics_[ui][n], critics_[ui][n], c);
      }
      polyak_update(target_mixers_[ui], mixers_[ui], c);
    }
  }
  void target_sync() { target_sync(opt_.polyak); }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& [name, net] : const_cast<Mhsac*>(this)->named_nets()) nn::save_net(dir / name, *net);
  }

  void load(const std::filesystem::path& dir) {
    for (const auto& [name, net] : named_nets()) {
      DenseNet loaded = nn::load_net(dir / name);
      if (loaded.widths() != net->widths() || loaded.activations() != net->activations()) {
        throw InputError("checkpoint " + name + " does not match the configured network shape");
      }
      std::copy(loaded.parameters().begin(), loaded.parameters().end(), net->parameters().begin());
    }
  }

  /// Every network with its checkpoint file name.
  std::vector<std::pair<std::string, DenseNet*>> named_nets() {
    static constexpr const char* kParts[] = {"w1", "b1", "w2", "v"};
    std::vector<std::pair<std::string, DenseNet*>> out;
    for (int n = 0; n < opt_.agents; ++n) {
      const auto un = static_cast<std::size_t>(n);
      out.emplace_back("actor_" + std::to_string(n) + ".hsnn", &actors_[un]);
      for (int i = 0; i < 2; ++i) {
        const std::string tag = std::to_string(n) + "_" + std::to_string(i + 1) + ".hsnn";
        out.emplace_back("critic_" + tag, &critics_[static_cast<std::size_t>(i)][un]);
        out.emplace_back("critic_target_" + tag, &target_critics_[static_cast<std::size_t>(i)][un]);
      }
    }
    for (int i = 0; i < 2; ++i) {
      auto live = mixers_[static_cast<std::size_t>(i)].nets();
      auto target = target_mixers_[static_cast<std::size_t>(i)].nets();
      for (std::size_t k = 0; k < live.size(); ++k) {
        const std::string tag = std::to_string(i + 1) + "_" + kParts[k] + ".hsnn";
        out.emplace_back("mixer_" + tag, live[k]);
        out.emplace_back("mixer_target_" + tag, target[k]);
      }
    }
    return out;
  }

 private:
  struct PolicyOutput {
    Matrix probs, log_probs;  // D x B
    Vector entropy;           // B
    Matrix log_std;           // 1 x B, clamped
    Matrix log_std_active;    // 1 x B, 1 where the clamp is inactive
    Matrix unit;              // 1 x B, tanh(u)
    Vector unit_log_density;  // B
  };

  PolicyOutput policy(const Matrix& raw, const Matrix& noise) const {
    const int d = opt_.arms();
    const auto bsz = raw.cols();
    PolicyOutput p;
    p.probs.resize(d, bsz);
    p.log_probs.resize(d, bsz);
    p.entropy.resize(bsz);
    p.log_std.resize(1, bsz);
    p.log_std_active.resize(1, bsz);
    p.unit.resize(1, bsz);
    p.unit_log_density.resize(bsz);
    std::vector<double> logits(static_cast<std::size_t>(d));
    for (Eigen::Index b = 0; b < bsz; ++b) {
      for (int a = 0; a < d; ++a) logits[static_cast<std::size_t>(a)] = raw(a, b);
      const nn::Categorical cat = nn::softmax_categorical(logits);
      for (int a = 0; a < d; ++a) {
        p.probs(a, b) = cat.probs[static_cast<std::size_t>(a)];
        p.log_probs(a, b) = cat.log_probs[static_cast<std::size_t>(a)];
      }
      p.entropy(b) = cat.entropy;
      const double raw_std = raw(d + 1, b);
      if (!std::isfinite(raw_std) || !std::isfinite(raw(d, b))) throw DivergenceError("actor output is not finite");
      p.log_std(0, b) = std::clamp(raw_std, nn::kLogStdMin, nn::kLogStdMax);
      p.log_std_active(0, b) = (raw_std > nn::kLogStdMin && raw_std < nn::kLogStdMax) ? 1.0 : 0.0;
      // p_max = 2 makes the power scale the identity on tanh(u) + 1.
      const auto draw = nn::squashed_gaussian_from_noise(raw(d, b), p.log_std(0, b), 2.0, noise(0, b));
      p.unit(0, b) = draw.unit_action;
      p.unit_log_density(b) = draw.unit_log_density;
    }
    return p;
  }

  Matrix critic_input(const Matrix& obs, const Matrix& unit) const {
    Matrix input(opt_.feature_width() + 1, obs.cols());
    input.topRows(opt_.feature_width()) = obs;
    input.bottomRows(1) = unit;
    return input;
  }

  MhsacOptions opt_;
  Rng rng_;
  std::vector<DenseNet> actors_;
  std::array<std::vector<DenseNet>, 2> critics_, target_critics_;
  std::array<Mixer, 2> mixers_, target_mixers_;
  std::vector<nn::Adam> actor_opt_;
  std::array<std::vector<nn::Adam>, 2> critic_opt_, mixer_opt_;
  double log_alpha_d_ = 0.0;
  double log_alpha_c_ = 0.0;
  nn::Adam alpha_d_opt_, alpha_c_opt_;
};

}  // namespace hyssra::mhsac
