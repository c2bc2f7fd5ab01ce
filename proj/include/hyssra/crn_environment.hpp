#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hyssra/channel_model.hpp"
#include "hyssra/errors.hpp"
#include "hyssra/rng.hpp"
#include "hyssra/sensing.hpp"

namespace hyssra::env {

/// Mean |h|^2 per link class.
struct LinkGainMeans {
  double pu_to_su = 1.0;
  double su_self = 1.0;
  double su_cross = 1.0;
};

struct EnvConfig {
  int su_count = 1;  // N
  channel::ChannelParams channel;
  sensing::SensingConfig sensing;
  std::vector<std::vector<int>> sensed_channels;  // M_n, 0-based channel ids
  std::vector<double> max_power;                  // p_n^max, W
  double target_rate = 0.1;                       // zeta, bits/s/Hz
  double occupancy_penalty = 10.0;                // lambda_occ
  double rate_penalty = 2.5;                      // lambda_rate
  std::vector<double> p_idle_to_busy;
  std::vector<double> p_busy_to_busy;
  double coherence_time = 2e-3;  // t_c, s
  LinkGainMeans gain_means;
  bool pu_fading = true;  // false: constant-gain PU->SU sensing links
  int episode_length = 3000;

  int channel_count() const { return channel.channel_count; }
  int sensed_per_su() const { return sensing.sensed_per_su; }
  /// D = M + 1; the last arm means "stay idle".
  int arm_count() const { return sensing.sensed_per_su + 1; }
};

/// Round-robin blocks of M consecutive channels, wrapping around K.
/// SU n senses channels (n*M + j) mod K for j < M.
inline std::vector<std::vector<int>> assign_sensed_channels(int channel_count, int su_count,
                                                            int sensed_per_su) {
  if (sensed_per_su > channel_count) {
    throw InputError("assign_sensed_channels: M = " + std::to_string(sensed_per_su) +
                     " exceeds K = " + std::to_string(channel_count));
  }
  if (channel_count < 1 || su_count < 1 || sensed_per_su < 1) {
    throw InputError("assign_sensed_channels: K, N and M must be >= 1");
  }
  std::vector<std::vector<int>> out(static_cast<std::size_t>(su_count));
  for (int n = 0; n < su_count; ++n) {
    for (int j = 0; j < sensed_per_su; ++j) {
      out[static_cast<std::size_t>(n)].push_back((n * sensed_per_su + j) % channel_count);
    }
  }
  return out;
}

inline void validate(const EnvConfig& cfg) {
  const int n_su = cfg.su_count;
  const int k = cfg.channel_count();
  const int m = cfg.sensed_per_su();
  if (n_su < 1) throw InputError("environment: N must be >= 1");
  channel::validate(cfg.channel, n_su);
  sensing::validate(cfg.sensing);
  if (m > k) throw InputError("environment: M must not exceed K");
  if (static_cast<int>(cfg.sensed_channels.size()) != n_su) {
    throw InputError("environment: need one sensed-channel set per SU");
  }
  for (const auto& set : cfg.sensed_channels) {
    if (static_cast<int>(set.size()) != m) throw InputError("environment: |M_n| must equal M");
    for (int ch : set) {
      if (ch < 0 || ch >= k) throw InputError("environment: sensed channel out of range");
    }
  }
  if (static_cast<int>(cfg.max_power.size()) != n_su) {
    throw InputError("environment: need one p_max per SU");
  }
  for (double p : cfg.max_power) {
    if (!(p > 0.0)) throw InputError("environment: p_max must be > 0");
  }
  if (!(cfg.target_rate > 0.0)) throw InputError("environment: target rate must be > 0");
  if (!(cfg.occupancy_penalty > 0.0) || !(cfg.rate_penalty > 0.0)) {
    throw InputError("environment: penalties must be > 0");
  }
  if (static_cast<int>(cfg.sensing.thresholds.size()) != n_su) {
    throw InputError("environment: need one threshold row per SU");
  }
  for (const auto& row : cfg.sensing.thresholds) {
    if (static_cast<int>(row.size()) != k) throw InputError("environment: threshold row needs K entries");
    for (double psi : row) {
      if (!(psi > 0.0)) throw InputError("environment: thresholds must be > 0");
    }
  }
  if (static_cast<int>(cfg.p_idle_to_busy.size()) != k ||
      static_cast<int>(cfg.p_busy_to_busy.size()) != k) {
    throw InputError("environment: need occupancy probabilities for every channel");
  }
  if (!(cfg.coherence_time > 0.0)) throw InputError("environment: coherence time must be > 0");
  if (cfg.episode_length < 1) throw InputError("environment: episode length must be >= 1");
}

/// Per-SU local observation over its sensed set M_n.
struct Observation {
  std::vector<int> beliefs;        // x^P over M_n
  std::vector<double> statistics;  // T over M_n, W
};

/// Discrete arm (0..M-1 = sensed slot, M = idle) plus transmit power.
struct Action {
  int choice = 0;
  double power = 0.0;  // W
};

struct Metrics {
  double idle_use = 0.0;      // omega^i
  double occupied_use = 0.0;  // omega^o
  double collisions = 0.0;    // omega^c
};

struct StepOutcome {
  std::vector<double> rewards;          // r^n
  double joint_reward = 0.0;            // r_t
  std::vector<double> empirical_rates;  // R-hat_n, bits/s/Hz
  std::vector<double> true_rates;       // (B/K) log2(1 + Y), bits/s
  Metrics metrics;
  std::vector<Observation> next_observations;
  bool episode_end = false;
};

/// Link power gains |h|^2 frozen at one transmission instant plus the true
/// occupancy. cross[j][n][k] is the gain from SU j's transmitter to SU n's
/// receiver on channel k.
struct ChannelSnapshot {
  std::vector<int> occupancy;
  std::vector<std::vector<double>> self;
  std::vector<std::vector<std::vector<double>>> cross;
  std::vector<std::vector<double>> pu;
  double noise_variance = 1.0;
  std::vector<double> pu_power;
};

/// SINR of SU n on channel k given every SU's channel (-1 = idle) and power.
/// Includes the PU term exactly when the PU is truly busy on k.
inline double true_sinr(int n, int k, std::span<const int> channel_of, std::span<const double> power,
                        const ChannelSnapshot& snap) {
  const auto un = static_cast<std::size_t>(n);
  const auto uk = static_cast<std::size_t>(k);
  if (channel_of[un] != k) throw InputError("true_sinr: SU does not transmit on this channel");
  double denom = snap.noise_variance;
  for (std::size_t j = 0; j < channel_of.size(); ++j) {
    if (j != un && channel_of[j] == k) denom += snap.cross[j][un][uk] * power[j];
  }
  if (snap.occupancy[uk] == 1) denom += snap.pu[un][uk] * snap.pu_power[uk];
  return snap.self[un][uk] * power[un] / denom;
}

/// (B / K) log2(1 + sinr).
inline double rate_from_sinr(double sinr, double bandwidth, int channel_count) {
  if (!(sinr >= 0.0)) throw InputError("rate_from_sinr: SINR must be >= 0");
  return bandwidth / channel_count * std::log2(1.0 + sinr);
}

/// sum_k (1 - x^P_k) x_k log2(1 + Y-hat_k) over the sensed set.
inline double empirical_rate(std::span<const int> beliefs, std::span<const int> selection,
                             std::span<const double> estimated_snr) {
  double rate = 0.0;
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    if (beliefs[k] == 0 && selection[k] == 1) rate += std::log2(1.0 + estimated_snr[k]);
  }
  return rate;
}

/// Single-choice convenience: `slot` is the sensed slot used, or -1 when idle.
inline double empirical_rate(std::span<const int> beliefs, int slot, double estimated_snr) {
  if (slot < 0) return 0.0;
  if (beliefs[static_cast<std::size_t>(slot)] == 1) return 0.0;
  return std::log2(1.0 + estimated_snr);
}

struct ChannelAverages {
  double idle_prob = 1.0;      // Pr(H0)
  double p_false_alarm = 0.0;  // P^fa
  double p_detect = 1.0;       // P^de
  double idle_rate = 0.0;      // R^0
  double busy_rate = 0.0;      // R^1
};

/// Average achievable rate of one SU over its channels. Reporting only.
inline double analytic_average_rate(std::span<const int> beliefs,
                                    std::span<const ChannelAverages> channels, double window,
                                    double time_block) {
  double sum = 0.0;
  for (std::size_t k = 0; k < channels.size(); ++k) {
    if (beliefs[k] == 1) continue;
    const auto& c = channels[k];
    sum += c.idle_prob * (1.0 - c.p_false_alarm) * c.idle_rate +
           (1.0 - c.idle_prob) * (1.0 - c.p_detect) * c.busy_rate;
  }
  return (1.0 - window / time_block) * sum;
}

struct RewardParams {
  double target_rate = 0.1;
  double occupancy_penalty = 10.0;
  double rate_penalty = 2.5;
};

/// r^n = -Delta_occ + (R-hat if R-hat >= zeta else -Delta_rate).
/// `belief_on_choice` is x^P at the chosen channel; ignored when idle.
inline double reward(bool transmits, int belief_on_choice, double empirical, const RewardParams& p) {
  const double occ = transmits ? p.occupancy_penalty * belief_on_choice : 0.0;
  const double norm_sq = transmits ? 1.0 : 0.0;
  const double rate_term = empirical >= p.target_rate ? empirical : -p.rate_penalty * norm_sq;
  return -occ + rate_term;
}

/// omega^i, omega^o, omega^c from the SUs' channels (-1 = idle) and true occupancy.
/// omega^o is 0 when no channel is busy and omega^i is 1 when no idle channel
/// can be used (min{K - I, N} = 0).
inline Metrics metrics(std::span<const int> channel_of, std::span<const int> occupancy) {
  const std::size_t k_count = occupancy.size();
  std::vector<int> users(k_count, 0);
  for (int ch : channel_of) {
    if (ch >= 0) ++users[static_cast<std::size_t>(ch)];
  }
  int busy = 0;
  double idle_used = 0.0;
  double busy_used = 0.0;
  double collisions = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    busy += occupancy[k];
    const bool used = users[k] > 0;
    if (used && occupancy[k] == 0) idle_used += 1.0;
    if (used && occupancy[k] == 1) busy_used += 1.0;
    if (users[k] >= 2) collisions += users[k];
  }
  const int idle_capacity = std::min(static_cast<int>(k_count) - busy, static_cast<int>(channel_of.size()));
  Metrics m;
  m.idle_use = idle_capacity > 0 ? idle_used / idle_capacity : 1.0;
  m.occupied_use = busy > 0 ? busy_used / busy : 0.0;
  m.collisions = collisions;
  return m;
}

/// The Dec-POMDP: one step is one time block (sense, act, transmit, reward).
class CrnEnvironment {
 public:
  CrnEnvironment(EnvConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), rng_(seed), fading_seed_(hash_combine(seed, 0xfad1)) {
    validate(cfg_);
    const auto n_su = static_cast<std::size_t>(cfg_.su_count);
    const auto k = static_cast<std::size_t>(cfg_.channel_count());
    const double tc = cfg_.coherence_time;
    pu_links_.assign(n_su, std::vector<channel::FadingProcess>(k));
    self_links_.assign(n_su, std::vector<channel::FadingProcess>(k));
    cross_links_.assign(n_su, std::vector<std::vector<channel::FadingProcess>>(
                                  n_su, std::vector<channel::FadingProcess>(k)));
    for (std::size_t n = 0; n < n_su; ++n) {
      for (std::size_t c = 0; c < k; ++c) {
        pu_links_[n][c] = channel::make_fading(tc, cfg_.gain_means.pu_to_su, link_key(1, n, n, c));
        pu_links_[n][c].rayleigh = cfg_.pu_fading;
        self_links_[n][c] = channel::make_fading(tc, cfg_.gain_means.su_self, link_key(2, n, n, c));
        for (std::size_t j = 0; j < n_su; ++j) {
          cross_links_[j][n][c] =
              channel::make_fading(tc, cfg_.gain_means.su_cross, link_key(3, j, n, c));
        }
      }
    }
    occupancy_ = channel::make_occupancy(cfg_.p_idle_to_busy, cfg_.p_busy_to_busy,
                                         std::vector<int>(k, 0));
    samples_ = sensing::sample_count(cfg_.sensing);
    realizations_ = sensing::realizations_per_window(cfg_.sensing.window, tc, cfg_.sensed_per_su());
  }

  const EnvConfig& config() const { return cfg_; }
  const std::vector<int>& occupancy() const { return occupancy_.state; }
  const std::vector<Observation>& observations() const { return observations_; }
  std::int64_t global_step() const { return global_step_; }
  int samples_per_channel() const { return samples_; }
  int realizations() const { return realizations_; }

  /// Draws occupancy from the stationary law and senses.
  const std::vector<Observation>& reset() {
    channel::reset_to_stationary(occupancy_, rng_);
    episode_step_ = 0;
    sense_all();
    return observations_;
  }

  /// Overrides the true occupancy of the current block and re-senses.
  void set_occupancy(std::span<const int> state) {
    if (state.size() != occupancy_.state.size()) throw InputError("set_occupancy: need K states");
    occupancy_.state.assign(state.begin(), state.end());
    channel::validate(occupancy_);
    sense_all();
  }

  /// Gains at the transmission instant of the current block (after sensing).
  ChannelSnapshot snapshot() const {
    const auto n_su = static_cast<std::size_t>(cfg_.su_count);
    const auto k = static_cast<std::size_t>(cfg_.channel_count());
    const double t = transmit_time();
    ChannelSnapshot s;
    s.occupancy = occupancy_.state;
    s.noise_variance = cfg_.channel.noise_variance;
    s.pu_power = cfg_.channel.pu_power;
    s.self.assign(n_su, std::vector<double>(k));
    s.pu.assign(n_su, std::vector<double>(k));
    s.cross.assign(n_su, std::vector<std::vector<double>>(n_su, std::vector<double>(k)));
    for (std::size_t n = 0; n < n_su; ++n) {
      for (std::size_t c = 0; c < k; ++c) {
        s.self[n][c] = std::norm(channel::gain_at(self_links_[n][c], t));
        s.pu[n][c] = std::norm(channel::gain_at(pu_links_[n][c], t));
        for (std::size_t j = 0; j < n_su; ++j) {
          s.cross[j][n][c] = std::norm(channel::gain_at(cross_links_[j][n][c], t));
        }
      }
    }
    return s;
  }

  /// Global channel used by SU n under `action`, or -1 when idle.
  int channel_of(int n, const Action& action) const {
    if (action.choice >= cfg_.sensed_per_su()) return -1;
    return cfg_.sensed_channels[static_cast<std::size_t>(n)][static_cast<std::size_t>(action.choice)];
  }

  /// Throws InputError naming every SU whose action is malformed.
  void check_joint_action(std::span<const Action> joint) const {
    if (static_cast<int>(joint.size()) != cfg_.su_count) {
      throw InputError("step: expected " + std::to_string(cfg_.su_count) + " actions, got " +
                       std::to_string(joint.size()));
    }
    std::ostringstream bad;
    for (std::size_t n = 0; n < joint.size(); ++n) {
      const Action& a = joint[n];
      const bool choice_ok = a.choice >= 0 && a.choice < cfg_.arm_count();
      const bool power_ok = std::isfinite(a.power) && a.power > 0.0 && a.power <= cfg_.max_power[n];
      if (!choice_ok || !power_ok) {
        bad << " SU " << n << (choice_ok ? "" : " (arm out of range)")
            << (power_ok ? "" : " (power outside (0, p_max])") << ';';
      }
    }
    if (!bad.str().empty()) throw InputError("step: malformed joint action:" + bad.str());
  }

  StepOutcome step(std::span<const Action> joint) {
    check_joint_action(joint);
    const auto n_su = static_cast<std::size_t>(cfg_.su_count);
    std::vector<int> channels(n_su);
    std::vector<double> powers(n_su);
    for (std::size_t n = 0; n < n_su; ++n) {
      channels[n] = channel_of(static_cast<int>(n), joint[n]);
      powers[n] = joint[n].power;
    }
    const ChannelSnapshot snap = snapshot();
    const RewardParams rp{cfg_.target_rate, cfg_.occupancy_penalty, cfg_.rate_penalty};

    StepOutcome out;
    out.rewards.resize(n_su);
    out.empirical_rates.assign(n_su, 0.0);
    out.true_rates.assign(n_su, 0.0);
    for (std::size_t n = 0; n < n_su; ++n) {
      const int slot = joint[n].choice < cfg_.sensed_per_su() ? joint[n].choice : -1;
      const bool transmits = slot >= 0;
      int belief = 0;
      if (transmits) {
        const double sinr = true_sinr(static_cast<int>(n), channels[n], channels, powers, snap);
        belief = observations_[n].beliefs[static_cast<std::size_t>(slot)];
        out.empirical_rates[n] = empirical_rate(observations_[n].beliefs, slot, sinr);
        out.true_rates[n] = rate_from_sinr(sinr, cfg_.channel.bandwidth, cfg_.channel_count());
      }
      out.rewards[n] = reward(transmits, belief, out.empirical_rates[n], rp);
    }
    for (double r : out.rewards) out.joint_reward += r;
    out.metrics = metrics(channels, occupancy_.state);

    ++global_step_;
    ++episode_step_;
    if (episode_step_ >= cfg_.episode_length) {
      out.episode_end = true;
      reset();
    } else {
      channel::step_occupancy(occupancy_, rng_);
      sense_all();
    }
    out.next_observations = observations_;
    return out;
  }

 private:
  std::uint64_t link_key(std::uint64_t kind, std::size_t a, std::size_t b, std::size_t c) const {
    std::uint64_t key = hash_combine(fading_seed_, kind);
    key = hash_combine(key, a);
    key = hash_combine(key, b);
    return hash_combine(key, c);
  }

  double block_start_time() const {
    return static_cast<double>(global_step_) * cfg_.sensing.time_block;
  }
  double transmit_time() const { return block_start_time() + cfg_.sensing.window; }

  void sense_all() {
    const auto n_su = static_cast<std::size_t>(cfg_.su_count);
    const int m = cfg_.sensed_per_su();
    const double per_channel = cfg_.sensing.window / m;
    observations_.assign(n_su, Observation{});
    for (std::size_t n = 0; n < n_su; ++n) {
      Observation& obs = observations_[n];
      obs.beliefs.resize(static_cast<std::size_t>(m));
      obs.statistics.resize(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) {
        const auto k = static_cast<std::size_t>(cfg_.sensed_channels[n][static_cast<std::size_t>(j)]);
        const sensing::SensingWindow window{block_start_time() + j * per_channel, samples_,
                                            realizations_};
        channel::FadingProcess& link = pu_links_[n][k];
        // reset() and set_occupancy() re-sense the current block, so the
        // process restarts at the window instead of requiring forward time.
        link.block_index = -1;
        const auto samples =
            sensing::collect_samples(occupancy_.state[k] == 1, link, cfg_.channel.noise_variance,
                                     cfg_.channel.pu_snr[n][k], window, cfg_.sensing.signal, rng_);
        const double t = sensing::test_statistic(samples);
        obs.statistics[static_cast<std::size_t>(j)] = t;
        obs.beliefs[static_cast<std::size_t>(j)] = sensing::detect(t, cfg_.sensing.thresholds[n][k]);
      }
    }
  }

  EnvConfig cfg_;
  Rng rng_;
  std::uint64_t fading_seed_;
  channel::PuOccupancy occupancy_;
  std::vector<std::vector<channel::FadingProcess>> pu_links_;
  std::vector<std::vector<channel::FadingProcess>> self_links_;
  std::vector<std::vector<std::vector<channel::FadingProcess>>> cross_links_;
  std::vector<Observation> observations_;
  std::int64_t global_step_ = 0;
  int episode_step_ = 0;
  int samples_ = 1;
  int realizations_ = 1;
};

}  // namespace hyssra::env
