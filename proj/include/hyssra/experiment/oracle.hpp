#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "hyssra/crn_environment.hpp"
#include "hyssra/errors.hpp"

namespace hyssra::experiment {

inline constexpr int kOracleMaxChannels = 6;
inline constexpr int kOracleMaxUsers = 4;

/// Penalty-adjusted sum reward of a joint action scored against the truth:
/// beliefs are the true occupancy, so R-hat is gated by true idleness and the
/// occupancy penalty fires on every busy channel used. arms[n] == M means idle.
inline double score_joint_action(const env::EnvConfig& cfg, const env::ChannelSnapshot& snap,
                                 std::span<const int> arms, std::span<const double> powers) {
  const auto n_su = static_cast<std::size_t>(cfg.su_count);
  if (arms.size() != n_su || powers.size() != n_su) throw InputError("score_joint_action: need one arm and power per SU");
  const int m = cfg.sensed_per_su();
  std::vector<int> channel_of(n_su, -1);
  for (std::size_t n = 0; n < n_su; ++n) {
    if (arms[n] < 0 || arms[n] > m) throw InputError("score_joint_action: arm out of range");
    if (arms[n] < m) channel_of[n] = cfg.sensed_channels[n][static_cast<std::size_t>(arms[n])];
  }
  const env::RewardParams rp{cfg.target_rate, cfg.occupancy_penalty, cfg.rate_penalty};
  double total = 0.0;
  for (std::size_t n = 0; n < n_su; ++n) {
    const int k = channel_of[n];
    if (k < 0) {
      total += env::reward(false, 0, 0.0, rp);
      continue;
    }
    const int busy = snap.occupancy[static_cast<std::size_t>(k)];
    const double sinr = env::true_sinr(static_cast<int>(n), k, channel_of, powers, snap);
    const double rate = busy == 1 ? 0.0 : std::log2(1.0 + sinr);
    total += env::reward(true, busy, rate, rp);
  }
  return total;
}

struct OracleResult {
  std::vector<int> arms;  // per SU; M = idle
  double score = 0.0;
};

/// Exhaustive search over all (M+1)^N joint arms at p_n = p_max. `order`
/// permutes the enumeration (identity when empty); ties keep the first seen.
inline OracleResult brute_force_allocation_oracle(const env::EnvConfig& cfg, const env::ChannelSnapshot& snap,
                                                  std::span<const long> order = {}) {
  if (cfg.channel_count() > kOracleMaxChannels || cfg.su_count > kOracleMaxUsers) {
    throw InputError("oracle: exhaustive search is limited to K <= 6 and N <= 4");
  }
  const int n_su = cfg.su_count;
  const int d = cfg.arm_count();
  long total = 1;
  for (int n = 0; n < n_su; ++n) total *= d;
  if (!order.empty() && static_cast<long>(order.size()) != total) {
    throw InputError("oracle: enumeration order must list every joint action");
  }
  OracleResult best;
  bool have = false;
  std::vector<int> arms(static_cast<std::size_t>(n_su));
  for (long i = 0; i < total; ++i) {
    long code = order.empty() ? i : order[static_cast<std::size_t>(i)];
    for (int n = 0; n < n_su; ++n) {
      arms[static_cast<std::size_t>(n)] = static_cast<int>(code % d);
      code /= d;
    }
    const double score = score_joint_action(cfg, snap, arms, cfg.max_power);
    if (!have || score > best.score) {
      best = {arms, score};
      have = true;
    }
  }
  return best;
}

}  // namespace hyssra::experiment
