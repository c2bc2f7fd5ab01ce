#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyssra/errors.hpp"
#include "hyssra/rng.hpp"

namespace hyssra::channel {

/// Block-fading Rayleigh link. The gain is constant over each coherence block
/// [b * t_c, (b + 1) * t_c) and the gain of block b is a pure function of
/// (key, b), so two processes with the same key always agree.
struct FadingProcess {
  double coherence_time = 1.0;  // t_c, seconds
  double mean_power = 1.0;      // E|h|^2
  std::uint64_t key = 0;
  std::int64_t block_index = -1;  // -1 until the first draw
  double block_start = 0.0;       // seconds
  std::complex<double> gain{0.0, 0.0};
  bool rayleigh = true;  // false: constant gain sqrt(mean_power) (AWGN link)
};

inline FadingProcess make_fading(double coherence_time, double mean_power, std::uint64_t key) {
  if (!(coherence_time > 0.0)) throw InputError("fading: coherence time must be positive");
  if (!(mean_power >= 0.0)) throw InputError("fading: mean power must be non-negative");
  return FadingProcess{coherence_time, mean_power, key, -1, 0.0, {0.0, 0.0}, true};
}

/// Non-fading link with |h|^2 = mean_power in every block.
inline FadingProcess make_awgn(double mean_power) {
  FadingProcess f = make_fading(1.0, mean_power, 0);
  f.rayleigh = false;
  return f;
}

/// Index of the coherence block containing time t. The small relative guard
/// keeps t = b * t_c computed in floating point from landing in block b - 1.
inline std::int64_t block_of(double t, double coherence_time) {
  return static_cast<std::int64_t>(std::floor(t / coherence_time + 1e-9));
}

inline std::complex<double> gain_of_block(const FadingProcess& process, std::int64_t block) {
  const std::uint64_t base = hash_combine(process.key, static_cast<std::uint64_t>(block));
  const double u1 = bits_to_unit(splitmix64(base));
  const double u2 = bits_to_unit(splitmix64(base ^ 0xd1b54a32d192ed03ULL));
  if (process.mean_power <= 0.0) return {0.0, 0.0};
  if (!process.rayleigh) return {std::sqrt(process.mean_power), 0.0};
  return std::sqrt(process.mean_power / 2.0) * box_muller(u1, u2);
}

/// Gain at time t without touching the process state.
inline std::complex<double> gain_at(const FadingProcess& process, double t) {
  if (t < 0.0) throw InputError("fading: time must be non-negative");
  return gain_of_block(process, block_of(t, process.coherence_time));
}

/// Advances the process to time t and returns the gain in force there.
inline std::complex<double> sample_gain(FadingProcess& process, double t) {
  if (t < 0.0) throw InputError("sample_gain: time must be non-negative");
  if (process.block_index >= 0 && t < process.block_start) {
    throw InputError("sample_gain: time precedes the current coherence block");
  }
  const std::int64_t block = block_of(t, process.coherence_time);
  if (block != process.block_index) {
    process.block_index = block;
    process.block_start = static_cast<double>(block) * process.coherence_time;
    process.gain = gain_of_block(process, block);
  }
  return process.gain;
}

/// Per-channel two-state Markov occupancy of the primary users.
/// state[k] = 1 when the PU transmits on channel k.
struct PuOccupancy {
  std::vector<double> p_idle_to_busy;  // Pr(i -> o)
  std::vector<double> p_busy_to_busy;  // Pr(o -> o)
  std::vector<int> state;

  std::size_t channel_count() const { return state.size(); }
  int busy_count() const {
    int busy = 0;
    for (int s : state) busy += s;
    return busy;
  }
};

inline void validate(const PuOccupancy& chain) {
  if (chain.p_idle_to_busy.size() != chain.state.size() ||
      chain.p_busy_to_busy.size() != chain.state.size()) {
    throw InputError("occupancy: probability vectors must have one entry per channel");
  }
  for (std::size_t k = 0; k < chain.state.size(); ++k) {
    const double a = chain.p_idle_to_busy[k];
    const double b = chain.p_busy_to_busy[k];
    if (!(a >= 0.0 && a <= 1.0) || !(b >= 0.0 && b <= 1.0)) {
      throw InputError("occupancy: transition probabilities must lie in [0, 1] (channel " +
                       std::to_string(k) + ")");
    }
    if (chain.state[k] != 0 && chain.state[k] != 1) {
      throw InputError("occupancy: state must be 0 (idle) or 1 (busy)");
    }
  }
}

inline PuOccupancy make_occupancy(std::vector<double> p_idle_to_busy,
                                  std::vector<double> p_busy_to_busy,
                                  std::vector<int> initial_state) {
  PuOccupancy chain{std::move(p_idle_to_busy), std::move(p_busy_to_busy),
                    std::move(initial_state)};
  validate(chain);
  return chain;
}

/// One transition of every channel, independently.
template <class URBG>
void step_occupancy(PuOccupancy& chain, URBG& rng) {
  for (std::size_t k = 0; k < chain.state.size(); ++k) {
    const double p_busy_next =
        chain.state[k] == 0 ? chain.p_idle_to_busy[k] : chain.p_busy_to_busy[k];
    chain.state[k] = bernoulli(rng, p_busy_next) ? 1 : 0;
  }
}

/// Long-run Pr(idle) = (1 - p_oo) / (p_io + 1 - p_oo).
inline double stationary_idle_prob(double p_idle_to_busy, double p_busy_to_busy) {
  const double leave_busy = 1.0 - p_busy_to_busy;
  const double denom = p_idle_to_busy + leave_busy;
  if (!(denom > 0.0)) {
    throw InputError("stationary_idle_prob: chain with p_io = 0 and p_oo = 1 has two absorbing states");
  }
  return leave_busy / denom;
}

inline double stationary_idle_prob(const PuOccupancy& chain, std::size_t k) {
  return stationary_idle_prob(chain.p_idle_to_busy.at(k), chain.p_busy_to_busy.at(k));
}

/// Draws every channel's state from its stationary distribution.
template <class URBG>
void reset_to_stationary(PuOccupancy& chain, URBG& rng) {
  for (std::size_t k = 0; k < chain.state.size(); ++k) {
    const double idle = stationary_idle_prob(chain, k);
    chain.state[k] = bernoulli(rng, idle) ? 0 : 1;
  }
}

/// Radio-level constants shared by sensing and rate computation.
struct ChannelParams {
  double bandwidth = 1.0;       // B, Hz (whole band)
  int channel_count = 1;        // K
  double noise_variance = 1.0;  // sigma^2, W
  std::vector<double> pu_power;              // p_k^P per channel, W
  std::vector<std::vector<double>> pu_snr;   // rho[n][k], linear

  double channel_bandwidth() const { return bandwidth / channel_count; }
};

inline void validate(const ChannelParams& params, int su_count) {
  if (params.channel_count < 1) throw InputError("channel: K must be >= 1");
  if (!(params.noise_variance > 0.0)) throw InputError("channel: noise variance must be > 0");
  if (!(params.bandwidth > 0.0)) throw InputError("channel: bandwidth must be > 0");
  if (static_cast<int>(params.pu_power.size()) != params.channel_count) {
    throw InputError("channel: need one PU power per channel");
  }
  for (double p : params.pu_power) {
    if (!(p >= 0.0)) throw InputError("channel: PU power must be >= 0");
  }
  if (static_cast<int>(params.pu_snr.size()) != su_count) {
    throw InputError("channel: need one PU SNR row per SU");
  }
  for (const auto& row : params.pu_snr) {
    if (static_cast<int>(row.size()) != params.channel_count) {
      throw InputError("channel: PU SNR row must have K entries");
    }
    for (double rho : row) {
      if (!(rho >= 0.0)) throw InputError("channel: PU SNR must be >= 0");
    }
  }
}

}  // namespace hyssra::channel
