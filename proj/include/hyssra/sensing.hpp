#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "hyssra/channel_model.hpp"
#include "hyssra/errors.hpp"
#include "hyssra/rng.hpp"

namespace hyssra::sensing {

/// Waveform of the primary user's signal during sensing.
enum class SignalModel {
  kBpsk,      // sqrt(sigma^2 rho) * (+/-1), constant envelope
  kGaussian,  // CN(0, sigma^2 rho)
};

struct SensingConfig {
  double sampling_rate = 1.0;  // epsilon, samples / s
  double window = 0.5;         // tau, s (total over all sensed channels)
  double time_block = 1.0;     // Gamma, s
  int sensed_per_su = 1;       // M
  SignalModel signal = SignalModel::kBpsk;
  std::vector<std::vector<double>> thresholds;  // psi[n][k], W
};

/// floor(epsilon * tau / M). The relative guard absorbs representation error
/// in products such as 1e4 * 0.03 / 3.
inline int sample_count(double sampling_rate, double window, int sensed_per_su) {
  if (sensed_per_su < 1) throw InputError("sample_count: M must be >= 1");
  const double exact = sampling_rate * window / sensed_per_su;
  return static_cast<int>(std::floor(exact * (1.0 + 1e-12)));
}

inline int sample_count(const SensingConfig& cfg) {
  return sample_count(cfg.sampling_rate, cfg.window, cfg.sensed_per_su);
}

/// C = ceil((tau / M) / t_c): coherence blocks seen per channel per window.
inline int realizations_per_window(double window, double coherence_time, int sensed_per_su) {
  if (!(window > 0.0) || !(coherence_time > 0.0) || sensed_per_su < 1) {
    throw InputError("realizations_per_window: arguments must be positive");
  }
  const double exact = window / sensed_per_su / coherence_time;
  return std::max(1, static_cast<int>(std::ceil(exact * (1.0 - 1e-12))));
}

inline void validate(const SensingConfig& cfg) {
  if (!(cfg.sampling_rate > 0.0)) throw InputError("sensing: sampling rate must be > 0");
  if (!(cfg.window > 0.0 && cfg.window < cfg.time_block)) {
    throw InputError("sensing: window must satisfy 0 < tau < Gamma");
  }
  if (cfg.sensed_per_su < 1) throw InputError("sensing: M must be >= 1");
  if (sample_count(cfg) < 1) throw InputError("sensing: floor(epsilon tau / M) must be >= 1");
}

/// Where one channel's sensing samples sit in time.
struct SensingWindow {
  double start_time = 0.0;  // s
  int sample_count = 1;     // S
  int realizations = 1;     // C
};

/// Received samples on one channel. Under H0 every sample is CN(0, sigma^2)
/// noise; under H1 it is h * xi + v with the gain held over C contiguous blocks
/// of equal size (the last block takes the remainder).
template <class URBG>
std::vector<std::complex<double>> collect_samples(bool occupied, channel::FadingProcess& fading,
                                                  double noise_variance, double pu_snr,
                                                  const SensingWindow& window, SignalModel signal,
                                                  URBG& rng) {
  if (window.sample_count < 1) throw InputError("collect_samples: sample count must be >= 1");
  if (window.realizations < 1) throw InputError("collect_samples: need at least one realization");
  const int samples = window.sample_count;
  const int blocks = window.realizations;
  const int per_block = samples / blocks;
  const double signal_power = noise_variance * pu_snr;
  const double amplitude = std::sqrt(signal_power);

  std::vector<std::complex<double>> out;
  out.reserve(static_cast<std::size_t>(samples));
  for (int b = 0; b < blocks; ++b) {
    const int count = (b + 1 == blocks) ? samples - per_block * (blocks - 1) : per_block;
    std::complex<double> h{0.0, 0.0};
    if (occupied) {
      h = channel::sample_gain(fading, window.start_time + b * fading.coherence_time);
    }
    for (int i = 0; i < count; ++i) {
      std::complex<double> z = complex_normal(rng, noise_variance);
      if (occupied) {
        std::complex<double> xi;
        if (signal == SignalModel::kBpsk) {
          xi = bernoulli(rng, 0.5) ? amplitude : -amplitude;
        } else {
          xi = complex_normal(rng, signal_power);
        }
        z += h * xi;
      }
      out.push_back(z);
    }
  }
  return out;
}

/// Energy test statistic T = (1/S) sum |z(i)|^2.
inline double test_statistic(std::span<const std::complex<double>> samples) {
  if (samples.empty()) throw InputError("test_statistic: empty sample sequence");
  double energy = 0.0;
  for (const auto& z : samples) energy += std::norm(z);
  return energy / static_cast<double>(samples.size());
}

/// Occupancy belief: 0 (idle) iff T <= psi.
inline int detect(double statistic, double threshold) { return statistic <= threshold ? 0 : 1; }

/// Standard normal tail Q(y).
inline double q_tail(double y) { return 0.5 * std::erfc(y / std::numbers::sqrt2); }

inline double p_false_alarm(double threshold, double noise_variance, int samples) {
  if (samples < 1) throw InputError("p_false_alarm: sample count must be >= 1");
  return q_tail((threshold / noise_variance - 1.0) * std::sqrt(static_cast<double>(samples)));
}

inline double p_detect(double threshold, double noise_variance, double pu_snr, int samples) {
  if (samples < 1) throw InputError("p_detect: sample count must be >= 1");
  if (!(pu_snr >= 0.0)) throw InputError("p_detect: PU SNR must be >= 0");
  return q_tail((threshold / noise_variance - pu_snr - 1.0) *
                std::sqrt(static_cast<double>(samples) / (2.0 * pu_snr + 1.0)));
}

/// Midpoint of [sigma^2, sigma^2 (1 + rho)].
inline double default_threshold(double noise_variance, double pu_snr) {
  if (!(pu_snr >= 0.0)) throw InputError("default_threshold: PU SNR must be >= 0");
  return (noise_variance + noise_variance * (1.0 + pu_snr)) / 2.0;
}

inline bool threshold_in_bounds(double threshold, double noise_variance, double pu_snr) {
  return threshold >= noise_variance && threshold <= noise_variance * (1.0 + pu_snr);
}

/// Reports whether a (psi, rho, S) triple reaches a detection floor mu.
/// Validation only; training never enforces it.
inline bool meets_detection_floor(double threshold, double noise_variance, double pu_snr,
                                  int samples, double floor) {
  return p_detect(threshold, noise_variance, pu_snr, samples) >= floor;
}

}  // namespace hyssra::sensing
