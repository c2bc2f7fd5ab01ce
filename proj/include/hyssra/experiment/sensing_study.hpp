#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "hyssra/channel_model.hpp"
#include "hyssra/errors.hpp"
#include "hyssra/experiment/config.hpp"
#include "hyssra/experiment/metrics_log.hpp"
#include "hyssra/rng.hpp"
#include "hyssra/sensing.hpp"

namespace hyssra::experiment {

struct SensingStudyRow {
  double window = 0.0;          // tau, s
  double coherence_time = 0.0;  // t_c, s
  double pu_snr = 0.0;          // rho
  int samples = 0;              // S
  int realizations = 0;         // C
  double threshold = 0.0;       // psi, W
  double empirical_detect = 0.0;
  double analytic_detect = 0.0;
  double analytic_false_alarm = 0.0;
};

/// Fraction of `trials` independent occupied-channel sensing windows that
/// declare the PU present. Each trial sees a fresh Rayleigh channel.
inline double empirical_detection_rate(double noise_variance, double pu_snr, double threshold, int samples,
                                       int realizations, double coherence_time, sensing::SignalModel signal,
                                       int trials, std::uint64_t seed) {
  if (trials < 1) throw InputError("empirical_detection_rate: trials must be >= 1");
  Rng rng(seed);
  int detected = 0;
  for (int i = 0; i < trials; ++i) {
    channel::FadingProcess fading =
        channel::make_fading(coherence_time, 1.0, hash_combine(seed, static_cast<std::uint64_t>(i)));
    const sensing::SensingWindow window{0.0, samples, realizations};
    const auto z = sensing::collect_samples(true, fading, noise_variance, pu_snr, window, signal, rng);
    detected += sensing::detect(sensing::test_statistic(z), threshold);
  }
  return static_cast<double>(detected) / trials;
}

/// Monte Carlo P^de versus the closed form on every (tau, t_c, rho) grid
/// point. An empty `rho_grid` uses the config's rho. Thresholds are the
/// config's psi or the midpoint sigma^2 (1 + rho / 2).
inline std::vector<SensingStudyRow> run_sensing_study(const ExperimentConfig& cfg, const std::vector<double>& tau_grid,
                                                      const std::vector<double>& tc_grid,
                                                      std::vector<double> rho_grid = {}, int trials = 1000) {
  if (tau_grid.empty() || tc_grid.empty()) throw InputError("sensing study: tau and t_c grids must be non-empty");
  if (rho_grid.empty()) rho_grid.push_back(cfg.pu_snr);
  const double sigma2 = cfg.noise_variance;
  const int m = cfg.sensed_per_su;
  std::vector<SensingStudyRow> rows;
  std::uint64_t point = 0;
  for (double rho : rho_grid) {
    if (!(rho >= 0.0)) throw InputError("sensing study: rho must be >= 0");
    const double psi = cfg.threshold.value_or(sensing::default_threshold(sigma2, rho));
    for (double tau : tau_grid) {
      if (!(tau > 0.0 && tau < cfg.time_block)) throw InputError("sensing study: tau must satisfy 0 < tau < Gamma");
      const int s = sensing::sample_count(cfg.sampling_rate, tau, m);
      if (s < 1) throw InputError("sensing study: floor(epsilon tau / M) must be >= 1");
      for (double tc : tc_grid) {
        SensingStudyRow r;
        r.window = tau;
        r.coherence_time = tc;
        r.pu_snr = rho;
        r.samples = s;
        r.realizations = sensing::realizations_per_window(tau, tc, m);
        r.threshold = psi;
        r.empirical_detect = empirical_detection_rate(sigma2, rho, psi, s, std::min(r.realizations, s), tc, cfg.signal,
                                                      trials, hash_combine(hash_combine(cfg.seed, 0x5e45), point++));
        r.analytic_detect = sensing::p_detect(psi, sigma2, rho, s);
        r.analytic_false_alarm = sensing::p_false_alarm(psi, sigma2, s);
        rows.push_back(r);
      }
    }
  }
  return rows;
}

inline void write_sensing_study_csv(std::ostream& out, const std::vector<SensingStudyRow>& rows) {
  out << "tau_s,coherence_time_s,pu_snr,samples,realizations,threshold_W,empirical_p_detect,analytic_p_detect,"
         "analytic_p_false_alarm\n";
  for (const auto& r : rows) {
    out << format_double(r.window) << ',' << format_double(r.coherence_time) << ',' << format_double(r.pu_snr) << ','
        << r.samples << ',' << r.realizations << ',' << format_double(r.threshold) << ','
        << format_double(r.empirical_detect) << ',' << format_double(r.analytic_detect) << ','
        << format_double(r.analytic_false_alarm) << '\n';
  }
}

}  // namespace hyssra::experiment
