#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "hyssra/channel_model.hpp"
#include "hyssra/rng.hpp"

using namespace hyssra;
using namespace hyssra::channel;

TEST(SampleGain, ConstantWithinBlock) {
  FadingProcess f = make_fading(2e-3, 1.0, 7);
  const auto g0 = sample_gain(f, 0.0);
  EXPECT_EQ(sample_gain(f, 1e-3), g0);
  EXPECT_EQ(sample_gain(f, 1.999e-3), g0);
  EXPECT_EQ(f.block_start, 0.0);
}

TEST(SampleGain, RedrawsAtBoundary) {
  FadingProcess f = make_fading(2e-3, 1.0, 7);
  const auto g0 = sample_gain(f, 0.0);
  const auto g1 = sample_gain(f, 2e-3);
  EXPECT_NE(g0, g1);
  EXPECT_EQ(f.block_index, 1);
  EXPECT_DOUBLE_EQ(f.block_start, 2e-3);
}

TEST(SampleGain, ZeroMeanPowerGivesZeroGain) {
  FadingProcess f = make_fading(1e-3, 0.0, 3);
  for (int b = 0; b < 50; ++b) EXPECT_EQ(sample_gain(f, b * 1e-3), std::complex<double>(0.0, 0.0));
}

TEST(SampleGain, NegativeTimeRejected) {
  FadingProcess f = make_fading(1e-3, 1.0, 3);
  EXPECT_THROW(sample_gain(f, -1e-6), InputError);
  EXPECT_THROW(gain_at(f, -1.0), InputError);
}

TEST(SampleGain, TimeBeforeCurrentBlockRejected) {
  FadingProcess f = make_fading(1e-3, 1.0, 3);
  sample_gain(f, 5e-3);
  EXPECT_THROW(sample_gain(f, 1e-3), InputError);
}

TEST(SampleGain, DeterministicGivenKeyAndBlock) {
  FadingProcess a = make_fading(1e-3, 1.0, 99);
  FadingProcess b = make_fading(1e-3, 1.0, 99);
  // b skips ahead; block 17 must still match.
  sample_gain(a, 0.0);
  EXPECT_EQ(sample_gain(a, 17.5e-3), sample_gain(b, 17.5e-3));
  EXPECT_EQ(gain_at(a, 17.5e-3), gain_of_block(a, 17));
}

TEST(SampleGain, MeanPowerOverManyBlocks) {
  FadingProcess f = make_fading(1.0, 1.0, 2024);
  double sum = 0.0;
  const int blocks = 100000;
  for (int b = 0; b < blocks; ++b) sum += std::norm(sample_gain(f, b));
  EXPECT_NEAR(sum / blocks, 1.0, 0.01);
}

TEST(SampleGain, PowerHistogramMatchesExponential) {
  // 20 equiprobable bins of exponential(g): edges -g ln(1 - i/20).
  const double g = 2.5;
  FadingProcess f = make_fading(1.0, g, 11);
  const int bins = 20;
  const int blocks = 100000;
  std::vector<int> counts(bins, 0);
  for (int b = 0; b < blocks; ++b) {
    const double p = std::norm(sample_gain(f, b));
    const double cdf = 1.0 - std::exp(-p / g);
    counts[std::min(bins - 1, static_cast<int>(cdf * bins))]++;
  }
  const double expected = static_cast<double>(blocks) / bins;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 36.19);  // chi^2_{19} upper 1% point
}

TEST(StepOccupancy, AbsorbingBusy) {
  PuOccupancy chain = make_occupancy({0.0}, {1.0}, {1});
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    step_occupancy(chain, rng);
    ASSERT_EQ(chain.state[0], 1);
  }
}

TEST(StepOccupancy, DeterministicAlternation) {
  PuOccupancy chain = make_occupancy({1.0}, {0.0}, {0});
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    step_occupancy(chain, rng);
    ASSERT_EQ(chain.state[0], (i + 1) % 2);
  }
}

TEST(StepOccupancy, BusyFractionMatchesStationaryLaw) {
  PuOccupancy chain = make_occupancy({0.3}, {0.7}, {0});
  Rng rng(5);
  const int steps = 1000000;
  int busy = 0;
  for (int i = 0; i < steps; ++i) {
    step_occupancy(chain, rng);
    busy += chain.state[0];
  }
  EXPECT_NEAR(static_cast<double>(busy) / steps, 0.5, 0.005);
}

TEST(StepOccupancy, IdleFractionConvergesForDrawnChains) {
  Rng draw(8);
  for (int trial = 0; trial < 3; ++trial) {
    const double p_io = uniform_real(draw, 0.2, 0.5);
    const double p_oo = uniform_real(draw, 0.6, 0.9);
    PuOccupancy chain = make_occupancy({p_io}, {p_oo}, {0});
    Rng rng(100 + trial);
    const int steps = 1000000;
    int idle = 0;
    for (int i = 0; i < steps; ++i) {
      step_occupancy(chain, rng);
      idle += 1 - chain.state[0];
    }
    const double expected = stationary_idle_prob(p_io, p_oo);
    EXPECT_NEAR(static_cast<double>(idle) / steps, expected, 0.01 * expected);
  }
}

TEST(StepOccupancy, InvalidProbabilitiesRejected) {
  EXPECT_THROW(make_occupancy({1.2}, {0.5}, {0}), InputError);
  EXPECT_THROW(make_occupancy({0.2}, {-0.1}, {0}), InputError);
  EXPECT_THROW(make_occupancy({0.2, 0.3}, {0.5}, {0}), InputError);
  EXPECT_THROW(make_occupancy({0.2}, {0.5}, {2}), InputError);
}

TEST(StationaryIdleProb, Examples) {
  EXPECT_DOUBLE_EQ(stationary_idle_prob(0.5, 0.5), 0.5);
  EXPECT_NEAR(stationary_idle_prob(0.2, 0.6), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(stationary_idle_prob(1.0, 1.0), 0.0);
}

TEST(StationaryIdleProb, MatchesLongRunSimulation) {
  PuOccupancy chain = make_occupancy({0.2}, {0.6}, {1});
  Rng rng(17);
  const int steps = 1000000;
  int idle = 0;
  for (int i = 0; i < steps; ++i) {
    step_occupancy(chain, rng);
    idle += 1 - chain.state[0];
  }
  EXPECT_NEAR(static_cast<double>(idle) / steps, stationary_idle_prob(chain, 0), 0.005);
}

TEST(StationaryIdleProb, DegenerateChainRejected) {
  EXPECT_THROW(stationary_idle_prob(0.0, 1.0), InputError);
}

TEST(ResetToStationary, MatchesStationaryLaw) {
  PuOccupancy chain = make_occupancy({0.2}, {0.6}, {0});
  Rng rng(4);
  int idle = 0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    reset_to_stationary(chain, rng);
    idle += 1 - chain.state[0];
  }
  EXPECT_NEAR(static_cast<double>(idle) / draws, 2.0 / 3.0, 0.005);
}

TEST(ChannelParams, Validation) {
  ChannelParams p;
  p.channel_count = 2;
  p.noise_variance = 5e-3;
  p.pu_power = {1.0, 1.0};
  p.pu_snr = {{200.0, 200.0}};
  EXPECT_NO_THROW(validate(p, 1));
  EXPECT_DOUBLE_EQ(p.channel_bandwidth(), 0.5);
  ChannelParams bad = p;
  bad.channel_count = 0;
  EXPECT_THROW(validate(bad, 1), InputError);
  bad = p;
  bad.noise_variance = 0.0;
  EXPECT_THROW(validate(bad, 1), InputError);
  bad = p;
  bad.pu_snr = {{200.0, -1.0}};
  EXPECT_THROW(validate(bad, 1), InputError);
  EXPECT_THROW(validate(p, 2), InputError);
}
