#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hyssra/crn_environment.hpp"
#include "hyssra/errors.hpp"
#include "hyssra/mhsac/learner.hpp"
#include "hyssra/mhsac/replay_buffer.hpp"

namespace hyssra::mhsac {

/// One logged environment step.
struct StepRecord {
  std::int64_t step = 0;
  double reward = 0.0;  // r_t
  env::Metrics metrics;
  std::vector<double> powers;  // W, 0 for SUs that stayed idle
  std::optional<double> critic_loss;
  std::optional<double> actor_loss;
  std::optional<double> alpha_discrete_loss;
  std::optional<double> alpha_continuous_loss;
  double alpha_discrete = 0.0;
  double alpha_continuous = 0.0;
};

inline void check_dimensions(const env::EnvConfig& env_cfg, const MhsacOptions& opt) {
  if (env_cfg.su_count != opt.agents) throw ConfigError("trainer: N differs between environment and learner");
  if (env_cfg.sensed_per_su() != opt.sensed) {
    throw ConfigError("trainer: M differs between environment and learner");
  }
  if (env_cfg.max_power != opt.max_power) throw ConfigError("trainer: p_max differs between environment and learner");
}

/// Runs `total_steps` environment steps. After `warmup_steps` of uniform
/// exploration: one critic update and one target sync per step, and one actor
/// plus temperature update every `policy_frequency` critic updates.
/// `on_step(record)` sees every row as it is produced.
template <class OnStep>
std::vector<StepRecord> train_loop(env::CrnEnvironment& environment, Mhsac& learner, std::int64_t total_steps,
                                   OnStep&& on_step) {
  const MhsacOptions& opt = learner.options();
  check_dimensions(environment.config(), opt);
  if (total_steps < 0) throw ConfigError("training.total_timesteps: must be >= 0");
  const double sigma2 = opt.noise_variance;
  const int n_agents = opt.agents;
  ReplayBuffer<Transition> buffer(static_cast<std::size_t>(opt.buffer_capacity));
  std::vector<StepRecord> log;
  log.reserve(static_cast<std::size_t>(total_steps));

  std::vector<double> features = encode_joint(environment.reset(), sigma2);
  std::int64_t critic_updates = 0;
  std::vector<env::Action> joint(static_cast<std::size_t>(n_agents));
  for (std::int64_t t = 0; t < total_steps; ++t) {
    Transition tr;
    tr.features = features;
    const bool exploring = t < opt.warmup_steps;
    for (int n = 0; n < n_agents; ++n) {
      const auto fw = static_cast<std::size_t>(opt.feature_width());
      const std::span<const double> local(features.data() + static_cast<std::size_t>(n) * fw, fw);
      const Decision dec = exploring ? learner.random_action(n, learner.rng())
                                     : learner.act(n, local, learner.rng(), false);
      joint[static_cast<std::size_t>(n)] = dec.action;
      tr.arms.push_back(dec.action.choice);
      tr.unit_actions.push_back(dec.unit_action);
    }
    const env::StepOutcome out = environment.step(joint);
    tr.reward = out.joint_reward;
    tr.next_features = encode_joint(out.next_observations, sigma2);
    features = tr.next_features;
    buffer.push(std::move(tr));

    StepRecord rec;
    rec.step = t;
    rec.reward = out.joint_reward;
    rec.metrics = out.metrics;
    for (int n = 0; n < n_agents; ++n) {
      const auto& a = joint[static_cast<std::size_t>(n)];
      rec.powers.push_back(a.choice < opt.sensed ? a.power : 0.0);
    }
    if (!exploring && buffer.size() >= static_cast<std::size_t>(opt.batch_size)) {
      const Batch batch = make_batch(buffer.sample(static_cast<std::size_t>(opt.batch_size), learner.rng()),
                                     n_agents, opt.feature_width());
      rec.critic_loss = learner.critic_update(batch);
      learner.target_sync();
      ++critic_updates;
      if (critic_updates % opt.policy_frequency == 0) {
        const ActorLossResult actor = learner.actor_update(batch);
        rec.actor_loss = actor.loss;
        const TemperatureLosses temp = learner.temperature_update(actor.discrete_entropy, actor.continuous_entropy);
        rec.alpha_discrete_loss = temp.discrete;
        rec.alpha_continuous_loss = temp.continuous;
      }
    }
    rec.alpha_discrete = learner.alpha_discrete();
    rec.alpha_continuous = learner.alpha_continuous();
    on_step(rec);
    log.push_back(std::move(rec));
  }
  return log;
}

inline std::vector<StepRecord> train_loop(env::CrnEnvironment& environment, Mhsac& learner,
                                          std::int64_t total_steps) {
  return train_loop(environment, learner, total_steps, [](const StepRecord&) {});
}

}  // namespace hyssra::mhsac
