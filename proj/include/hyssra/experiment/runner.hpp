#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyssra/crn_environment.hpp"
#include "hyssra/errors.hpp"
#include "hyssra/experiment/config.hpp"
#include "hyssra/experiment/metrics_log.hpp"
#include "hyssra/experiment/oracle.hpp"
#include "hyssra/mhsac/learner.hpp"
#include "hyssra/mhsac/train_loop.hpp"

namespace hyssra::experiment {

namespace fs = std::filesystem;

/// Writes the learner's networks plus manifest.json into `dir`.
inline void save_checkpoint(const fs::path& dir, const mhsac::Mhsac& learner, const ExperimentConfig& cfg,
                            std::int64_t step) {
  learner.save(dir);
  std::ostringstream rng_state;
  rng_state << learner.rng();
  const nlohmann::json manifest = {
      {"format", "hyssra-checkpoint"},
      {"version", 1},
      {"config_hash", config_hash(cfg)},
      {"step", step},
      {"agents", learner.options().agents},
      {"sensed_per_su", learner.options().sensed},
      {"log_alpha_discrete", learner.log_alpha_discrete()},
      {"log_alpha_continuous", learner.log_alpha_continuous()},
      {"rng_state", rng_state.str()},
  };
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("checkpoint: cannot write " + (dir / "manifest.json").string());
}

inline nlohmann::json read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InputError("checkpoint: missing " + (dir / "manifest.json").string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("checkpoint: bad manifest: ") + e.what());
  }
}

/// Learner for `cfg` with parameters, temperatures and rng restored from `dir`.
inline mhsac::Mhsac load_checkpoint(const fs::path& dir, const ExperimentConfig& cfg) {
  const nlohmann::json manifest = read_manifest(dir);
  mhsac::Mhsac learner(make_mhsac_options(cfg), learner_seed(cfg.seed));
  if (manifest.at("agents").get<int>() != cfg.su_count || manifest.at("sensed_per_su").get<int>() != cfg.sensed_per_su) {
    throw ConfigError("checkpoint: N or M differs from the config");
  }
  learner.load(dir);
  learner.set_log_alphas(manifest.at("log_alpha_discrete").get<double>(),
                         manifest.at("log_alpha_continuous").get<double>());
  std::istringstream rng_state(manifest.at("rng_state").get<std::string>());
  rng_state >> learner.rng();
  return learner;
}

struct TrainResult {
  std::vector<mhsac::StepRecord> log;
  nlohmann::json summary;
  fs::path output_dir;
  fs::path checkpoint_dir;
};

/// Raised when training diverges; carries the newest checkpoint written.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, fs::path last_good)
      : DivergenceError(what), last_good_(std::move(last_good)) {}
  const fs::path& last_good_checkpoint() const { return last_good_; }

 private:
  fs::path last_good_;
};

inline nlohmann::json occupancy_json(const OccupancyDraws& d) {
  return {{"p_idle_to_busy", d.p_idle_to_busy}, {"p_busy_to_busy", d.p_busy_to_busy}};
}

/// Trains per `cfg` and writes metrics.csv, metrics_smoothed.csv, summary.json
/// and checkpoint/ under `out_dir`. Intermediate checkpoints go to
/// checkpoints/step_<n>/.
inline TrainResult run_train(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const OccupancyDraws draws = draw_occupancy(cfg);
  env::CrnEnvironment environment(make_env_config(cfg, draws), environment_seed(cfg.seed));
  mhsac::Mhsac learner(make_mhsac_options(cfg), learner_seed(cfg.seed));

  TrainResult result;
  result.output_dir = out_dir;
  result.checkpoint_dir = out_dir / "checkpoint";
  fs::path last_good;
  std::int64_t done = 0;
  std::vector<mhsac::StepRecord> partial;
  try {
    result.log = mhsac::train_loop(environment, learner, cfg.total_timesteps, [&](const mhsac::StepRecord& rec) {
      partial.push_back(rec);
      done = rec.step + 1;
      if (done % cfg.checkpoint_interval == 0 && done < cfg.total_timesteps) {
        last_good = out_dir / "checkpoints" / ("step_" + std::to_string(done));
        save_checkpoint(last_good, learner, cfg, done);
      }
    });
  } catch (const DivergenceError& e) {
    if (!partial.empty()) emit_metrics(partial, cfg.su_count, out_dir);
    throw TrainingDiverged("training diverged at step " + std::to_string(done) + ": " + e.what(), last_good);
  }
  save_checkpoint(result.checkpoint_dir, learner, cfg, cfg.total_timesteps);
  if (!result.log.empty()) emit_metrics(result.log, cfg.su_count, out_dir);
  result.summary = summarize(result.log, cfg.su_count);
  result.summary["seed"] = cfg.seed;
  result.summary["config_hash"] = config_hash(cfg);
  result.summary["occupancy"] = occupancy_json(draws);
  result.summary["target_rate"] = cfg.target_rate;
  result.summary["sensed_per_su"] = cfg.sensed_per_su;
  std::ofstream(out_dir / "summary.json") << result.summary.dump(2) << '\n';
  return result;
}

/// Runs the deterministic policy for `steps` env steps with no learning.
inline std::vector<mhsac::StepRecord> run_eval(const mhsac::Mhsac& learner, env::CrnEnvironment& environment,
                                               std::int64_t steps) {
  const auto& opt = learner.options();
  const auto fw = static_cast<std::size_t>(opt.feature_width());
  std::vector<mhsac::StepRecord> log;
  std::vector<double> features = mhsac::encode_joint(environment.reset(), opt.noise_variance);
  std::vector<env::Action> joint(static_cast<std::size_t>(opt.agents));
  Rng unused(0);
  for (std::int64_t t = 0; t < steps; ++t) {
    for (int n = 0; n < opt.agents; ++n) {
      const std::span<const double> local(features.data() + static_cast<std::size_t>(n) * fw, fw);
      joint[static_cast<std::size_t>(n)] = learner.act(n, local, unused, true).action;
    }
    const env::StepOutcome out = environment.step(joint);
    features = mhsac::encode_joint(out.next_observations, opt.noise_variance);
    mhsac::StepRecord rec;
    rec.step = t;
    rec.reward = out.joint_reward;
    rec.metrics = out.metrics;
    for (int n = 0; n < opt.agents; ++n) {
      const auto& a = joint[static_cast<std::size_t>(n)];
      rec.powers.push_back(a.choice < opt.sensed ? a.power : 0.0);
    }
    rec.alpha_discrete = learner.alpha_discrete();
    rec.alpha_continuous = learner.alpha_continuous();
    log.push_back(std::move(rec));
  }
  return log;
}

struct OracleGap {
  double policy_total = 0.0;
  double oracle_total = 0.0;
  int snapshots = 0;
  double ratio() const { return oracle_total != 0.0 ? policy_total / oracle_total : 0.0; }
};

/// Scores deterministic joint actions against the brute-force optimum on
/// `snapshots` consecutive frozen blocks (occupancy and gains at the
/// transmission instant). The environment advances with the policy's actions.
inline OracleGap oracle_gap(const mhsac::Mhsac& learner, env::CrnEnvironment& environment, int snapshots) {
  const auto& opt = learner.options();
  const auto& cfg = environment.config();
  const auto fw = static_cast<std::size_t>(opt.feature_width());
  OracleGap gap;
  std::vector<double> features = mhsac::encode_joint(environment.reset(), opt.noise_variance);
  Rng unused(0);
  for (int s = 0; s < snapshots; ++s) {
    std::vector<env::Action> joint(static_cast<std::size_t>(opt.agents));
    std::vector<int> arms;
    std::vector<double> powers;
    for (int n = 0; n < opt.agents; ++n) {
      const std::span<const double> local(features.data() + static_cast<std::size_t>(n) * fw, fw);
      joint[static_cast<std::size_t>(n)] = learner.act(n, local, unused, true).action;
      arms.push_back(joint[static_cast<std::size_t>(n)].choice);
      powers.push_back(joint[static_cast<std::size_t>(n)].power);
    }
    const env::ChannelSnapshot snap = environment.snapshot();
    gap.policy_total += score_joint_action(cfg, snap, arms, powers);
    gap.oracle_total += brute_force_allocation_oracle(cfg, snap).score;
    ++gap.snapshots;
    const env::StepOutcome out = environment.step(joint);
    features = mhsac::encode_joint(out.next_observations, opt.noise_variance);
  }
  return gap;
}

}  // namespace hyssra::experiment
