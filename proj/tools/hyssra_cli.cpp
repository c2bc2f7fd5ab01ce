// Command-line front end: train, sense-study, eval, oracle.
//
// Relative output directories are resolved against $HYSSRA_OUTPUT_ROOT when it
// is set. Exit codes: 0 success, 2 bad input or config, 3 training divergence.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hyssra/experiment/config.hpp"
#include "hyssra/experiment/metrics_log.hpp"
#include "hyssra/experiment/oracle.hpp"
#include "hyssra/experiment/runner.hpp"
#include "hyssra/experiment/sensing_study.hpp"

namespace fs = std::filesystem;
using namespace hyssra;
using namespace hyssra::experiment;

namespace {

fs::path output_dir(const ExperimentConfig& cfg, const std::string& subdir = "") {
  fs::path dir = cfg.output_dir;
  if (dir.is_relative()) {
    if (const char* root = std::getenv("HYSSRA_OUTPUT_ROOT"); root && *root) dir = fs::path(root) / dir;
  }
  return subdir.empty() ? dir : dir / subdir;
}

ExperimentConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg = load_config(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

void print_means(const nlohmann::json& summary) {
  const auto& m = summary.at("means");
  std::cout << "trailing-" << summary.at("window").get<std::size_t>() << " means:";
  for (const char* key : {"reward", "omega_idle", "omega_occupied", "omega_collisions"}) {
    std::cout << ' ' << key << '=' << m.at(key).get<double>();
  }
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cognitive radio network simulator and hybrid multi-agent SAC trainer"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::vector<double> tau_grid, tc_grid, rho_grid;
  int trials = 1000;
  int snapshots = 100;

  auto* train = app.add_subcommand("train", "Train MHSAC and write metrics, summary and checkpoints");
  train->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Override the config seed");
  train->add_option("--steps", steps, "Override training.total_timesteps");

  auto* study = app.add_subcommand("sense-study", "Monte Carlo detection probability versus the closed form");
  study->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  study->add_option("--tau-grid", tau_grid, "Sensing windows tau, s (comma separated)")->required()->delimiter(',');
  study->add_option("--tc-grid", tc_grid, "Coherence times t_c, s (comma separated)")->required()->delimiter(',');
  study->add_option("--rho-grid", rho_grid, "PU SNRs rho (comma separated); default from config")->delimiter(',');
  study->add_option("--trials", trials, "Occupied-channel trials per grid point")->check(CLI::PositiveNumber);
  study->add_option("--seed", seed, "Override the config seed");

  auto* eval = app.add_subcommand("eval", "Run a checkpoint's deterministic policy");
  eval->add_option("checkpoint", checkpoint_path, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  eval->add_option("--steps", steps, "Environment steps")->required();
  eval->add_option("--seed", seed, "Override the config seed");

  auto* oracle = app.add_subcommand("oracle", "Brute-force allocation optimum on frozen snapshots");
  oracle->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  oracle->add_option("--seed", seed, "Override the config seed");
  oracle->add_option("--snapshots", snapshots, "Number of snapshots")->check(CLI::PositiveNumber);
  oracle->add_option("--checkpoint", checkpoint_path, "Also score this checkpoint's deterministic policy")
      ->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ExperimentConfig cfg = load(config_path, seed);
      if (steps) {
        cfg.total_timesteps = *steps;
        validate(cfg);
      }
      const TrainResult res = run_train(cfg, output_dir(cfg));
      std::cout << "wrote " << res.output_dir.string() << '\n';
      print_means(res.summary);
    } else if (*study) {
      const ExperimentConfig cfg = load(config_path, seed);
      const auto rows = run_sensing_study(cfg, tau_grid, tc_grid, rho_grid, trials);
      const fs::path dir = output_dir(cfg);
      fs::create_directories(dir);
      std::ofstream out(dir / "sensing_study.csv");
      write_sensing_study_csv(out, rows);
      write_sensing_study_csv(std::cout, rows);
    } else if (*eval) {
      const ExperimentConfig cfg = load(config_path, seed);
      if (*steps < 1) throw InputError("eval: --steps must be >= 1");
      const mhsac::Mhsac learner = load_checkpoint(checkpoint_path, cfg);
      env::CrnEnvironment environment(make_env_config(cfg, draw_occupancy(cfg)),
                                      hash_combine(environment_seed(cfg.seed), 0xe7a1));
      const auto log = run_eval(learner, environment, *steps);
      const fs::path dir = output_dir(cfg, "eval");
      emit_metrics(log, cfg.su_count, dir);
      const auto summary = summarize(log, cfg.su_count);
      std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
      std::cout << "wrote " << dir.string() << '\n';
      print_means(summary);
    } else if (*oracle) {
      const ExperimentConfig cfg = load(config_path, seed);
      const env::EnvConfig env_cfg = make_env_config(cfg, draw_occupancy(cfg));
      env::CrnEnvironment environment(env_cfg, hash_combine(environment_seed(cfg.seed), 0x04ac));
      if (!checkpoint_path.empty()) {
        const mhsac::Mhsac learner = load_checkpoint(checkpoint_path, cfg);
        const OracleGap gap = oracle_gap(learner, environment, snapshots);
        std::cout << "snapshots=" << gap.snapshots << " policy_total=" << gap.policy_total
                  << " oracle_total=" << gap.oracle_total << " ratio=" << gap.ratio() << '\n';
      } else {
        environment.reset();
        std::cout << "snapshot,occupancy,best_arms,best_score\n";
        for (int s = 0; s < snapshots; ++s) {
          const auto snap = environment.snapshot();
          const OracleResult best = brute_force_allocation_oracle(env_cfg, snap);
          std::cout << s << ',';
          for (int o : snap.occupancy) std::cout << o;
          std::cout << ',';
          for (int a : best.arms) std::cout << a;
          std::cout << ',' << format_double(best.score) << '\n';
          std::vector<env::Action> joint(static_cast<std::size_t>(cfg.su_count));
          for (int n = 0; n < cfg.su_count; ++n) joint[static_cast<std::size_t>(n)] = {best.arms[static_cast<std::size_t>(n)], cfg.max_power};
          environment.step(joint);
        }
      }
    }
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (!e.last_good_checkpoint().empty()) {
      std::cerr << "last good checkpoint: " << e.last_good_checkpoint().string() << '\n';
    } else {
      std::cerr << "no checkpoint was written before the divergence\n";
    }
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
