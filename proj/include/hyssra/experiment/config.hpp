#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hyssra/crn_environment.hpp"
#include "hyssra/errors.hpp"
#include "hyssra/mhsac/learner.hpp"
#include "hyssra/rng.hpp"
#include "hyssra/sensing.hpp"

namespace hyssra::experiment {

using json = nlohmann::json;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Fully resolved experiment settings ("auto" entries already evaluated).
struct ExperimentConfig {
  // environment
  int channels = 12;        // K
  int su_count = 6;         // N
  int sensed_per_su = 3;    // M
  double sampling_rate = 1e4;    // epsilon, samples/s
  double coherence_time = 2e-3;  // t_c, s
  double window = 0.03;          // tau, s
  double time_block = 1.0;       // Gamma, s
  double bandwidth = 1.0;        // B, Hz
  double noise_variance = 5e-3;  // sigma^2, W
  double max_power = 5e-3;       // p_max, W
  double pu_power = 1.0;         // p^P, W
  double pu_snr = 200.0;         // rho
  std::optional<double> threshold;  // explicit psi, W; midpoint when empty
  double occupancy_penalty = 10.0;
  double rate_penalty = 2.5;
  double target_rate = 0.0;  // zeta
  Range p_idle_to_busy{0.2, 0.5};
  Range p_busy_to_busy{0.6, 0.9};
  sensing::SignalModel signal = sensing::SignalModel::kBpsk;
  env::LinkGainMeans gain_means;

  // training
  int episode_length = 3000;
  std::int64_t total_timesteps = 60000;
  int batch_size = 64;
  int policy_frequency = 10;
  double gamma = 0.4;
  int buffer_capacity = 30000;
  double target_entropy_discrete = 0.0;
  double target_entropy_continuous = 0.0;
  std::vector<int> hidden_layers{256, 128, 64};
  int mixer_embed = 32;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double temperature_lr = 1e-3;
  double initial_alpha_discrete = 0.05;
  double initial_alpha_continuous = 0.05;
  double polyak = 0.005;
  int warmup_steps = 1000;
  std::int64_t checkpoint_interval = 10000;

  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
};

/// zeta = 0.1 log2(1 + p_max / (2 sigma^2)).
inline double default_target_rate(double max_power, double noise_variance) {
  return 0.1 * std::log2(1.0 + max_power / (2.0 * noise_variance));
}

/// ceil(K / N) + 1.
inline int auto_sensed_per_su(int channels, int su_count) { return (channels + su_count - 1) / su_count + 1; }

namespace detail {

inline std::string where(const std::string& section, const std::string& key) { return section + "." + key; }

inline void reject_unknown(const json& obj, const std::string& section, const std::set<std::string>& known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError(where(section, it.key()) + ": unknown field");
  }
}

inline bool is_auto(const json& v) { return v.is_string() && v.get<std::string>() == "auto"; }

inline double number(const json& obj, const std::string& section, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where(section, key) + ": must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where(section, key) + ": must be finite");
  return x;
}

inline std::int64_t integer(const json& obj, const std::string& section, const std::string& key,
                            std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15) return static_cast<std::int64_t>(x);
  }
  throw ConfigError(where(section, key) + ": must be an integer");
}

/// Number or "auto"; empty optional means auto.
inline std::optional<double> auto_number(const json& obj, const std::string& section, const std::string& key) {
  if (!obj.contains(key) || is_auto(obj.at(key))) return std::nullopt;
  return number(obj, section, key, 0.0);
}

inline Range range(const json& obj, const std::string& section, const std::string& key, Range fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(where(section, key) + ": must be a [lo, hi] pair of numbers");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

inline void require(bool ok, const std::string& field, const std::string& constraint) {
  if (!ok) throw ConfigError(field + ": must satisfy " + constraint);
}

}  // namespace detail

/// Checks every constraint on a resolved config; throws ConfigError naming the field.
inline void validate(const ExperimentConfig& c) {
  using detail::require;
  require(c.channels >= 1, "environment.channels", "K >= 1");
  require(c.su_count >= 1, "environment.secondary_users", "N >= 1");
  require(c.sensed_per_su >= 1 && c.sensed_per_su <= c.channels, "environment.sensed_per_su", "1 <= M <= K");
  require(c.sampling_rate > 0.0, "environment.sampling_rate", "epsilon > 0");
  require(c.coherence_time > 0.0, "environment.coherence_time", "t_c > 0");
  require(c.time_block > 0.0, "environment.time_block", "Gamma > 0");
  require(c.window > 0.0 && c.window < c.time_block, "environment.window", "0 < tau < Gamma");
  require(sensing::sample_count(c.sampling_rate, c.window, c.sensed_per_su) >= 1, "environment.window",
          "floor(epsilon tau / M) >= 1");
  require(c.bandwidth > 0.0, "environment.bandwidth", "B > 0");
  require(c.noise_variance > 0.0, "environment.noise_variance", "sigma^2 > 0");
  require(c.max_power > 0.0, "environment.max_power", "p_max > 0");
  require(c.pu_power >= 0.0, "environment.pu_power", "p^P >= 0");
  require(c.pu_snr >= 0.0, "environment.pu_snr", "rho >= 0");
  if (c.threshold) {
    require(sensing::threshold_in_bounds(*c.threshold, c.noise_variance, c.pu_snr), "environment.threshold",
            "sigma^2 <= psi <= sigma^2 (1 + rho)");
  }
  require(c.occupancy_penalty > 0.0, "environment.occupancy_penalty", "Delta_occ > 0");
  require(c.rate_penalty > 0.0, "environment.rate_penalty", "Delta_rate > 0");
  require(c.target_rate > 0.0, "environment.target_rate", "zeta > 0");
  for (const auto& [name, r] : {std::pair{"environment.p_idle_to_busy_range", c.p_idle_to_busy},
                                std::pair{"environment.p_busy_to_busy_range", c.p_busy_to_busy}}) {
    require(r.lo >= 0.0 && r.lo <= r.hi && r.hi <= 1.0, name, "0 <= lo <= hi <= 1");
  }
  require(c.gain_means.pu_to_su >= 0.0 && c.gain_means.su_self >= 0.0 && c.gain_means.su_cross >= 0.0,
          "environment.gain_means", "every mean gain >= 0");
  require(c.episode_length >= 1, "training.episode_length", ">= 1");
  require(c.total_timesteps >= 0, "training.total_timesteps", ">= 0");
  require(c.batch_size >= 1, "training.batch_size", ">= 1");
  require(c.policy_frequency >= 1, "training.policy_frequency", ">= 1");
  require(c.gamma >= 0.0 && c.gamma < 1.0, "training.gamma", "0 <= gamma < 1");
  require(c.buffer_capacity >= c.batch_size, "training.buffer_capacity", "capacity >= batch_size");
  require(!c.hidden_layers.empty(), "training.hidden_layers", "at least one hidden layer");
  for (int h : c.hidden_layers) require(h >= 1, "training.hidden_layers", "every width >= 1");
  require(c.mixer_embed >= 1, "training.mixer_embed", ">= 1");
  require(c.actor_lr > 0.0, "training.actor_lr", "> 0");
  require(c.critic_lr > 0.0, "training.critic_lr", "> 0");
  require(c.temperature_lr > 0.0, "training.temperature_lr", "> 0");
  require(c.initial_alpha_discrete > 0.0, "training.initial_alpha_discrete", "> 0");
  require(c.initial_alpha_continuous > 0.0, "training.initial_alpha_continuous", "> 0");
  require(c.polyak > 0.0 && c.polyak <= 1.0, "training.polyak", "0 < c <= 1");
  require(c.warmup_steps >= 0, "training.warmup_steps", ">= 0");
  require(c.checkpoint_interval >= 1, "training.checkpoint_interval", ">= 1");
}

inline ExperimentConfig parse_config(const json& root) {
  using namespace detail;
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(root, "config", {"seed", "output_dir", "environment", "training"});
  ExperimentConfig c;
  if (root.contains("seed")) {
    const json& s = root.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      throw ConfigError("config.seed: must be a non-negative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  if (root.contains("output_dir")) {
    if (!root.at("output_dir").is_string()) throw ConfigError("config.output_dir: must be a string");
    c.output_dir = root.at("output_dir").get<std::string>();
  }

  const json env = root.value("environment", json::object());
  if (!env.is_object()) throw ConfigError("config.environment: must be an object");
  const std::string e = "environment";
  reject_unknown(env, e,
                 {"channels", "secondary_users", "sensed_per_su", "sampling_rate", "coherence_time", "window",
                  "time_block", "bandwidth", "noise_variance", "max_power", "pu_power", "pu_snr", "threshold",
                  "occupancy_penalty", "rate_penalty", "target_rate", "p_idle_to_busy_range",
                  "p_busy_to_busy_range", "signal", "gain_means"});
  c.channels = static_cast<int>(integer(env, e, "channels", c.channels));
  c.su_count = static_cast<int>(integer(env, e, "secondary_users", c.su_count));
  require(c.channels >= 1, "environment.channels", "K >= 1");
  require(c.su_count >= 1, "environment.secondary_users", "N >= 1");
  if (env.contains("sensed_per_su") && !is_auto(env.at("sensed_per_su"))) {
    c.sensed_per_su = static_cast<int>(integer(env, e, "sensed_per_su", 0));
  } else {
    c.sensed_per_su = std::min(auto_sensed_per_su(c.channels, c.su_count), c.channels);
  }
  c.sampling_rate = number(env, e, "sampling_rate", c.sampling_rate);
  c.coherence_time = number(env, e, "coherence_time", c.coherence_time);
  c.window = auto_number(env, e, "window").value_or(c.sensed_per_su * 1e-2);
  c.time_block = number(env, e, "time_block", c.time_block);
  c.bandwidth = number(env, e, "bandwidth", c.bandwidth);
  c.noise_variance = number(env, e, "noise_variance", c.noise_variance);
  c.max_power = number(env, e, "max_power", c.max_power);
  c.pu_power = number(env, e, "pu_power", c.pu_power);
  if (env.contains("gain_means")) {
    const json& g = env.at("gain_means");
    if (!g.is_object()) throw ConfigError("environment.gain_means: must be an object");
    const std::string gs = "environment.gain_means";
    reject_unknown(g, gs, {"pu_to_su", "su_self", "su_cross"});
    c.gain_means.pu_to_su = number(g, gs, "pu_to_su", 1.0);
    c.gain_means.su_self = number(g, gs, "su_self", 1.0);
    c.gain_means.su_cross = number(g, gs, "su_cross", 1.0);
  }
  require(c.noise_variance > 0.0, "environment.noise_variance", "sigma^2 > 0");
  c.pu_snr = auto_number(env, e, "pu_snr").value_or(c.pu_power * c.gain_means.pu_to_su / c.noise_variance);
  c.threshold = auto_number(env, e, "threshold");
  c.occupancy_penalty = number(env, e, "occupancy_penalty", c.occupancy_penalty);
  c.rate_penalty = number(env, e, "rate_penalty", c.rate_penalty);
  c.target_rate = auto_number(env, e, "target_rate").value_or(default_target_rate(c.max_power, c.noise_variance));
  c.p_idle_to_busy = range(env, e, "p_idle_to_busy_range", c.p_idle_to_busy);
  c.p_busy_to_busy = range(env, e, "p_busy_to_busy_range", c.p_busy_to_busy);
  if (env.contains("signal")) {
    const json& s = env.at("signal");
    if (s == "bpsk") {
      c.signal = sensing::SignalModel::kBpsk;
    } else if (s == "gaussian") {
      c.signal = sensing::SignalModel::kGaussian;
    } else {
      throw ConfigError("environment.signal: must be \"bpsk\" or \"gaussian\"");
    }
  }

  const json tr = root.value("training", json::object());
  if (!tr.is_object()) throw ConfigError("config.training: must be an object");
  const std::string t = "training";
  reject_unknown(tr, t,
                 {"episode_length", "total_timesteps", "batch_size", "policy_frequency", "gamma", "buffer_capacity",
                  "target_entropy_discrete", "target_entropy_continuous", "hidden_layers", "mixer_embed",
                  "actor_lr", "critic_lr", "temperature_lr", "initial_alpha_discrete", "initial_alpha_continuous",
                  "polyak", "warmup_steps", "checkpoint_interval"});
  c.episode_length = static_cast<int>(integer(tr, t, "episode_length", c.episode_length));
  c.total_timesteps = integer(tr, t, "total_timesteps", c.total_timesteps);
  c.batch_size = static_cast<int>(integer(tr, t, "batch_size", c.batch_size));
  c.policy_frequency = static_cast<int>(integer(tr, t, "policy_frequency", c.policy_frequency));
  c.gamma = number(tr, t, "gamma", c.gamma);
  c.buffer_capacity = static_cast<int>(integer(tr, t, "buffer_capacity", c.buffer_capacity));
  c.target_entropy_discrete = auto_number(tr, t, "target_entropy_discrete").value_or(0.01 * c.sensed_per_su);
  c.target_entropy_continuous = number(tr, t, "target_entropy_continuous", 0.0);
  if (tr.contains("hidden_layers")) {
    const json& h = tr.at("hidden_layers");
    if (!h.is_array()) throw ConfigError("training.hidden_layers: must be an array of widths");
    c.hidden_layers.clear();
    for (const json& w : h) {
      if (!w.is_number_integer()) throw ConfigError("training.hidden_layers: widths must be integers");
      c.hidden_layers.push_back(w.get<int>());
    }
  }
  c.mixer_embed = static_cast<int>(integer(tr, t, "mixer_embed", c.mixer_embed));
  c.actor_lr = number(tr, t, "actor_lr", c.actor_lr);
  c.critic_lr = number(tr, t, "critic_lr", c.critic_lr);
  c.temperature_lr = number(tr, t, "temperature_lr", c.temperature_lr);
  c.initial_alpha_discrete = number(tr, t, "initial_alpha_discrete", c.initial_alpha_discrete);
  c.initial_alpha_continuous = number(tr, t, "initial_alpha_continuous", c.initial_alpha_continuous);
  c.polyak = number(tr, t, "polyak", c.polyak);
  c.warmup_steps = static_cast<int>(integer(tr, t, "warmup_steps", c.warmup_steps));
  c.checkpoint_interval = integer(tr, t, "checkpoint_interval", c.checkpoint_interval);

  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& err) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + err.what());
  }
  return parse_config(root);
}

/// Resolved config as JSON; parse_config(to_json(c)) reproduces c.
inline json to_json(const ExperimentConfig& c) {
  json env = {
      {"channels", c.channels},
      {"secondary_users", c.su_count},
      {"sensed_per_su", c.sensed_per_su},
      {"sampling_rate", c.sampling_rate},
      {"coherence_time", c.coherence_time},
      {"window", c.window},
      {"time_block", c.time_block},
      {"bandwidth", c.bandwidth},
      {"noise_variance", c.noise_variance},
      {"max_power", c.max_power},
      {"pu_power", c.pu_power},
      {"pu_snr", c.pu_snr},
      {"occupancy_penalty", c.occupancy_penalty},
      {"rate_penalty", c.rate_penalty},
      {"target_rate", c.target_rate},
      {"p_idle_to_busy_range", {c.p_idle_to_busy.lo, c.p_idle_to_busy.hi}},
      {"p_busy_to_busy_range", {c.p_busy_to_busy.lo, c.p_busy_to_busy.hi}},
      {"signal", c.signal == sensing::SignalModel::kBpsk ? "bpsk" : "gaussian"},
      {"gain_means",
       {{"pu_to_su", c.gain_means.pu_to_su}, {"su_self", c.gain_means.su_self}, {"su_cross", c.gain_means.su_cross}}},
  };
  env["threshold"] = c.threshold ? json(*c.threshold) : json("auto");
  json tr = {
      {"episode_length", c.episode_length},
      {"total_timesteps", c.total_timesteps},
      {"batch_size", c.batch_size},
      {"policy_frequency", c.policy_frequency},
      {"gamma", c.gamma},
      {"buffer_capacity", c.buffer_capacity},
      {"target_entropy_discrete", c.target_entropy_discrete},
      {"target_entropy_continuous", c.target_entropy_continuous},
      {"hidden_layers", c.hidden_layers},
      {"mixer_embed", c.mixer_embed},
      {"actor_lr", c.actor_lr},
      {"critic_lr", c.critic_lr},
      {"temperature_lr", c.temperature_lr},
      {"initial_alpha_discrete", c.initial_alpha_discrete},
      {"initial_alpha_continuous", c.initial_alpha_continuous},
      {"polyak", c.polyak},
      {"warmup_steps", c.warmup_steps},
      {"checkpoint_interval", c.checkpoint_interval},
  };
  return {{"seed", c.seed}, {"output_dir", c.output_dir}, {"environment", env}, {"training", tr}};
}

/// FNV-1a over the canonical JSON of everything except output_dir.
inline std::string config_hash(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

/// Per-channel Markov transition probabilities, drawn once per experiment.
struct OccupancyDraws {
  std::vector<double> p_idle_to_busy;
  std::vector<double> p_busy_to_busy;
};

inline OccupancyDraws draw_occupancy(const ExperimentConfig& c) {
  Rng rng(hash_combine(c.seed, 0x0cc0));
  OccupancyDraws d;
  for (int k = 0; k < c.channels; ++k) {
    d.p_idle_to_busy.push_back(uniform_real(rng, c.p_idle_to_busy.lo, c.p_idle_to_busy.hi));
    d.p_busy_to_busy.push_back(uniform_real(rng, c.p_busy_to_busy.lo, c.p_busy_to_busy.hi));
  }
  return d;
}

inline env::EnvConfig make_env_config(const ExperimentConfig& c, const OccupancyDraws& draws) {
  env::EnvConfig e;
  e.su_count = c.su_count;
  e.channel.bandwidth = c.bandwidth;
  e.channel.channel_count = c.channels;
  e.channel.noise_variance = c.noise_variance;
  e.channel.pu_power.assign(static_cast<std::size_t>(c.channels), c.pu_power);
  e.channel.pu_snr.assign(static_cast<std::size_t>(c.su_count),
                          std::vector<double>(static_cast<std::size_t>(c.channels), c.pu_snr));
  e.sensing.sampling_rate = c.sampling_rate;
  e.sensing.window = c.window;
  e.sensing.time_block = c.time_block;
  e.sensing.sensed_per_su = c.sensed_per_su;
  e.sensing.signal = c.signal;
  const double psi = c.threshold.value_or(sensing::default_threshold(c.noise_variance, c.pu_snr));
  e.sensing.thresholds.assign(static_cast<std::size_t>(c.su_count),
                              std::vector<double>(static_cast<std::size_t>(c.channels), psi));
  e.sensed_channels = env::assign_sensed_channels(c.channels, c.su_count, c.sensed_per_su);
  e.max_power.assign(static_cast<std::size_t>(c.su_count), c.max_power);
  e.target_rate = c.target_rate;
  e.occupancy_penalty = c.occupancy_penalty;
  e.rate_penalty = c.rate_penalty;
  e.p_idle_to_busy = draws.p_idle_to_busy;
  e.p_busy_to_busy = draws.p_busy_to_busy;
  e.coherence_time = c.coherence_time;
  e.gain_means = c.gain_means;
  e.episode_length = c.episode_length;
  env::validate(e);
  return e;
}

inline mhsac::MhsacOptions make_mhsac_options(const ExperimentConfig& c) {
  mhsac::MhsacOptions o;
  o.agents = c.su_count;
  o.sensed = c.sensed_per_su;
  o.max_power.assign(static_cast<std::size_t>(c.su_count), c.max_power);
  o.noise_variance = c.noise_variance;
  o.hidden = c.hidden_layers;
  o.mixer_embed = c.mixer_embed;
  o.actor_lr = c.actor_lr;
  o.critic_lr = c.critic_lr;
  o.temperature_lr = c.temperature_lr;
  o.gamma = c.gamma;
  o.polyak = c.polyak;
  o.batch_size = c.batch_size;
  o.buffer_capacity = c.buffer_capacity;
  o.policy_frequency = c.policy_frequency;
  o.warmup_steps = c.warmup_steps;
  o.target_entropy_discrete = c.target_entropy_discrete;
  o.target_entropy_continuous = c.target_entropy_continuous;
  o.initial_alpha_discrete = c.initial_alpha_discrete;
  o.initial_alpha_continuous = c.initial_alpha_continuous;
  mhsac::validate(o);
  return o;
}

/// Seeds for the independent random streams of one experiment.
inline std::uint64_t environment_seed(std::uint64_t seed) { return hash_combine(seed, 0xe1); }
inline std::uint64_t learner_seed(std::uint64_t seed) { return hash_combine(seed, 0x1ea5); }

}  // namespace hyssra::experiment
