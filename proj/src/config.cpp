#include "fdrl/config.hpp"

#include <filesystem>
#include <set>

#include "fdrl/error.hpp"

namespace fdrl {

namespace {

void check_keys(const Json& j, const char* what, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(std::string("unknown key '") + key + "' in " + what);
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = json_field<T>(j, key);
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

SuiteConfig suite_from_json(const Json& j, const char* what) {
  check_keys(j, what, {"seed", "counts"});
  SuiteConfig s;
  read_opt(j, "seed", s.seed);
  const Json& counts = j.at("counts");
  if (!counts.is_object()) throw ConfigError(std::string(what) + ".counts must be an object");
  // nlohmann's object is key-sorted; that order is as good as any and stable.
  for (const auto& [name, n] : counts.items()) {
    const int count = n.get<int>();
    if (count < 0) throw ConfigError(std::string(what) + ": negative count for " + name);
    s.counts.emplace_back(parse_scenario_kind(name), count);
  }
  return s;
}

}  // namespace

RewardConfig reward_config_from_json(const Json& j) {
  check_keys(j, "reward", {"delta_t", "tau_int", "tau_re", "gap_merge_tokens", "user_pause_merge"});
  RewardConfig c;
  read_opt(j, "delta_t", c.delta_t);
  read_opt(j, "tau_int", c.tau_int);
  read_opt(j, "tau_re", c.tau_re);
  read_opt(j, "gap_merge_tokens", c.gap_merge_tokens);
  read_opt(j, "user_pause_merge", c.user_pause_merge);
  c.validate();
  return c;
}

PolicyConfig policy_config_from_json(const Json& j) {
  check_keys(j, "policy",
             {"vocab_size", "embed_dim", "num_layers", "num_heads", "mlp_ratio", "max_horizon", "seed", "pad_ids"});
  PolicyConfig c;
  read_opt(j, "vocab_size", c.vocab_size);
  read_opt(j, "embed_dim", c.embed_dim);
  read_opt(j, "num_layers", c.num_layers);
  read_opt(j, "num_heads", c.num_heads);
  read_opt(j, "mlp_ratio", c.mlp_ratio);
  read_opt(j, "max_horizon", c.max_horizon);
  read_opt(j, "seed", c.seed);
  read_opt(j, "pad_ids", c.pad_ids);
  c.validate();
  return c;
}

ScenarioParams scenario_params_from_json(const Json& j) {
  check_keys(j, "scenarios",
             {"delta_t", "horizon", "window", "turn_min", "turn_max", "pause_first_min", "pause_first_max",
              "pause_min", "pause_max", "pause_second_min", "pause_second_max", "backchannel_min",
              "backchannel_max", "barge_min", "barge_max", "barge_dur_min", "barge_dur_max", "context"});
  ScenarioParams p;
  read_opt(j, "delta_t", p.delta_t);
  read_opt(j, "horizon", p.horizon);
  read_opt(j, "window", p.window);
  read_opt(j, "turn_min", p.turn_min);
  read_opt(j, "turn_max", p.turn_max);
  read_opt(j, "pause_first_min", p.pause_first_min);
  read_opt(j, "pause_first_max", p.pause_first_max);
  read_opt(j, "pause_min", p.pause_min);
  read_opt(j, "pause_max", p.pause_max);
  read_opt(j, "pause_second_min", p.pause_second_min);
  read_opt(j, "pause_second_max", p.pause_second_max);
  read_opt(j, "backchannel_min", p.backchannel_min);
  read_opt(j, "backchannel_max", p.backchannel_max);
  read_opt(j, "barge_min", p.barge_min);
  read_opt(j, "barge_max", p.barge_max);
  read_opt(j, "barge_dur_min", p.barge_dur_min);
  read_opt(j, "barge_dur_max", p.barge_dur_max);
  read_opt(j, "context", p.context);
  p.validate();
  return p;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  read_opt(j, "group_size", c.group_size);
  read_opt(j, "kl_beta", c.kl_beta);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "inner_epochs", c.inner_epochs);
  read_opt(j, "steps", c.steps);
  read_opt(j, "grad_clip_norm", c.grad_clip_norm);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "temperature", c.temperature);
  read_opt(j, "seed", c.seed);
  if (j.contains("objective")) c.objective = parse_objective(json_field<std::string>(j, "objective"));
  if (j.contains("reward")) c.reward = reward_config_from_json(j.at("reward"));
  c.validate();
  return c;
}

void RunConfig::validate() const {
  train.validate();
  policy.validate();
  scenarios.validate();
  if (std::abs(train.reward.delta_t - scenarios.delta_t) > 1e-12) {
    throw ConfigError("reward.delta_t and scenarios.delta_t differ");
  }
  const int horizon_frames = static_cast<int>(std::lround(scenarios.horizon / scenarios.delta_t));
  if (!init_checkpoint && horizon_frames > policy.max_horizon) {
    throw ConfigError("scenario horizon of " + std::to_string(horizon_frames) + " frames exceeds policy.max_horizon " +
                      std::to_string(policy.max_horizon));
  }
}

RunConfig run_config_from_json(const Json& j, const std::string& base_dir) {
  check_keys(j, "config",
             {"group_size", "kl_beta", "learning_rate", "inner_epochs", "steps", "grad_clip_norm", "batch_size",
              "temperature", "seed", "objective", "reward", "policy", "scenarios", "train_suite", "eval_suite",
              "train_episodes", "eval_episodes", "density_threshold", "init_checkpoint"});
  RunConfig c;
  try {
    c.train = train_config_from_json(j);
    if (j.contains("policy")) c.policy = policy_config_from_json(j.at("policy"));
    if (j.contains("scenarios")) c.scenarios = scenario_params_from_json(j.at("scenarios"));
    if (j.contains("train_suite")) c.train_suite = suite_from_json(j.at("train_suite"), "train_suite");
    if (j.contains("eval_suite")) c.eval_suite = suite_from_json(j.at("eval_suite"), "eval_suite");
    if (j.contains("train_episodes")) c.train_episodes = resolve(base_dir, json_field<std::string>(j, "train_episodes"));
    if (j.contains("eval_episodes")) c.eval_episodes = resolve(base_dir, json_field<std::string>(j, "eval_episodes"));
    if (j.contains("init_checkpoint")) {
      c.init_checkpoint = resolve(base_dir, json_field<std::string>(j, "init_checkpoint"));
    }
    if (j.contains("density_threshold")) c.density_threshold = json_field<double>(j, "density_threshold");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  const std::string text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  const auto parent = std::filesystem::path(path).parent_path();
  return run_config_from_json(j, parent.empty() ? "." : parent.string());
}

std::vector<ScenarioSpec> generate_suite(const SuiteConfig& suite, const ScenarioParams& params) {
  std::vector<ScenarioSpec> out;
  std::uint64_t k = 0;
  for (const auto& [kind, count] : suite.counts) {
    auto part = generate_suite(kind, count, mix_seed(suite.seed, k++), params);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

namespace {

std::vector<ScenarioSpec> specs_from(const std::optional<std::string>& file, const std::optional<SuiteConfig>& suite,
                                     const RunConfig& cfg) {
  if (file) return load_episodes(*file, {cfg.density_threshold}).specs;
  if (suite) return generate_suite(*suite, cfg.scenarios);
  return {};
}

}  // namespace

std::vector<ScenarioSpec> train_specs(const RunConfig& cfg) { return specs_from(cfg.train_episodes, cfg.train_suite, cfg); }

std::vector<ScenarioSpec> eval_specs(const RunConfig& cfg) { return specs_from(cfg.eval_episodes, cfg.eval_suite, cfg); }

PolicyCheckpoint initial_checkpoint(const RunConfig& cfg) {
  if (cfg.init_checkpoint) return load_checkpoint(*cfg.init_checkpoint);
  return init_policy(cfg.policy);
}

}  // namespace fdrl
