#pragma once

// JSON run configuration. Top-level keys mirror TrainConfig field names
// ("group_size", "kl_beta", ..., "reward": {...}); "policy" and "scenarios"
// hold PolicyConfig and ScenarioParams; the suites say which episodes to
// train and evaluate on. Unknown keys are rejected.
//
//   {
//     "steps": 600, "objective": "aspirin", "seed": 0,
//     "reward": {"user_pause_merge": 1.0},
//     "policy": {"embed_dim": 32, "pad_ids": [0]},
//     "train_suite": {"seed": 1, "counts": {"turn_taking": 64, "pause": 64}},
//     "eval_suite": {"seed": 2, "counts": {"turn_taking": 64, "pause": 64}}
//   }

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fdrl/duplexsim.hpp"
#include "fdrl/io.hpp"
#include "fdrl/policy.hpp"
#include "fdrl/trainer.hpp"

namespace fdrl {

struct SuiteConfig {
  std::uint64_t seed = 0;
  std::vector<std::pair<ScenarioKind, int>> counts;  // in file order
};

struct RunConfig {
  TrainConfig train;
  PolicyConfig policy;
  ScenarioParams scenarios;
  // Episode sources: a generated suite or a JSONL file (file wins).
  std::optional<SuiteConfig> train_suite, eval_suite;
  std::optional<std::string> train_episodes, eval_episodes;
  std::optional<double> density_threshold;
  std::optional<std::string> init_checkpoint;

  void validate() const;
};

/// Relative paths inside the document are resolved against `base_dir`.
RunConfig run_config_from_json(const Json& j, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

TrainConfig train_config_from_json(const Json& j);
RewardConfig reward_config_from_json(const Json& j);
PolicyConfig policy_config_from_json(const Json& j);
ScenarioParams scenario_params_from_json(const Json& j);

/// Generates a suite: kinds in order, kind k seeded with mix_seed(seed, k).
std::vector<ScenarioSpec> generate_suite(const SuiteConfig& suite, const ScenarioParams& params);

/// Training / evaluation episodes named by the config; empty when neither a
/// suite nor a file is given.
std::vector<ScenarioSpec> train_specs(const RunConfig& cfg);
std::vector<ScenarioSpec> eval_specs(const RunConfig& cfg);

/// The initial checkpoint: loaded from init_checkpoint when given (its config
/// then replaces `policy`), otherwise init_policy(policy).
PolicyCheckpoint initial_checkpoint(const RunConfig& cfg);

}  // namespace fdrl
