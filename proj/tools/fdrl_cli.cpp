// fdrl: train, evaluate, score and verify speak/silence timing policies.
//
// Exit codes: 0 success, 1 validation error, 2 runtime/numeric error, 3 I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "fdrl/config.hpp"
#include "fdrl/error.hpp"
#include "fdrl/evaluate.hpp"
#include "fdrl/gradcheck.hpp"
#include "fdrl/io.hpp"
#include "fdrl/metrics.hpp"
#include "fdrl/reward.hpp"
#include "fdrl/trainer.hpp"

namespace {

using namespace fdrl;

constexpr int kExitOk = 0, kExitValidation = 1, kExitRuntime = 2, kExitIo = 3;

std::string default_out_dir() {
  const char* env = std::getenv("FDRL_OUT_DIR");
  return env && *env ? env : "out";
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
  }
  write_file_atomic(path, text);
}

// A config file may be a bare reward object or a run config with "reward".
RewardConfig reward_from_file(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (j.contains("reward")) return reward_config_from_json(j.at("reward"));
  return reward_config_from_json(j);
}

Json breakdown_json(const std::string& id, const RewardBreakdown& b) {
  Json j;
  j["id"] = id;
  j["r_int"] = b.r_int;
  j["r_re"] = b.r_re;
  j["r_total"] = b.r_total;
  j["utterances"] = intervals_to_json(b.utterances);
  j["overlaps"] = b.overlaps;
  Json lat = Json::array();
  for (const auto& l : b.latencies) lat.push_back(l ? Json(*l) : Json(nullptr));
  j["latencies"] = lat;
  return j;
}

struct TrainArgs {
  std::string config, objective, out;
  std::optional<int> steps;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (!a.objective.empty()) cfg.train.objective = parse_objective(a.objective);
  if (a.steps) cfg.train.steps = *a.steps;
  cfg.train.validate();
  const auto specs = train_specs(cfg);
  const auto episodes = to_training_episodes(specs);
  const auto init = initial_checkpoint(cfg);
  const std::string out = a.out.empty() ? default_out_dir() : a.out;
  std::fprintf(stderr, "training %s on %zu episodes for %d steps -> %s\n", to_string(cfg.train.objective).c_str(),
               episodes.size(), cfg.train.steps, out.c_str());
  const auto result = train(init, cfg.train, episodes, [&](const TrainLogRow& r) {
    if (!a.quiet && (r.step % 50 == 0 || r.step + 1 == cfg.train.steps)) {
      std::fprintf(stderr, "step %5d  r_total %.3f  r_int %.3f  r_re %.3f  kl %.2e\n", r.step, r.mean_r_total,
                   r.mean_r_int, r.mean_r_re, r.mean_kl);
    }
  });
  write_train_outputs(result, out);
  return kExitOk;
}

struct ScoreArgs {
  std::string user, model, config, out;
};

int cmd_score(const ScoreArgs& a) {
  RewardConfig reward;
  if (!a.config.empty()) reward = reward_from_file(a.config);
  std::map<std::string, IntervalSet> users;
  for_each_jsonl(a.user, [&](const Json& j, int) {
    const auto id = json_field<std::string>(j, "id");
    if (j.contains("user_intervals")) {
      users[id] = intervals_from_json(j.at("user_intervals"));
    } else if (j.contains("user_activity_bits")) {
      users[id] = segment_utterances(states_from_json(j.at("user_activity_bits")), reward);
    } else {
      throw ParseError("record '" + id + "' needs user_intervals or user_activity_bits");
    }
  });
  std::string text;
  for_each_jsonl(a.model, [&](const Json& j, int) {
    const auto id = json_field<std::string>(j, "id");
    auto it = users.find(id);
    if (it == users.end()) throw ParseError("no user record with id '" + id + "'");
    RewardBreakdown b;
    if (j.contains("model_states")) {
      b = total_reward(states_from_json(j.at("model_states")), it->second, reward);
    } else if (j.contains("model_intervals")) {
      b = score_utterances(intervals_from_json(j.at("model_intervals")), it->second, reward);
    } else {
      throw ParseError("record '" + id + "' needs model_states or model_intervals");
    }
    text += breakdown_json(id, b).dump() + "\n";
  });
  emit(a.out, text);
  return kExitOk;
}

std::vector<double> read_reference_hist(const std::string& path) {
  if (path.empty()) return {};
  try {
    return Json::parse(read_file(path)).get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": reference histogram must be a JSON array of numbers (" + e.what() + ")");
  }
}

struct EvalArgs {
  std::string checkpoint, episodes, config, out, results, reference;
};

int cmd_eval(const EvalArgs& a) {
  RewardConfig reward;
  std::vector<ScenarioSpec> specs;
  if (!a.config.empty()) {
    const RunConfig cfg = load_run_config(a.config);
    reward = cfg.train.reward;
    if (a.episodes.empty()) specs = eval_specs(cfg);
  }
  if (!a.episodes.empty()) specs = load_episodes(a.episodes).specs;
  const Policy<double> policy(load_checkpoint(a.checkpoint));
  const auto evaluated = evaluate_episodes(policy, specs, reward);
  const auto ref = read_reference_hist(a.reference);
  EvalReport report = eval_report(evaluated, policy.partition(), ref);
  Json j = to_json(report);
  j["mean_r_total"] = mean_r_total(evaluated);
  emit(a.out, j.dump(2) + "\n");
  if (!a.results.empty()) {
    std::string lines;
    for (const auto& e : evaluated) {
      Json r = episode_result_to_json(e.result, &e.rollout.states);
      r["r_total"] = e.reward.r_total;
      lines += r.dump() + "\n";
    }
    emit(a.results, lines);
  }
  return kExitOk;
}

struct MetricsArgs {
  std::string episodes, transcripts, reference, out;
};

int cmd_metrics(const MetricsArgs& a) {
  if (a.episodes.empty() && a.transcripts.empty()) {
    throw ConfigError("metrics needs --episodes and/or --transcripts");
  }
  EvalReport report;
  if (!a.episodes.empty()) {
    std::vector<EpisodeResult> results;
    for_each_jsonl(a.episodes, [&](const Json& j, int) { results.push_back(episode_result_from_json(j)); });
    if (results.empty()) throw EmptyInputError(a.episodes + ": no episode results");
    const auto ref = read_reference_hist(a.reference);
    report.scenarios = scenario_reports(results, ref);
  }
  if (!a.transcripts.empty()) {
    std::vector<Words> samples;
    for_each_jsonl(a.transcripts,
                   [&](const Json& j, int) { samples.push_back(tokenize_transcript(json_field<std::string>(j, "text"))); });
    report.corpus = corpus_report(samples);
  }
  emit(a.out, to_json(report).dump(2) + "\n");
  return kExitOk;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  int samples = 64;
  bool corrupt = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  GradcheckConfig cfg;
  cfg.seed = a.seed;
  cfg.samples = a.samples;
  cfg.corrupt = a.corrupt;
  const auto report = run_gradcheck(cfg);
  std::fputs(format_gradcheck(report).c_str(), stdout);
  return report.passed ? kExitOk : kExitRuntime;
}

struct SimulateArgs {
  std::string kind, out, params;
  int count = 0;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  const ScenarioKind kind = parse_scenario_kind(a.kind);
  ScenarioParams params;
  if (!a.params.empty()) {
    Json j;
    try {
      j = Json::parse(read_file(a.params));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(a.params + ": " + e.what());
    }
    params = scenario_params_from_json(j.contains("scenarios") ? j.at("scenarios") : j);
  }
  if (a.count < 0) throw ConfigError("--count must be non-negative");
  const auto specs = generate_suite(kind, a.count, a.seed, params);
  emit(a.out, episodes_to_jsonl(specs));
  return kExitOk;
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case Error::Category::kValidation:
      return kExitValidation;
    case Error::Category::kRuntime:
      return kExitRuntime;
    case Error::Category::kIo:
      return kExitIo;
  }
  return kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speak/silence timing policies trained with group-relative policy optimisation"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a policy from a JSON run config");
  train->add_option("config", train_args.config, "Run config (JSON)")->required();
  train->add_option("--objective", train_args.objective, "aspirin | standard (overrides the config)");
  train->add_option("--out", train_args.out, "Output directory (default $FDRL_OUT_DIR or ./out)");
  train->add_option("--steps", train_args.steps, "Override the number of steps");
  train->add_flag("--quiet", train_args.quiet, "No progress lines");

  ScoreArgs score_args;
  auto* score = app.add_subcommand("score", "Score model activity against user activity");
  score->add_option("--user", score_args.user, "User activity JSONL")->required();
  score->add_option("--model", score_args.model, "Model activity JSONL")->required();
  score->add_option("--config", score_args.config, "Reward config JSON");
  score->add_option("--out", score_args.out, "Output JSONL (default stdout)");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Greedy rollouts of a checkpoint and the evaluation report");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval->add_option("--episodes", eval_args.episodes, "Episode JSONL");
  eval->add_option("--config", eval_args.config, "Run config: reward settings and eval suite");
  eval->add_option("--out", eval_args.out, "Report JSON (default stdout)");
  eval->add_option("--results", eval_args.results, "Per-episode results JSONL");
  eval->add_option("--reference-hist", eval_args.reference, "Backchannel onset reference histogram (JSON array)");

  MetricsArgs metrics_args;
  auto* metrics = app.add_subcommand("metrics", "Metrics over episode results and transcripts");
  metrics->add_option("--episodes", metrics_args.episodes, "Episode-results JSONL");
  metrics->add_option("--transcripts", metrics_args.transcripts, "Transcript JSONL {id, text}");
  metrics->add_option("--reference-hist", metrics_args.reference, "Backchannel onset reference histogram");
  metrics->add_option("--out", metrics_args.out, "Report JSON (default stdout)");

  GradcheckArgs grad_args;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of both objectives");
  grad->add_option("--seed", grad_args.seed, "Instance seed");
  grad->add_option("--samples", grad_args.samples, "Parameters probed per objective");
  grad->add_flag("--corrupt-gradient", grad_args.corrupt)->group("");

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Generate a scenario suite as episode JSONL");
  sim->add_option("--kind", sim_args.kind, "pause | turn_taking | backchannel | interruption")->required();
  sim->add_option("--count", sim_args.count, "Number of episodes")->required();
  sim->add_option("--seed", sim_args.seed, "Suite seed");
  sim->add_option("--params", sim_args.params, "Scenario parameter JSON");
  sim->add_option("--out", sim_args.out, "Output JSONL (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*score) return cmd_score(score_args);
    if (*eval) return cmd_eval(eval_args);
    if (*metrics) return cmd_metrics(metrics_args);
    if (*grad) return cmd_gradcheck(grad_args);
    if (*sim) return cmd_simulate(sim_args);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
