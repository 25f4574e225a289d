#include "fdrl/evaluate.hpp"

#include "fdrl/error.hpp"

namespace fdrl {

TrainingEpisode to_training_episode(const ScenarioSpec& spec) {
  return {spec.id, spec.episode_input(), spec.user};
}

std::vector<TrainingEpisode> to_training_episodes(std::span<const ScenarioSpec> specs) {
  std::vector<TrainingEpisode> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(to_training_episode(s));
  return out;
}

std::vector<EvaluatedEpisode> evaluate_episodes(const Policy<double>& policy, std::span<const ScenarioSpec> specs,
                                                const RewardConfig& reward) {
  if (specs.empty()) throw EmptyInputError("no episodes to evaluate");
  std::vector<EvaluatedEpisode> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) {
    RewardConfig cfg = reward;
    cfg.delta_t = spec.delta_t;
    Rollout r = sample_rollout(policy, spec.episode_input(), kEvalTemperature, spec.seed);
    RewardBreakdown b = total_reward(r.states, spec.user, cfg);
    // Metrics see raw frame runs; gap bridging is a reward setting only.
    RewardConfig raw = cfg;
    raw.gap_merge_tokens = 0;
    EpisodeResult res{spec, segment_utterances(r.states, raw)};
    out.push_back({std::move(res), std::move(r), std::move(b)});
  }
  return out;
}

double mean_r_total(std::span<const EvaluatedEpisode> episodes) {
  if (episodes.empty()) throw EmptyInputError("mean_r_total of no episodes");
  double s = 0.0;
  for (const auto& e : episodes) s += e.reward.r_total;
  return s / static_cast<double>(episodes.size());
}

Words speech_words(const Rollout& rollout, const VocabPartition& partition) {
  Words w;
  for (TokenId y : rollout.tokens) {
    if (!partition.is_pad(y)) w.push_back("w" + std::to_string(y));
  }
  return w;
}

EvalReport eval_report(std::span<const EvaluatedEpisode> episodes, const VocabPartition& partition,
                       std::span<const double> reference_hist) {
  std::vector<EpisodeResult> results;
  for (const auto& e : episodes) results.push_back(e.result);
  EvalReport report;
  report.scenarios = scenario_reports(results, reference_hist);
  for (auto& [name, r] : report.scenarios) {
    double s = 0.0;
    int n = 0;
    for (const auto& e : episodes) {
      if (to_string(e.result.spec.kind) == name) {
        s += e.reward.r_total;
        ++n;
      }
    }
    r.mean_r_total = s / n;
  }
  std::vector<Words> corpus;
  for (const auto& e : episodes) corpus.push_back(speech_words(e.rollout, partition));
  report.corpus = corpus_report(corpus);
  return report;
}

}  // namespace fdrl
