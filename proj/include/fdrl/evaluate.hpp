#pragma once

// Greedy evaluation of a policy over scenario episodes.

#include <span>
#include <vector>

#include "fdrl/duplexsim.hpp"
#include "fdrl/metrics.hpp"
#include "fdrl/policy.hpp"
#include "fdrl/reward.hpp"
#include "fdrl/trainer.hpp"

namespace fdrl {

/// Below the greedy threshold, so evaluation rollouts are argmax decodes.
inline constexpr double kEvalTemperature = 1e-7;

TrainingEpisode to_training_episode(const ScenarioSpec& spec);
std::vector<TrainingEpisode> to_training_episodes(std::span<const ScenarioSpec> specs);

struct EvaluatedEpisode {
  EpisodeResult result;
  Rollout rollout;
  RewardBreakdown reward;
};

/// Throws EmptyInputError when `specs` is empty.
std::vector<EvaluatedEpisode> evaluate_episodes(const Policy<double>& policy, std::span<const ScenarioSpec> specs,
                                                const RewardConfig& reward);

double mean_r_total(std::span<const EvaluatedEpisode> episodes);

/// Per-kind timing metrics and mean r_total, plus repetition metrics over
/// each episode's emitted speech tokens.
EvalReport eval_report(std::span<const EvaluatedEpisode> episodes, const VocabPartition& partition,
                       std::span<const double> reference_hist = {});

/// Speech tokens of a rollout as words ("w3 w1 ..."), pads dropped.
Words speech_words(const Rollout& rollout, const VocabPartition& partition);

}  // namespace fdrl
