#pragma once

// Rule-based temporal rewards. Model speech is segmented into utterances on
// the frame grid; each utterance is checked for overlap with user speech
// (interruption rule) and for its delay after the most recent completed user
// utterance (response rule). The sequence reward is the product of the two
// pass rates, then standardised across the rollout group.

#include <optional>
#include <span>
#include <vector>

#include "fdrl/core.hpp"

namespace fdrl {

struct RewardConfig {
  double delta_t = 0.08;      // seconds per frame
  double tau_int = 1.0;       // overlap tolerance, seconds
  double tau_re = 1.0;        // latency limit, seconds
  int gap_merge_tokens = 0;   // silent runs of at most this many frames join two model utterances
  // User activity separated by silences strictly shorter than this counts as
  // a single user turn when measuring latency. 0 keeps every interval separate.
  double user_pause_merge = 0.0;

  void validate() const;
};

struct RewardBreakdown {
  IntervalSet utterances;
  std::vector<double> overlaps;
  std::vector<std::optional<double>> latencies;  // nullopt = no preceding user end
  double r_int = 0.0;
  double r_re = 0.0;
  double r_total = 0.0;
};

struct AdvantageSet {
  std::vector<double> rewards;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> advantages;
};

/// Below this population std every advantage in the group is zero.
inline constexpr double kMinRewardStd = 1e-8;

IntervalSet segment_utterances(std::span<const State> states, const RewardConfig& cfg);

std::vector<double> compute_overlaps(const IntervalSet& utterances, const IntervalSet& user);
std::vector<std::optional<double>> compute_latencies(const IntervalSet& utterances,
                                                     const IntervalSet& user);

/// Both throw EmptyInputError when K = 0.
double interruption_score(std::span<const double> overlaps, const RewardConfig& cfg);
double response_score(std::span<const std::optional<double>> latencies, const RewardConfig& cfg);

/// Scores already-segmented model utterances. K = 0 yields r_int = 1,
/// r_re = 0, r_total = 0.
RewardBreakdown score_utterances(const IntervalSet& utterances, const IntervalSet& user,
                                 const RewardConfig& cfg);
RewardBreakdown total_reward(std::span<const State> states, const IntervalSet& user,
                             const RewardConfig& cfg);

/// Population-std standardisation; throws GroupSizeError for fewer than two rewards.
AdvantageSet group_advantages(std::span<const double> rewards);

/// Keep iff the user-speech fraction of the clip reaches `threshold`.
bool density_filter(const IntervalSet& user, double clip_duration, double threshold);

}  // namespace fdrl
