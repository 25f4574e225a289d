#include "fdrl/reward.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "fdrl/error.hpp"

namespace fdrl {

void RewardConfig::validate() const {
  if (!(delta_t > 0.0)) throw ConfigError("reward.delta_t must be positive");
  if (!(tau_int >= 0.0)) throw ConfigError("reward.tau_int must be non-negative");
  if (!(tau_re >= 0.0)) throw ConfigError("reward.tau_re must be non-negative");
  if (gap_merge_tokens < 0) throw ConfigError("reward.gap_merge_tokens must be non-negative");
  if (!(user_pause_merge >= 0.0)) throw ConfigError("reward.user_pause_merge must be non-negative");
}

IntervalSet segment_utterances(std::span<const State> states, const RewardConfig& cfg) {
  // Runs of speech frames as [first, last + 1) frame indices.
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t t = 0; t < states.size(); ++t) {
    if (states[t] != kSpeech) continue;
    if (!runs.empty() && t - runs.back().second <= static_cast<std::size_t>(cfg.gap_merge_tokens)) {
      runs.back().second = t + 1;
    } else {
      runs.emplace_back(t, t + 1);
    }
  }
  std::vector<TimeInterval> raw;
  raw.reserve(runs.size());
  for (const auto& [a, b] : runs) {
    raw.emplace_back(static_cast<double>(a) * cfg.delta_t, static_cast<double>(b) * cfg.delta_t);
  }
  return normalize_intervals(std::move(raw));
}

std::vector<double> compute_overlaps(const IntervalSet& utterances, const IntervalSet& user) {
  std::vector<double> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back(intersect_duration(u, user));
  return out;
}

std::vector<std::optional<double>> compute_latencies(const IntervalSet& utterances,
                                                     const IntervalSet& user) {
  std::vector<std::optional<double>> out;
  out.reserve(utterances.size());
  // Both sets are sorted, so the most recent completed user end only moves forward.
  std::size_t j = 0;
  std::optional<double> last_end;
  for (const auto& u : utterances) {
    while (j < user.size() && user[j].end() <= u.start()) last_end = user[j++].end();
    out.push_back(last_end ? std::optional<double>(u.start() - *last_end) : std::nullopt);
  }
  return out;
}

double interruption_score(std::span<const double> overlaps, const RewardConfig& cfg) {
  if (overlaps.empty()) throw EmptyInputError("interruption_score needs at least one utterance");
  std::size_t pass = 0;
  for (double o : overlaps) pass += o <= cfg.tau_int ? 1 : 0;
  return static_cast<double>(pass) / static_cast<double>(overlaps.size());
}

double response_score(std::span<const std::optional<double>> latencies, const RewardConfig& cfg) {
  if (latencies.empty()) throw EmptyInputError("response_score needs at least one utterance");
  std::size_t pass = 0;
  for (const auto& l : latencies) pass += (l && *l <= cfg.tau_re) ? 1 : 0;
  return static_cast<double>(pass) / static_cast<double>(latencies.size());
}

RewardBreakdown score_utterances(const IntervalSet& utterances, const IntervalSet& user,
                                 const RewardConfig& cfg) {
  const IntervalSet turns =
      cfg.user_pause_merge > 0.0 ? user.merge_gaps_shorter_than(cfg.user_pause_merge) : user;
  RewardBreakdown b;
  b.utterances = utterances;
  // Merging only changes what counts as a turn end; overlap is with actual speech.
  b.overlaps = compute_overlaps(utterances, user);
  b.latencies = compute_latencies(utterances, turns);
  if (utterances.empty()) {
    // A silent model never interrupts but never responds either.
    b.r_int = 1.0;
    b.r_re = 0.0;
  } else {
    b.r_int = interruption_score(b.overlaps, cfg);
    b.r_re = response_score(b.latencies, cfg);
  }
  b.r_total = b.r_int * b.r_re;
  return b;
}

RewardBreakdown total_reward(std::span<const State> states, const IntervalSet& user,
                             const RewardConfig& cfg) {
  return score_utterances(segment_utterances(states, cfg), user, cfg);
}

AdvantageSet group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw GroupSizeError("group advantages need at least 2 rewards, got " +
                         std::to_string(rewards.size()));
  }
  AdvantageSet a;
  a.rewards.assign(rewards.begin(), rewards.end());
  const double n = static_cast<double>(rewards.size());
  a.mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - a.mean) * (r - a.mean);
  a.std = std::sqrt(ss / n);
  a.advantages.reserve(rewards.size());
  for (double r : rewards) a.advantages.push_back(a.std < kMinRewardStd ? 0.0 : (r - a.mean) / a.std);
  return a;
}

bool density_filter(const IntervalSet& user, double clip_duration, double threshold) {
  if (!(clip_duration > 0.0)) throw ConfigError("clip duration must be positive");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("density threshold must lie in [0, 1]");
  const double active = user.clipped_to(TimeInterval(0.0, clip_duration)).measure();
  return active / clip_duration >= threshold;
}

}  // namespace fdrl
