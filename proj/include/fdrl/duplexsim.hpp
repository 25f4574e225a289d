#pragma once

// Scenario generators for the four full-duplex test families and episode
// file ingestion. All generated times sit on the frame grid (multiples of
// delta_t), so reward comparisons against round thresholds are exact.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdrl/core.hpp"
#include "fdrl/io.hpp"
#include "fdrl/policy.hpp"

namespace fdrl {

enum class ScenarioKind { kPause, kTurnTaking, kBackchannel, kInterruption };

inline constexpr ScenarioKind kAllScenarioKinds[] = {ScenarioKind::kPause, ScenarioKind::kTurnTaking,
                                                     ScenarioKind::kBackchannel, ScenarioKind::kInterruption};

std::string to_string(ScenarioKind kind);
/// Throws ConfigError for unknown names.
ScenarioKind parse_scenario_kind(const std::string& name);

struct ScenarioParams {
  double delta_t = 0.08;
  double horizon = 20.0;
  double window = 2.0;  // evaluation window after the cue

  double turn_min = 2.0, turn_max = 6.0;

  double pause_first_min = 2.0, pause_first_max = 6.0;
  double pause_min = 0.4, pause_max = 1.0;
  double pause_second_min = 1.0, pause_second_max = 3.0;

  double backchannel_min = 10.0, backchannel_max = 15.0;

  double barge_min = 1.0, barge_max = 2.0;
  double barge_dur_min = 1.0, barge_dur_max = 3.0;
  double context = 2.0;  // forced model speech at the start of interruption episodes

  void validate() const;
};

struct ScenarioSpec {
  std::string id;
  ScenarioKind kind = ScenarioKind::kTurnTaking;
  double delta_t = 0.08;
  int horizon_frames = 0;
  double cue_time = 0.0;
  TimeInterval eval_window{0.0, 1.0};
  IntervalSet user;
  std::uint64_t seed = 0;
  std::optional<int> content_seed;
  int forced_active_frames = 0;

  double horizon() const { return horizon_frames * delta_t; }
  /// u_t = 1 iff frame [t dt, (t+1) dt) intersects user speech.
  StateSequence user_bits() const;
  EpisodeInput episode_input() const;
};

ScenarioSpec gen_turn_taking(const ScenarioParams& params, std::uint64_t seed);
ScenarioSpec gen_pause(const ScenarioParams& params, std::uint64_t seed);
ScenarioSpec gen_interruption(const ScenarioParams& params, std::uint64_t seed);
ScenarioSpec gen_backchannel(const ScenarioParams& params, std::uint64_t seed);
ScenarioSpec generate(ScenarioKind kind, const ScenarioParams& params, std::uint64_t seed);

/// `count` episodes of one kind; episode i uses seed mix_seed(seed, i).
std::vector<ScenarioSpec> generate_suite(ScenarioKind kind, int count, std::uint64_t seed,
                                         const ScenarioParams& params = {});

Json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const Json& j);

struct LoadOptions {
  std::optional<double> density_threshold;  // drop clips whose user-speech fraction is below this
};

struct LoadedEpisodes {
  std::vector<ScenarioSpec> specs;
  int dropped = 0;
};

LoadedEpisodes load_episodes(const std::string& path, const LoadOptions& options = {});
std::string episodes_to_jsonl(const std::vector<ScenarioSpec>& specs);

}  // namespace fdrl
