#include "fdrl/duplexsim.hpp"

#include <cmath>

#include "fdrl/error.hpp"
#include "fdrl/reward.hpp"

namespace fdrl {

namespace {

// Draws whole frame counts so every generated time is k * delta_t.
class FrameSampler {
 public:
  FrameSampler(double dt, std::uint64_t seed) : dt_(dt), rng_(seed) {}

  int frames(double seconds) const { return static_cast<int>(std::lround(seconds / dt_)); }

  int uniform_frames(double lo, double hi) {
    const int a = static_cast<int>(std::ceil(lo / dt_ - 1e-9));
    const int b = static_cast<int>(std::floor(hi / dt_ + 1e-9));
    if (b < a) throw ConfigError("scenario range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                 "] contains no frame boundary");
    return a + static_cast<int>(rng_.next() % static_cast<std::uint64_t>(b - a + 1));
  }

  double time(int k) const { return static_cast<double>(k) * dt_; }
  std::uint64_t raw() { return rng_.next(); }

 private:
  double dt_;
  SplitRng rng_;
};

ScenarioSpec base_spec(ScenarioKind kind, const ScenarioParams& p, std::uint64_t seed) {
  p.validate();
  ScenarioSpec s;
  s.kind = kind;
  s.delta_t = p.delta_t;
  s.horizon_frames = static_cast<int>(std::lround(p.horizon / p.delta_t));
  s.seed = seed;
  s.id = to_string(kind) + "-" + std::to_string(seed);
  return s;
}

std::uint64_t kind_salt(ScenarioKind kind) { return static_cast<std::uint64_t>(kind) + 101; }

void check_within_horizon(const ScenarioSpec& s) {
  const double h = s.horizon();
  for (const auto& iv : s.user) {
    if (iv.start() < 0.0 || iv.end() > h) throw ConfigError("user interval outside horizon in " + s.id);
  }
  if (s.eval_window.start() < 0.0 || s.eval_window.end() > h) {
    throw ConfigError("evaluation window outside horizon in " + s.id);
  }
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kPause: return "pause";
    case ScenarioKind::kTurnTaking: return "turn_taking";
    case ScenarioKind::kBackchannel: return "backchannel";
    case ScenarioKind::kInterruption: return "interruption";
  }
  return "unknown";
}

ScenarioKind parse_scenario_kind(const std::string& name) {
  for (auto k : kAllScenarioKinds) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown scenario kind '" + name + "' (expected pause, turn_taking, backchannel, interruption)");
}

void ScenarioParams::validate() const {
  if (!(delta_t > 0.0)) throw ConfigError("scenario delta_t must be positive");
  if (!(horizon > 0.0) || !(window > 0.0)) throw ConfigError("scenario horizon and window must be positive");
  const double ranges[][2] = {{turn_min, turn_max},
                              {pause_first_min, pause_first_max},
                              {pause_min, pause_max},
                              {pause_second_min, pause_second_max},
                              {backchannel_min, backchannel_max},
                              {barge_min, barge_max},
                              {barge_dur_min, barge_dur_max}};
  for (const auto& r : ranges) {
    if (!(r[0] > 0.0) || r[1] < r[0]) throw ConfigError("scenario ranges must be positive and ordered");
  }
  if (context < 0.0) throw ConfigError("scenario context must be non-negative");
}

StateSequence ScenarioSpec::user_bits() const {
  StateSequence bits(static_cast<std::size_t>(horizon_frames), kSilence);
  for (int t = 0; t < horizon_frames; ++t) {
    const TimeInterval frame(t * delta_t, (t + 1) * delta_t);
    if (intersect_duration(frame, user) > 0.0) bits[static_cast<std::size_t>(t)] = kSpeech;
  }
  return bits;
}

EpisodeInput ScenarioSpec::episode_input() const {
  return EpisodeInput{user_bits(), content_seed, forced_active_frames};
}

ScenarioSpec gen_turn_taking(const ScenarioParams& p, std::uint64_t seed) {
  ScenarioSpec s = base_spec(ScenarioKind::kTurnTaking, p, seed);
  FrameSampler fs(p.delta_t, mix_seed(seed, kind_salt(s.kind)));
  const int a = fs.uniform_frames(p.turn_min, p.turn_max);
  s.user = normalize_intervals({TimeInterval(0.0, fs.time(a))});
  s.cue_time = fs.time(a);
  s.eval_window = TimeInterval(fs.time(a), fs.time(a + fs.frames(p.window)));
  check_within_horizon(s);
  return s;
}

ScenarioSpec gen_pause(const ScenarioParams& p, std::uint64_t seed) {
  ScenarioSpec s = base_spec(ScenarioKind::kPause, p, seed);
  FrameSampler fs(p.delta_t, mix_seed(seed, kind_salt(s.kind)));
  const int a = fs.uniform_frames(p.pause_first_min, p.pause_first_max);
  const int gap = fs.uniform_frames(p.pause_min, p.pause_max);
  const int second = fs.uniform_frames(p.pause_second_min, p.pause_second_max);
  s.user = normalize_intervals({TimeInterval(0.0, fs.time(a)), TimeInterval(fs.time(a + gap), fs.time(a + gap + second))});
  s.cue_time = fs.time(a);
  s.eval_window = TimeInterval(fs.time(a), fs.time(a + gap));
  check_within_horizon(s);
  return s;
}

ScenarioSpec gen_interruption(const ScenarioParams& p, std::uint64_t seed) {
  ScenarioSpec s = base_spec(ScenarioKind::kInterruption, p, seed);
  FrameSampler fs(p.delta_t, mix_seed(seed, kind_salt(s.kind)));
  const int tb = fs.uniform_frames(p.barge_min, p.barge_max);
  const int d = fs.uniform_frames(p.barge_dur_min, p.barge_dur_max);
  s.user = normalize_intervals({TimeInterval(fs.time(tb), fs.time(tb + d))});
  s.cue_time = fs.time(tb + d);
  s.eval_window = TimeInterval(fs.time(tb + d), fs.time(tb + d + fs.frames(p.window)));
  s.forced_active_frames = fs.frames(p.context);
  s.content_seed = static_cast<int>(fs.raw() % 1000);
  check_within_horizon(s);
  return s;
}

ScenarioSpec gen_backchannel(const ScenarioParams& p, std::uint64_t seed) {
  ScenarioSpec s = base_spec(ScenarioKind::kBackchannel, p, seed);
  FrameSampler fs(p.delta_t, mix_seed(seed, kind_salt(s.kind)));
  const int len = fs.uniform_frames(p.backchannel_min, p.backchannel_max);
  s.user = normalize_intervals({TimeInterval(0.0, fs.time(len))});
  s.cue_time = 0.0;
  s.eval_window = TimeInterval(0.0, fs.time(len));
  check_within_horizon(s);
  return s;
}

ScenarioSpec generate(ScenarioKind kind, const ScenarioParams& params, std::uint64_t seed) {
  switch (kind) {
    case ScenarioKind::kPause: return gen_pause(params, seed);
    case ScenarioKind::kTurnTaking: return gen_turn_taking(params, seed);
    case ScenarioKind::kBackchannel: return gen_backchannel(params, seed);
    case ScenarioKind::kInterruption: return gen_interruption(params, seed);
  }
  throw ConfigError("unknown scenario kind");
}

std::vector<ScenarioSpec> generate_suite(ScenarioKind kind, int count, std::uint64_t seed,
                                         const ScenarioParams& params) {
  if (count < 0) throw ConfigError("episode count must be non-negative");
  std::vector<ScenarioSpec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto s = generate(kind, params, mix_seed(seed, static_cast<std::uint64_t>(i)));
    s.id = to_string(kind) + "-" + std::to_string(i);
    out.push_back(std::move(s));
  }
  return out;
}

Json scenario_to_json(const ScenarioSpec& s) {
  Json j;
  j["id"] = s.id;
  j["kind"] = to_string(s.kind);
  j["delta_t"] = s.delta_t;
  j["horizon_frames"] = s.horizon_frames;
  j["user_activity_bits"] = s.user_bits();
  j["user_intervals"] = intervals_to_json(s.user);
  j["cue_time"] = s.cue_time;
  j["eval_window"] = {s.eval_window.start(), s.eval_window.end()};
  if (s.content_seed) j["content_seed"] = *s.content_seed;
  j["forced_active_frames"] = s.forced_active_frames;
  j["seed"] = s.seed;
  return j;
}

ScenarioSpec scenario_from_json(const Json& j) {
  ScenarioSpec s;
  s.id = json_field<std::string>(j, "id");
  s.kind = parse_scenario_kind(json_field<std::string>(j, "kind"));
  s.delta_t = j.contains("delta_t") ? json_field<double>(j, "delta_t") : 0.08;
  if (!(s.delta_t > 0.0)) throw ParseError("delta_t must be positive");
  s.horizon_frames = json_field<int>(j, "horizon_frames");
  if (s.horizon_frames <= 0) throw ParseError("horizon_frames must be positive");
  s.cue_time = json_field<double>(j, "cue_time");
  const auto w = json_field<std::vector<double>>(j, "eval_window");
  if (w.size() != 2) throw ParseError("eval_window must be a [start, end] pair");
  s.eval_window = TimeInterval(w[0], w[1]);
  if (j.contains("seed")) s.seed = json_field<std::uint64_t>(j, "seed");
  if (j.contains("content_seed") && !j.at("content_seed").is_null()) {
    s.content_seed = json_field<int>(j, "content_seed");
  }
  if (j.contains("forced_active_frames")) s.forced_active_frames = json_field<int>(j, "forced_active_frames");
  if (s.forced_active_frames < 0 || s.forced_active_frames > s.horizon_frames) {
    throw ParseError("forced_active_frames out of range");
  }

  if (j.contains("user_intervals")) {
    s.user = intervals_from_json(j.at("user_intervals"));
  } else if (j.contains("user_activity_bits")) {
    RewardConfig grid;
    grid.delta_t = s.delta_t;
    s.user = segment_utterances(states_from_json(j.at("user_activity_bits")), grid);
  } else {
    throw ParseError("record needs user_intervals or user_activity_bits");
  }
  if (j.contains("user_activity_bits")) {
    const auto bits = states_from_json(j.at("user_activity_bits"));
    if (static_cast<int>(bits.size()) != s.horizon_frames) {
      throw ParseError("user_activity_bits length differs from horizon_frames");
    }
  }
  check_within_horizon(s);
  return s;
}

LoadedEpisodes load_episodes(const std::string& path, const LoadOptions& options) {
  LoadedEpisodes out;
  for_each_jsonl(path, [&](const Json& record, int) {
    auto spec = scenario_from_json(record);
    if (options.density_threshold && !density_filter(spec.user, spec.horizon(), *options.density_threshold)) {
      ++out.dropped;
      return;
    }
    out.specs.push_back(std::move(spec));
  });
  return out;
}

std::string episodes_to_jsonl(const std::vector<ScenarioSpec>& specs) {
  std::string out;
  for (const auto& s : specs) out += scenario_to_json(s).dump() + "\n";
  return out;
}

}  // namespace fdrl
