#include "fdrl/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "fdrl/error.hpp"
#include "fdrl/reward.hpp"

namespace fdrl {

namespace {

std::vector<double> normalized(std::span<const double> h) {
  double total = 0.0;
  for (double v : h) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("histogram entries must be finite and non-negative");
    total += v;
  }
  if (!(total > 0.0)) throw EmptyInputError("histogram has no mass");
  std::vector<double> out(h.begin(), h.end());
  for (double& v : out) v /= total;
  return out;
}

// Returns the user utterance fully containing `u`, if any.
const TimeInterval* enclosing(const IntervalSet& user, const TimeInterval& u) {
  for (const auto& iv : user) {
    if (iv.start() <= u.start() && u.end() <= iv.end()) return &iv;
  }
  return nullptr;
}

using NGram = std::vector<std::string>;

std::map<NGram, int> ngram_counts(std::span<const std::string> words, int n) {
  std::map<NGram, int> counts;
  if (static_cast<int>(words.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i) {
    ++counts[NGram(words.begin() + static_cast<std::ptrdiff_t>(i),
                   words.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return counts;
}

}  // namespace

double takeover_rate(std::span<const EpisodeResult> episodes) {
  if (episodes.empty()) throw EmptyInputError("takeover_rate needs at least one episode");
  int taken = 0;
  for (const auto& e : episodes) {
    const auto& w = e.spec.eval_window;
    const bool any = std::any_of(e.model.begin(), e.model.end(), [&](const TimeInterval& u) {
      return std::min(u.end(), w.end()) > std::max(u.start(), w.start());
    });
    taken += any ? 1 : 0;
  }
  return static_cast<double>(taken) / static_cast<double>(episodes.size());
}

LatencySummary mean_response_latency(std::span<const EpisodeResult> episodes) {
  LatencySummary s;
  double total = 0.0;
  for (const auto& e : episodes) {
    auto it = std::find_if(e.model.begin(), e.model.end(),
                           [&](const TimeInterval& u) { return u.start() >= e.spec.cue_time; });
    if (it == e.model.end()) continue;
    total += it->start() - e.spec.cue_time;
    ++s.count;
  }
  if (s.count > 0) s.mean = total / s.count;
  return s;
}

double backchannel_frequency(std::span<const EpisodeResult> episodes, double max_bc_duration) {
  int events = 0;
  double user_seconds = 0.0;
  for (const auto& e : episodes) {
    user_seconds += e.spec.user.measure();
    for (const auto& u : e.model) {
      if (u.length() <= max_bc_duration && enclosing(e.spec.user, u)) ++events;
    }
  }
  if (user_seconds <= 0.0) return 0.0;
  return events / (user_seconds / 60.0);
}

std::vector<double> backchannel_onset_histogram(std::span<const EpisodeResult> episodes, double max_bc_duration,
                                                int bins) {
  if (bins <= 0) throw ConfigError("histogram needs at least one bin");
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  for (const auto& e : episodes) {
    for (const auto& u : e.model) {
      if (u.length() > max_bc_duration) continue;
      const TimeInterval* user = enclosing(e.spec.user, u);
      if (!user) continue;
      const double rel = (u.start() - user->start()) / user->length();
      const int b = std::clamp(static_cast<int>(rel * bins), 0, bins - 1);
      hist[static_cast<std::size_t>(b)] += 1.0;
    }
  }
  return hist;
}

double jsd(std::span<const double> p_raw, std::span<const double> q_raw) {
  if (p_raw.size() != q_raw.size()) throw ShapeError("jsd: histograms differ in bin count");
  const auto p = normalized(p_raw);
  const auto q = normalized(q_raw);
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) d += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) d += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::clamp(d, 0.0, 1.0);
}

Words tokenize_transcript(std::string_view text) {
  Words out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (std::isalnum(c) || ch == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double seq_rep_n(std::span<const std::string> words, int n) {
  if (n < 1) throw ConfigError("seq_rep_n needs n >= 1");
  if (static_cast<int>(words.size()) < n) return 0.0;
  const auto counts = ngram_counts(words, n);
  const double total = static_cast<double>(words.size() - static_cast<std::size_t>(n) + 1);
  return 1.0 - static_cast<double>(counts.size()) / total;
}

namespace {

struct NGramTable {
  std::vector<std::map<NGram, int>> counts;  // index n-1
  long length = 0;
};

NGramTable ngram_table(std::span<const std::string> words, int max_n) {
  NGramTable t;
  t.length = static_cast<long>(words.size());
  for (int n = 1; n <= max_n; ++n) t.counts.push_back(ngram_counts(words, n));
  return t;
}

double bleu_from_tables(const NGramTable& hyp, std::span<const NGramTable* const> refs, int max_n) {
  if (hyp.length == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto k = static_cast<std::size_t>(n - 1);
    int total = 0, matched = 0;
    for (const auto& [gram, count] : hyp.counts[k]) {
      int max_ref = 0;
      for (const NGramTable* rt : refs) {
        if (auto it = rt->counts[k].find(gram); it != rt->counts[k].end()) max_ref = std::max(max_ref, it->second);
      }
      matched += std::min(count, max_ref);
      total += count;
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / total) / max_n;
  }
  // Closest reference length, ties to the shorter one.
  const long c = hyp.length;
  long r = refs.front()->length;
  for (const NGramTable* rt : refs) {
    const long len = rt->length;
    if (std::labs(len - c) < std::labs(r - c) || (std::labs(len - c) == std::labs(r - c) && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_sum);
}

}  // namespace

double bleu(std::span<const std::string> hypothesis, std::span<const Words> references, int max_n) {
  if (references.empty()) throw EmptyInputError("bleu needs at least one reference");
  if (max_n < 1) throw ConfigError("bleu needs max_n >= 1");
  std::vector<NGramTable> tables;
  for (const auto& ref : references) tables.push_back(ngram_table(ref, max_n));
  std::vector<const NGramTable*> ptrs;
  for (const auto& t : tables) ptrs.push_back(&t);
  return bleu_from_tables(ngram_table(hypothesis, max_n), ptrs, max_n);
}

double self_bleu(std::span<const Words> samples) {
  if (samples.size() < 2) throw EmptyInputError("self_bleu needs at least 2 samples");
  constexpr int kMaxN = 4;
  std::vector<NGramTable> tables;
  for (const auto& s : samples) tables.push_back(ngram_table(s, kMaxN));
  double total = 0.0;
  std::vector<const NGramTable*> refs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    refs.clear();
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (j != i) refs.push_back(&tables[j]);
    }
    total += bleu_from_tables(tables[i], refs, kMaxN);
  }
  return total / static_cast<double>(samples.size());
}

std::map<std::string, ScenarioReport> scenario_reports(std::span<const EpisodeResult> episodes,
                                                       std::span<const double> reference_hist) {
  std::vector<double> reference(reference_hist.begin(), reference_hist.end());
  if (reference.empty()) reference.assign(kBackchannelBins, 1.0);
  std::map<std::string, ScenarioReport> out;
  for (auto kind : kAllScenarioKinds) {
    std::vector<EpisodeResult> subset;
    for (const auto& e : episodes) {
      if (e.spec.kind == kind) subset.push_back(e);
    }
    if (subset.empty()) continue;
    ScenarioReport r;
    r.episodes = static_cast<int>(subset.size());
    r.tor = takeover_rate(subset);
    r.latency = mean_response_latency(subset);
    r.backchannel_freq = backchannel_frequency(subset);
    const auto hist = backchannel_onset_histogram(subset, kDefaultMaxBackchannel, static_cast<int>(reference.size()));
    if (std::accumulate(hist.begin(), hist.end(), 0.0) > 0.0) r.jsd = jsd(hist, reference);
    out[to_string(kind)] = r;
  }
  return out;
}

CorpusReport corpus_report(std::span<const Words> samples, std::span<const int> ns) {
  static constexpr int kDefaultNs[] = {1, 2, 3};
  if (ns.empty()) ns = kDefaultNs;
  CorpusReport r;
  r.samples = static_cast<int>(samples.size());
  for (int n : ns) {
    double total = 0.0;
    for (const auto& s : samples) total += seq_rep_n(s, n);
    r.seq_rep[n] = samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
  }
  if (samples.size() >= 2) r.self_bleu = self_bleu(samples);
  return r;
}

Json to_json(const EvalReport& report) {
  Json j = Json::object();
  Json scen = Json::object();
  for (const auto& [name, r] : report.scenarios) {
    Json s;
    s["episodes"] = r.episodes;
    s["tor"] = r.tor;
    s["mean_latency"] = r.latency.mean ? Json(*r.latency.mean) : Json(nullptr);
    s["latency_count"] = r.latency.count;
    s["backchannel_freq"] = r.backchannel_freq;
    s["jsd"] = r.jsd ? Json(*r.jsd) : Json(nullptr);
    if (r.mean_r_total) s["mean_r_total"] = *r.mean_r_total;
    scen[name] = s;
  }
  j["scenarios"] = scen;
  if (report.corpus) {
    Json c;
    Json rep = Json::object();
    for (const auto& [n, v] : report.corpus->seq_rep) rep["seq_rep_" + std::to_string(n)] = v;
    c["seq_rep"] = rep;
    c["self_bleu"] = report.corpus->self_bleu ? Json(*report.corpus->self_bleu) : Json(nullptr);
    c["samples"] = report.corpus->samples;
    j["corpus"] = c;
  }
  return j;
}

EpisodeResult episode_result_from_json(const Json& j) {
  EpisodeResult r{scenario_from_json(j), {}};
  if (j.contains("model_intervals")) {
    r.model = intervals_from_json(j.at("model_intervals"));
  } else if (j.contains("model_states")) {
    RewardConfig grid;
    grid.delta_t = r.spec.delta_t;
    r.model = segment_utterances(states_from_json(j.at("model_states")), grid);
  } else {
    throw ParseError("episode result needs model_states or model_intervals");
  }
  return r;
}

Json episode_result_to_json(const EpisodeResult& r, const StateSequence* states) {
  Json j = scenario_to_json(r.spec);
  if (states) j["model_states"] = *states;
  j["model_intervals"] = intervals_to_json(r.model);
  return j;
}

}  // namespace fdrl
