#pragma once

// Evaluation metrics: timing metrics over scenario episodes (takeover rate,
// response latency, backchannel frequency and onset-distribution JSD) and
// repetition metrics over word sequences (seq-rep-n, Self-BLEU).

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdrl/core.hpp"
#include "fdrl/duplexsim.hpp"
#include "fdrl/io.hpp"

namespace fdrl {

/// One evaluated episode: the scenario plus the model's segmented speech.
struct EpisodeResult {
  ScenarioSpec spec;
  IntervalSet model;
};

/// Fraction of episodes with model speech of positive measure inside the
/// evaluation window. Throws EmptyInputError on an empty list.
double takeover_rate(std::span<const EpisodeResult> episodes);

struct LatencySummary {
  std::optional<double> mean;  // absent when no episode qualifies
  int count = 0;
};

/// Delay from cue_time to the first model utterance starting at or after it.
LatencySummary mean_response_latency(std::span<const EpisodeResult> episodes);

inline constexpr double kDefaultMaxBackchannel = 1.0;
inline constexpr int kBackchannelBins = 10;

/// Model utterances of at most `max_bc_duration` seconds lying inside a user
/// utterance, per minute of user speech.
double backchannel_frequency(std::span<const EpisodeResult> episodes,
                             double max_bc_duration = kDefaultMaxBackchannel);

/// Histogram of backchannel onsets by relative position within the enclosing
/// user utterance.
std::vector<double> backchannel_onset_histogram(std::span<const EpisodeResult> episodes,
                                                double max_bc_duration = kDefaultMaxBackchannel,
                                                int bins = kBackchannelBins);

/// Jensen-Shannon divergence in bits. Inputs are normalised internally.
double jsd(std::span<const double> p, std::span<const double> q);

using Words = std::vector<std::string>;

Words tokenize_transcript(std::string_view text);

/// 1 - unique n-grams / total n-grams; 0 when fewer than n words.
double seq_rep_n(std::span<const std::string> words, int n);

/// Sentence BLEU with uniform weights over 1..max_n, clipped counts against
/// all references, brevity penalty from the closest reference length, and a
/// hard zero when any precision is zero.
double bleu(std::span<const std::string> hypothesis, std::span<const Words> references, int max_n = 4);

/// Mean BLEU-4 of each sample against all others. Needs at least 2 samples.
double self_bleu(std::span<const Words> samples);

struct ScenarioReport {
  int episodes = 0;
  double tor = 0.0;
  LatencySummary latency;
  double backchannel_freq = 0.0;
  std::optional<double> jsd;  // absent when the model produced no backchannels
  std::optional<double> mean_r_total;
};

struct CorpusReport {
  std::map<int, double> seq_rep;
  std::optional<double> self_bleu;
  int samples = 0;
};

struct EvalReport {
  std::map<std::string, ScenarioReport> scenarios;
  std::optional<CorpusReport> corpus;
};

/// Per-kind timing metrics. `reference_hist` is the backchannel onset
/// reference; an empty span means uniform over kBackchannelBins bins.
std::map<std::string, ScenarioReport> scenario_reports(std::span<const EpisodeResult> episodes,
                                                       std::span<const double> reference_hist = {});

CorpusReport corpus_report(std::span<const Words> samples, std::span<const int> ns = {});

Json to_json(const EvalReport& report);

/// Episode-results JSONL: scenario fields plus "model_states" (frame bits) or
/// "model_intervals".
EpisodeResult episode_result_from_json(const Json& j);
Json episode_result_to_json(const EpisodeResult& r, const StateSequence* states = nullptr);

}  // namespace fdrl
