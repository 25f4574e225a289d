#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fdrl/error.hpp"
#include "fdrl/metrics.hpp"
#include "fdrl/reward.hpp"

using namespace fdrl;

namespace {

EpisodeResult episode(TimeInterval window, std::vector<std::pair<double, double>> model,
                      std::vector<std::pair<double, double>> user = {{0.0, 1.0}}, double cue = 0.0) {
  EpisodeResult e;
  e.spec.horizon_frames = 250;
  e.spec.eval_window = window;
  e.spec.cue_time = cue;
  e.spec.user = make_interval_set(user);
  e.model = make_interval_set(model);
  return e;
}

Words words(const std::string& s) { return tokenize_transcript(s); }

}  // namespace

TEST(Takeover, Counting) {
  const std::vector<EpisodeResult> eps{episode({2, 4}, {{2.5, 3}}), episode({2, 4}, {{3.9, 5}}),
                                       episode({2, 4}, {{0.5, 1}})};
  EXPECT_DOUBLE_EQ(takeover_rate(eps), 2.0 / 3.0);
  EXPECT_EQ(takeover_rate(std::vector<EpisodeResult>{episode({2, 4}, {})}), 0.0);
  EXPECT_THROW(takeover_rate(std::vector<EpisodeResult>{}), EmptyInputError);
}

TEST(Takeover, TouchingWindowStartIsNotCounted) {
  EXPECT_EQ(takeover_rate(std::vector<EpisodeResult>{episode({2, 4}, {{1, 2}})}), 0.0);
  EXPECT_EQ(takeover_rate(std::vector<EpisodeResult>{episode({2, 4}, {{4, 5}})}), 0.0);
}

TEST(Latency, Examples) {
  auto s = mean_response_latency(std::vector<EpisodeResult>{episode({4, 6}, {{4.3, 5}}, {{0, 4}}, 4.0)});
  ASSERT_TRUE(s.mean);
  EXPECT_NEAR(*s.mean, 0.3, 1e-12);
  s = mean_response_latency(std::vector<EpisodeResult>{episode({4, 6}, {{1, 2}}, {{0, 4}}, 4.0)});
  EXPECT_FALSE(s.mean);
  EXPECT_EQ(s.count, 0);
  s = mean_response_latency(std::vector<EpisodeResult>{episode({1, 3}, {{1.2, 2}}, {{0, 1}}, 1.0),
                                                       episode({1, 3}, {{1.4, 2}}, {{0, 1}}, 1.0)});
  EXPECT_NEAR(*s.mean, 0.3, 1e-12);
  EXPECT_EQ(s.count, 2);
}

TEST(Backchannel, Frequency) {
  EXPECT_DOUBLE_EQ(backchannel_frequency(std::vector<EpisodeResult>{episode({0, 12}, {{3, 3.5}}, {{0, 12}})}), 5.0);
  EXPECT_EQ(backchannel_frequency(std::vector<EpisodeResult>{episode({0, 12}, {{3, 6}}, {{0, 12}})}), 0.0);
  EXPECT_EQ(backchannel_frequency(std::vector<EpisodeResult>{episode({0, 12}, {}, {{0, 12}})}), 0.0);
}

TEST(Backchannel, OnsetHistogram) {
  const auto h = backchannel_onset_histogram(
      std::vector<EpisodeResult>{episode({0, 10}, {{0.5, 1.0}, {9.5, 10.0}}, {{0, 10}})});
  ASSERT_EQ(h.size(), 10u);
  EXPECT_EQ(h[0], 1.0);
  EXPECT_EQ(h[9], 1.0);
}

TEST(Jsd, Examples) {
  const std::vector<double> a{0.5, 0.5}, b{1, 0}, c{0, 1};
  EXPECT_EQ(jsd(a, a), 0.0);
  EXPECT_NEAR(jsd(b, c), 1.0, 1e-15);
  EXPECT_NEAR(jsd(a, b), 0.3112781, 1e-7);
  EXPECT_THROW(jsd(a, std::vector<double>{1, 0, 0}), ShapeError);
  EXPECT_THROW(jsd(a, std::vector<double>{0, 0}), EmptyInputError);
}

TEST(Jsd, SymmetricAndBounded) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> p(10), q(10);
    for (auto& x : p) x = u(rng);
    for (auto& x : q) x = u(rng);
    EXPECT_NEAR(jsd(p, q), jsd(q, p), 1e-15);
    EXPECT_GE(jsd(p, q), 0.0);
    EXPECT_LE(jsd(p, q), 1.0);
  }
}

TEST(SeqRep, Examples) {
  EXPECT_EQ(seq_rep_n(words("a b c d"), 1), 0.0);
  EXPECT_DOUBLE_EQ(seq_rep_n(words("a b a b"), 2), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(seq_rep_n(words("the cat the cat"), 1), 0.5);
  EXPECT_EQ(seq_rep_n(words("a"), 2), 0.0);
  EXPECT_THROW(seq_rep_n(words("a"), 0), ConfigError);
}

TEST(SeqRep, SelfAppendIncreases) {
  const auto w = words("one two three four five");
  Words twice = w;
  twice.insert(twice.end(), w.begin(), w.end());
  for (int n = 1; n <= 5; ++n) EXPECT_GT(seq_rep_n(twice, n), seq_rep_n(w, n));
}

TEST(Bleu, HandComputedSubCheck) {
  const std::vector<Words> refs{words("a b c d f")};
  const double want = std::pow(4.0 / 5 * 3.0 / 4 * 2.0 / 3 * 1.0 / 2, 0.25);
  EXPECT_NEAR(bleu(words("a b c d e"), refs), want, 1e-12);
}

TEST(Bleu, BrevityPenaltyAndZeroPrecision) {
  const std::vector<Words> refs{words("a b c d e f g h")};
  EXPECT_NEAR(bleu(words("a b c d"), refs), std::exp(1.0 - 8.0 / 4.0), 1e-12);
  EXPECT_EQ(bleu(words("x y z w"), refs), 0.0);
  EXPECT_THROW(bleu(words("a"), std::vector<Words>{}), EmptyInputError);
}

TEST(SelfBleu, Examples) {
  const auto s = words("one two three four five six seven eight nine ten");
  EXPECT_DOUBLE_EQ(self_bleu(std::vector<Words>{s, s}), 1.0);
  EXPECT_DOUBLE_EQ(self_bleu(std::vector<Words>{s, s, s, s}), 1.0);
  EXPECT_EQ(self_bleu(std::vector<Words>{words("a b c d"), words("e f g h")}), 0.0);
  EXPECT_THROW(self_bleu(std::vector<Words>{s}), EmptyInputError);
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize_transcript("Hello, world!"), (Words{"hello", "world"}));
  EXPECT_TRUE(tokenize_transcript("").empty());
  EXPECT_EQ(tokenize_transcript("Don't stop"), (Words{"don't", "stop"}));
}

TEST(Pipeline, StatesAndIntervalsAgree) {
  std::mt19937_64 rng(5);
  RewardConfig seg;
  std::vector<EpisodeResult> from_states, from_intervals;
  for (int i = 0; i < 50; ++i) {
    auto spec = generate(i % 2 ? ScenarioKind::kTurnTaking : ScenarioKind::kPause, {}, static_cast<std::uint64_t>(i));
    StateSequence s(static_cast<std::size_t>(spec.horizon_frames));
    for (auto& x : s) x = static_cast<State>(rng() % 4 == 0);
    EpisodeResult r{spec, segment_utterances(s, seg)};
    from_states.push_back(episode_result_from_json(episode_result_to_json(r, &s)));
    from_intervals.push_back(episode_result_from_json(episode_result_to_json(r)));
  }
  EXPECT_EQ(takeover_rate(from_states), takeover_rate(from_intervals));
  EXPECT_EQ(mean_response_latency(from_states).mean, mean_response_latency(from_intervals).mean);
}
