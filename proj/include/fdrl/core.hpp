#pragma once

// Vocabulary partitioning, token to speak/silence state extraction, and the
// half-open interval algebra used by the reward and metric code.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "fdrl/error.hpp"

namespace fdrl {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// 0 = inactive silence, 1 = active speech.
using State = std::uint8_t;
using StateSequence = std::vector<State>;

inline constexpr State kSilence = 0;
inline constexpr State kSpeech = 1;

/// Split of the token vocabulary into padding ids (silence) and everything
/// else (speech). Both id lists are sorted ascending.
class VocabPartition {
 public:
  int vocab_size() const { return static_cast<int>(is_pad_.size()); }
  const std::vector<TokenId>& pad_ids() const { return pad_ids_; }
  const std::vector<TokenId>& non_pad_ids() const { return non_pad_ids_; }
  bool is_pad(TokenId id) const { return is_pad_[static_cast<std::size_t>(id)] != 0; }
  bool contains(TokenId id) const { return id >= 0 && id < vocab_size(); }

  friend VocabPartition make_partition(int vocab_size, std::span<const TokenId> pad_ids);

 private:
  VocabPartition() = default;

  std::vector<TokenId> pad_ids_;
  std::vector<TokenId> non_pad_ids_;
  std::vector<std::uint8_t> is_pad_;
};

/// Throws RangeError for ids outside [0, vocab_size) and
/// DegeneratePartitionError when either side of the split is empty.
VocabPartition make_partition(int vocab_size, std::span<const TokenId> pad_ids);
inline VocabPartition make_partition(int vocab_size, std::initializer_list<TokenId> pad_ids) {
  return make_partition(vocab_size, std::span<const TokenId>(pad_ids.begin(), pad_ids.size()));
}

/// states[t] = 1 iff tokens[t] is a non-padding token.
StateSequence extract_states(std::span<const TokenId> tokens, const VocabPartition& partition);

/// Half-open interval [start, end) in seconds with start < end.
class TimeInterval {
 public:
  TimeInterval(double start, double end);

  double start() const { return start_; }
  double end() const { return end_; }
  double length() const { return end_ - start_; }

  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;

 private:
  double start_;
  double end_;
};

/// Sorted, pairwise-disjoint, non-touching intervals.
class IntervalSet {
 public:
  IntervalSet() = default;

  const std::vector<TimeInterval>& intervals() const { return intervals_; }
  std::size_t size() const { return intervals_.size(); }
  bool empty() const { return intervals_.empty(); }
  const TimeInterval& operator[](std::size_t i) const { return intervals_[i]; }
  auto begin() const { return intervals_.begin(); }
  auto end() const { return intervals_.end(); }

  double measure() const;

  /// Complement restricted to `window`.
  IntervalSet complement_within(const TimeInterval& window) const;
  /// Intersection with `window`.
  IntervalSet clipped_to(const TimeInterval& window) const;
  /// Merges neighbours separated by silences strictly shorter than `gap`.
  IntervalSet merge_gaps_shorter_than(double gap) const;

  friend bool operator==(const IntervalSet&, const IntervalSet&) = default;
  friend IntervalSet normalize_intervals(std::vector<TimeInterval> raw);

 private:
  std::vector<TimeInterval> intervals_;
};

/// Sorts and coalesces overlapping or touching intervals.
IntervalSet normalize_intervals(std::vector<TimeInterval> raw);

/// Builds intervals from [start, end] pairs; throws InvalidIntervalError on
/// any pair with start >= end.
IntervalSet make_interval_set(std::span<const std::pair<double, double>> pairs);
IntervalSet make_interval_set(std::initializer_list<std::pair<double, double>> pairs);

/// Total length of q covered by the set.
double intersect_duration(const TimeInterval& q, const IntervalSet& set);

}  // namespace fdrl
