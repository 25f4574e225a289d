#include "fdrl/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fdrl {

VocabPartition make_partition(int vocab_size, std::span<const TokenId> pad_ids) {
  if (vocab_size <= 0) {
    throw RangeError("vocab_size must be positive, got " + std::to_string(vocab_size));
  }
  VocabPartition p;
  p.is_pad_.assign(static_cast<std::size_t>(vocab_size), 0);
  for (TokenId id : pad_ids) {
    if (id < 0 || id >= vocab_size) {
      throw RangeError("pad id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(vocab_size));
    }
    p.is_pad_[static_cast<std::size_t>(id)] = 1;
  }
  for (TokenId id = 0; id < vocab_size; ++id) {
    (p.is_pad(id) ? p.pad_ids_ : p.non_pad_ids_).push_back(id);
  }
  if (p.pad_ids_.empty()) throw DegeneratePartitionError("pad id set is empty");
  if (p.non_pad_ids_.empty()) throw DegeneratePartitionError("pad ids cover the whole vocabulary");
  return p;
}

StateSequence extract_states(std::span<const TokenId> tokens, const VocabPartition& partition) {
  StateSequence states;
  states.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (!partition.contains(tokens[t])) {
      throw RangeError("token " + std::to_string(tokens[t]) + " at frame " + std::to_string(t) +
                       " outside vocabulary");
    }
    states.push_back(partition.is_pad(tokens[t]) ? kSilence : kSpeech);
  }
  return states;
}

TimeInterval::TimeInterval(double start, double end) : start_(start), end_(end) {
  if (!std::isfinite(start) || !std::isfinite(end) || !(start < end)) {
    throw InvalidIntervalError("invalid interval [" + std::to_string(start) + ", " +
                               std::to_string(end) + ")");
  }
}

double IntervalSet::measure() const {
  double total = 0.0;
  for (const auto& iv : intervals_) total += iv.length();
  return total;
}

IntervalSet IntervalSet::complement_within(const TimeInterval& window) const {
  std::vector<TimeInterval> out;
  double cursor = window.start();
  for (const auto& iv : intervals_) {
    if (iv.end() <= cursor) continue;
    if (iv.start() >= window.end()) break;
    if (iv.start() > cursor) out.emplace_back(cursor, iv.start());
    cursor = std::max(cursor, iv.end());
  }
  if (cursor < window.end()) out.emplace_back(cursor, window.end());
  return normalize_intervals(std::move(out));
}

IntervalSet IntervalSet::clipped_to(const TimeInterval& window) const {
  std::vector<TimeInterval> out;
  for (const auto& iv : intervals_) {
    const double s = std::max(iv.start(), window.start());
    const double e = std::min(iv.end(), window.end());
    if (s < e) out.emplace_back(s, e);
  }
  return normalize_intervals(std::move(out));
}

IntervalSet IntervalSet::merge_gaps_shorter_than(double gap) const {
  IntervalSet out;
  for (const auto& iv : intervals_) {
    if (!out.intervals_.empty() && iv.start() - out.intervals_.back().end() < gap) {
      out.intervals_.back() = TimeInterval(out.intervals_.back().start(), iv.end());
    } else {
      out.intervals_.push_back(iv);
    }
  }
  return out;
}

IntervalSet normalize_intervals(std::vector<TimeInterval> raw) {
  std::sort(raw.begin(), raw.end(), [](const TimeInterval& a, const TimeInterval& b) {
    return a.start() < b.start() || (a.start() == b.start() && a.end() < b.end());
  });
  IntervalSet out;
  for (const auto& iv : raw) {
    // Half-open intervals that touch tile time, so they coalesce.
    if (!out.intervals_.empty() && iv.start() <= out.intervals_.back().end()) {
      auto& last = out.intervals_.back();
      if (iv.end() > last.end()) last = TimeInterval(last.start(), iv.end());
    } else {
      out.intervals_.push_back(iv);
    }
  }
  return out;
}

IntervalSet make_interval_set(std::span<const std::pair<double, double>> pairs) {
  std::vector<TimeInterval> raw;
  raw.reserve(pairs.size());
  for (const auto& [s, e] : pairs) raw.emplace_back(s, e);
  return normalize_intervals(std::move(raw));
}

IntervalSet make_interval_set(std::initializer_list<std::pair<double, double>> pairs) {
  return make_interval_set(std::span<const std::pair<double, double>>(pairs.begin(), pairs.size()));
}

double intersect_duration(const TimeInterval& q, const IntervalSet& set) {
  const auto& ivs = set.intervals();
  // First interval that ends after q starts.
  auto it = std::upper_bound(ivs.begin(), ivs.end(), q.start(),
                             [](double t, const TimeInterval& iv) { return t < iv.end(); });
  double total = 0.0;
  for (; it != ivs.end() && it->start() < q.end(); ++it) {
    total += std::min(q.end(), it->end()) - std::max(q.start(), it->start());
  }
  return total;
}

}  // namespace fdrl
