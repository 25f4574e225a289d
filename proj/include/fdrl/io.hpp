#pragma once

// File helpers and JSON bindings for the on-disk formats.

#include <functional>
#include <string>
#include <vector>

#include "fdrl/core.hpp"
#include "json.hpp"

namespace fdrl {

using Json = nlohmann::json;

std::string read_file(const std::string& path);

/// Writes to `path.tmp` then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);

/// Parses one JSON object per non-blank line; `fn(record, line_number)`.
/// Throws ParseError naming the line on malformed JSON.
void for_each_jsonl(const std::string& path, const std::function<void(const Json&, int)>& fn);

/// [[s, e], ...] -> normalized IntervalSet (InvalidIntervalError on e <= s).
IntervalSet intervals_from_json(const Json& j);
Json intervals_to_json(const IntervalSet& set);

StateSequence states_from_json(const Json& j);

[[noreturn]] void throw_missing_field(const char* key);
[[noreturn]] void throw_bad_field(const char* key, const char* what);

/// Reads a required field, wrapping type errors as ParseError.
template <typename T>
T json_field(const Json& j, const char* key) {
  if (!j.contains(key)) throw_missing_field(key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw_bad_field(key, e.what());
  }
}

}  // namespace fdrl
