#include "fdrl/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fdrl/error.hpp"

namespace fdrl {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("error while writing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

void for_each_jsonl(const std::string& path, const std::function<void(const Json&, int)>& fn) {
  std::istringstream in(read_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!record.is_object()) throw ParseError(path + ":" + std::to_string(line_no) + ": expected a JSON object");
    try {
      fn(record, line_no);
    } catch (const Error& e) {
      if (e.category() == Error::Category::kIo) throw;
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

IntervalSet intervals_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("interval list must be an array");
  std::vector<std::pair<double, double>> pairs;
  for (const auto& iv : j) {
    if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number()) {
      throw ParseError("interval must be a [start, end] pair of numbers");
    }
    pairs.emplace_back(iv[0].get<double>(), iv[1].get<double>());
  }
  return make_interval_set(pairs);
}

Json intervals_to_json(const IntervalSet& set) {
  Json out = Json::array();
  for (const auto& iv : set) out.push_back({iv.start(), iv.end()});
  return out;
}

StateSequence states_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("state list must be an array");
  StateSequence out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
      throw ParseError("state values must be 0 or 1");
    }
    out.push_back(static_cast<State>(v.get<int>()));
  }
  return out;
}

void throw_missing_field(const char* key) { throw ParseError(std::string("missing field '") + key + "'"); }

void throw_bad_field(const char* key, const char* what) {
  throw ParseError(std::string("bad field '") + key + "': " + what);
}

}  // namespace fdrl
