#pragma once

// File and JSON helpers shared by the loaders and report writers.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pstts/error.hpp"

namespace pstts {

using json = nlohmann::json;

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::io_error, "write failed for " + path.string());
}

inline json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::invalid_input, origin + ": " + e.what());
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  return parse_json(read_text_file(path), path.string());
}

/// One JSON value per non-blank line.
inline std::vector<json> read_json_lines(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(parse_json(line, path.string() + ":" + std::to_string(lineno)));
  }
  return rows;
}

/// Rounds to 9 significant digits. nlohmann serializes the shortest
/// round-tripping form, so the result prints with at most 9 digits.
inline double sig9(double value) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return std::strtod(buf, nullptr);
}

inline std::string format_sig9(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

inline std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

template <typename T>
T get_field(const json& j, const char* key, const std::string& origin) {
  if (!j.is_object() || !j.contains(key))
    fail(ErrorCode::invalid_input, origin + ": missing field \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_input, origin + ": bad field \"" + key + "\": " + e.what());
  }
}

}  // namespace pstts
