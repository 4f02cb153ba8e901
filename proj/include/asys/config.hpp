#pragma once

// Flat key=value configuration files: one assignment per line, '#' comments,
// whitespace-insensitive. Typed getters throw with the offending key so CLI
// errors point at the config line that caused them.

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace asys {

using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

inline ConfigMap parse_config(std::istream& in) {
  ConfigMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(line_no) + " has no '='");
    const std::string key = detail::trim(stripped.substr(0, eq));
    if (key.empty())
      throw std::runtime_error("config: line " + std::to_string(line_no) + " has an empty key");
    map[key] = detail::trim(stripped.substr(eq + 1));
  }
  return map;
}

inline ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  return parse_config(in);
}

inline bool has_key(const ConfigMap& map, const std::string& key) { return map.count(key) > 0; }

inline std::string get_string(const ConfigMap& map, const std::string& key,
                              const std::string& fallback) {
  const auto it = map.find(key);
  return it == map.end() ? fallback : it->second;
}

inline std::string require_string(const ConfigMap& map, const std::string& key) {
  const auto it = map.find(key);
  if (it == map.end()) throw std::runtime_error("config: missing key " + key);
  return it->second;
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("config: key " + key + " is not a number: " + value);
  }
  if (used != value.size())
    throw std::runtime_error("config: key " + key + " has trailing junk: " + value);
  return out;
}

inline long long parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("config: key " + key + " is not an integer: " + value);
  }
  if (used != value.size())
    throw std::runtime_error("config: key " + key + " has trailing junk: " + value);
  return out;
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string cur;
  std::stringstream ss(value);
  while (std::getline(ss, cur, ',')) parts.push_back(trim(cur));
  return parts;
}

}  // namespace detail

inline double get_double(const ConfigMap& map, const std::string& key, double fallback) {
  const auto it = map.find(key);
  return it == map.end() ? fallback : detail::parse_double(key, it->second);
}

inline long long get_int(const ConfigMap& map, const std::string& key, long long fallback) {
  const auto it = map.find(key);
  return it == map.end() ? fallback : detail::parse_int(key, it->second);
}

inline std::uint64_t get_uint64(const ConfigMap& map, const std::string& key, std::uint64_t fallback) {
  const auto it = map.find(key);
  if (it == map.end()) return fallback;
  const long long v = detail::parse_int(key, it->second);
  if (v < 0) throw std::runtime_error("config: key " + key + " must be non-negative");
  return static_cast<std::uint64_t>(v);
}

inline bool get_bool(const ConfigMap& map, const std::string& key, bool fallback) {
  const auto it = map.find(key);
  if (it == map.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config: key " + key + " is not a boolean: " + it->second);
}

inline std::vector<double> get_double_list(const ConfigMap& map, const std::string& key) {
  std::vector<double> out;
  for (const std::string& part : detail::split_list(require_string(map, key)))
    out.push_back(detail::parse_double(key, part));
  return out;
}

inline std::vector<int> get_int_list(const ConfigMap& map, const std::string& key) {
  std::vector<int> out;
  for (const std::string& part : detail::split_list(require_string(map, key)))
    out.push_back(static_cast<int>(detail::parse_int(key, part)));
  return out;
}

inline std::vector<std::string> get_string_list(const ConfigMap& map, const std::string& key) {
  return detail::split_list(require_string(map, key));
}

}  // namespace asys
