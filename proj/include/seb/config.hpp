#pragma once

// Flat key=value experiment configs.
//
// One `key = value` pair per line, `#` starts a comment, blank lines are
// ignored.  There is deliberately no nesting or quoting: every consumer of
// these files (and every other toolchain that wants to generate them) can
// parse the format with a couple of string splits.  Commands declare the
// keys they understand and reject everything else, so a typoed key fails
// loudly instead of silently falling back to a default.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "seb/errors.hpp"

namespace seb {

namespace detail {

inline std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

}  // namespace detail

struct KeyValueConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }

  std::string require(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw ConfigError("missing config key: " + key);
    return it->second;
  }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }
};

inline KeyValueConfig parse_config(std::istream& is) {
  KeyValueConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not key=value: " + line);
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        " has an empty key");
    if (!config.values.emplace(key, value).second)
      throw ConfigError("duplicate config key: " + key);
  }
  return config;
}

inline KeyValueConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("config file not found: " + path.string());
  return parse_config(is);
}

inline void reject_unknown_keys(const KeyValueConfig& config,
                                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : config.values)
    if (!allowed.count(key)) throw ConfigError("unknown config key: " + key);
}

// -------- Typed value parsing --------
//
// Each parser requires the whole string to be consumed, so trailing junk
// ("12x", "0.5.5") is a config error rather than a silent truncation.

inline std::int64_t parse_int(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    std::int64_t v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + " is not an integer: " + text);
  }
}

inline std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
    std::uint64_t v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + " is not a non-negative integer: " + text);
  }
}

inline double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + " is not a number: " + text);
  }
}

inline bool parse_bool(const std::string& text, const std::string& what) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(what + " is not a boolean: " + text);
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<int> parse_int_list(const std::string& text,
                                       const std::string& what) {
  std::vector<int> out;
  for (const auto& item : split_list(text))
    out.push_back(static_cast<int>(parse_int(item, what)));
  return out;
}

inline std::vector<double> parse_double_list(const std::string& text,
                                             const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(text))
    out.push_back(parse_double(item, what));
  return out;
}

// -------- Settings fingerprint --------
//
// FNV-1a over the canonical sorted key=value rendering of the effective
// settings.  Stable across runs and platforms, so the fingerprint in
// run_meta.json identifies a configuration, not an invocation.

inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string settings_fingerprint(
    const std::map<std::string, std::string>& settings) {
  std::string canonical;
  for (const auto& [key, value] : settings)
    canonical += key + "=" + value + "\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

}  // namespace seb
