#pragma once

#include "pnum/error.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace pnum {

/// Malformed or unknown configuration entries. Messages carry the line number.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Line-based `key = value` document. `#` starts a comment; lists are comma
/// separated. Every lookup records the resolved value (default or given) so
/// the full configuration can be written back out as JSON.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string get_choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed);
  double get_double(const std::string& key, double fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback);
  std::vector<std::int64_t> get_ints(const std::string& key, const std::vector<std::int64_t>& fallback);
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback,
                                       const std::vector<std::string>& allowed = {});

  /// Raises ConfigError for any key outside `allowed`.
  void restrict_to(const std::set<std::string>& allowed) const;
  /// ConfigError prefixed with the key's source line.
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  const nlohmann::ordered_json& resolved() const { return resolved_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry* find(const std::string& key) const;
  std::string where(const std::string& key) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
  nlohmann::ordered_json resolved_ = nlohmann::ordered_json::object();
};

}  // namespace pnum
