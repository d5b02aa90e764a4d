#include "pnum/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace pnum {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_int(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string prefix = source + ":" + std::to_string(line) + ": ";
    if (eq == std::string::npos) throw ConfigError(prefix + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError(prefix + "missing key");
    if (!std::all_of(key.begin(), key.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; })) {
      throw ConfigError(prefix + "invalid key '" + key + "'");
    }
    if (value.empty()) throw ConfigError(prefix + "missing value for '" + key + "'");
    if (cfg.entries_.count(key)) {
      throw ConfigError(prefix + "duplicate key '" + key + "' (first set on line " +
                        std::to_string(cfg.entries_[key].line) + ")");
    }
    cfg.entries_[key] = {value, line};
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const Config::Entry* Config::find(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string Config::where(const std::string& key) const {
  const Entry* e = find(key);
  return e ? source_ + ":" + std::to_string(e->line) + ": " : source_ + ": ";
}

void Config::fail(const std::string& key, const std::string& message) const { throw ConfigError(where(key) + message); }

void Config::restrict_to(const std::set<std::string>& allowed) const {
  for (const auto& [key, entry] : entries_) {
    if (!allowed.count(key)) throw ConfigError(source_ + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
  }
}

std::string Config::get_string(const std::string& key, const std::string& fallback) {
  const Entry* e = find(key);
  const std::string v = e ? e->value : fallback;
  resolved_[key] = v;
  return v;
}

std::string Config::get_choice(const std::string& key, const std::string& fallback,
                               const std::vector<std::string>& allowed) {
  const std::string v = get_string(key, fallback);
  if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    fail(key, "'" + key + "' must be one of {" + list + "}, got '" + v + "'");
  }
  return v;
}

double Config::get_double(const std::string& key, double fallback) {
  const Entry* e = find(key);
  double v = fallback;
  if (e && !parse_double(e->value, v)) fail(key, "'" + key + "' expects a number, got '" + e->value + "'");
  resolved_[key] = v;
  return v;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) {
  const Entry* e = find(key);
  std::int64_t v = fallback;
  if (e && !parse_int(e->value, v)) fail(key, "'" + key + "' expects an integer, got '" + e->value + "'");
  resolved_[key] = v;
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) {
  const Entry* e = find(key);
  bool v = fallback;
  if (e) {
    if (e->value == "true") {
      v = true;
    } else if (e->value == "false") {
      v = false;
    } else {
      fail(key, "'" + key + "' expects true or false, got '" + e->value + "'");
    }
  }
  resolved_[key] = v;
  return v;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) {
  const Entry* e = find(key);
  std::vector<double> v = fallback;
  if (e) {
    v.clear();
    for (const std::string& item : split_list(e->value)) {
      double x = 0.0;
      if (!parse_double(item, x)) fail(key, "'" + key + "' expects a list of numbers, got '" + item + "'");
      v.push_back(x);
    }
  }
  resolved_[key] = v;
  return v;
}

std::vector<std::int64_t> Config::get_ints(const std::string& key, const std::vector<std::int64_t>& fallback) {
  const Entry* e = find(key);
  std::vector<std::int64_t> v = fallback;
  if (e) {
    v.clear();
    for (const std::string& item : split_list(e->value)) {
      std::int64_t x = 0;
      if (!parse_int(item, x)) fail(key, "'" + key + "' expects a list of integers, got '" + item + "'");
      v.push_back(x);
    }
  }
  resolved_[key] = v;
  return v;
}

std::vector<std::string> Config::get_strings(const std::string& key, const std::vector<std::string>& fallback,
                                             const std::vector<std::string>& allowed) {
  const Entry* e = find(key);
  std::vector<std::string> v = e ? split_list(e->value) : fallback;
  for (const std::string& item : v) {
    if (item.empty()) fail(key, "'" + key + "' has an empty list entry");
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), item) == allowed.end()) {
      fail(key, "'" + key + "' does not accept '" + item + "'");
    }
  }
  resolved_[key] = v;
  return v;
}

}  // namespace pnum
