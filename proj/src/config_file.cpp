#include "flowsense/config_file.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "flowsense/errors.hpp"

namespace flowsense {

namespace {

std::string trim(const std::string& s) {
  auto b = s.begin();
  while (b != s.end() && std::isspace(static_cast<unsigned char>(*b))) ++b;
  auto e = s.end();
  while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  return std::string(b, e);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

}  // namespace

ConfigMap ConfigMap::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

ConfigMap ConfigMap::from_string(const std::string& text) {
  ConfigMap cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto pos = line.find('=');
    if (pos == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not 'key = value': " + line);
    }
    std::string key = trim(line.substr(0, pos));
    std::string value = trim(line.substr(pos + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        " has an empty key");
    }
    cfg.entries_[key] = value;
  }
  return cfg;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

bool ConfigMap::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

std::string ConfigMap::get_string(const std::string& key,
                                  const std::string& def) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? def : it->second;
}

double ConfigMap::get_double(const std::string& key, double def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError("config key '" + key + "' is not a number: " + it->second);
  }
  return v;
}

int64_t ConfigMap::get_int(const std::string& key, int64_t def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  char* end = nullptr;
  long long v = std::strtoll(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError("config key '" + key +
                      "' is not an integer: " + it->second);
  }
  return static_cast<int64_t>(v);
}

uint64_t ConfigMap::get_uint(const std::string& key, uint64_t def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  char* end = nullptr;
  unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError("config key '" + key +
                      "' is not an unsigned integer: " + it->second);
  }
  return static_cast<uint64_t>(v);
}

bool ConfigMap::get_bool(const std::string& key, bool def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: " + it->second);
}

std::vector<double> ConfigMap::get_doubles(
    const std::string& key, const std::vector<double>& def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  std::vector<double> out;
  for (const auto& piece : split_commas(it->second)) {
    char* end = nullptr;
    double v = std::strtod(piece.c_str(), &end);
    if (end == piece.c_str() || *end != '\0') {
      throw ConfigError("config key '" + key +
                        "' has a non-numeric element: " + piece);
    }
    out.push_back(v);
  }
  return out;
}

std::vector<int64_t> ConfigMap::get_ints(
    const std::string& key, const std::vector<int64_t>& def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  std::vector<int64_t> out;
  for (const auto& piece : split_commas(it->second)) {
    char* end = nullptr;
    long long v = std::strtoll(piece.c_str(), &end, 10);
    if (end == piece.c_str() || *end != '\0') {
      throw ConfigError("config key '" + key +
                        "' has a non-integer element: " + piece);
    }
    out.push_back(static_cast<int64_t>(v));
  }
  return out;
}

void ConfigMap::require_known_keys(
    const std::vector<std::string>& known) const {
  for (const auto& [key, value] : entries_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

}  // namespace flowsense
