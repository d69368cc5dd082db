#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace flowsense {

// Flat `key = value` configuration file. Lines starting with '#' and blank
// lines are ignored. Values keep their raw text; typed access happens at
// lookup time so one map serves every subcommand.
class ConfigMap {
 public:
  ConfigMap() = default;

  static ConfigMap from_file(const std::string& path);
  static ConfigMap from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  int64_t get_int(const std::string& key, int64_t def) const;
  uint64_t get_uint(const std::string& key, uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;
  // Comma-separated doubles, e.g. "0.8,0.1,0.1".
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& def) const;
  std::vector<int64_t> get_ints(const std::string& key,
                                const std::vector<int64_t>& def) const;

  // Throws ConfigError if the file contained keys outside `known`.
  void require_known_keys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace flowsense
