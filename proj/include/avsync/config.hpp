#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "avsync/common.hpp"

namespace avsync {

// Line-oriented `key = value` configuration with `[section]` headers.
// Unknown keys are rejected against a registry so typos cannot silently pass;
// the effective configuration (file content plus command-line overrides) is
// echoed to disk verbatim.
class RunConfig {
 public:
  static RunConfig load(const std::string& path);
  RunConfig() = default;

  void override_value(const std::string& section, const std::string& key,
                      const std::string& value);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& section, const std::string& key,
                               std::vector<double> fallback) const;

  // Errors on any (section, key) not present in the registry.
  void validate_known(const std::map<std::string, std::set<std::string>>& registry) const;

  // Exact input lines plus one `section.key = value` line per override.
  std::string echo() const;
  void write_echo(const std::string& path) const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
  std::vector<std::string> lines_;  // verbatim input
  std::vector<std::string> overrides_;
  std::string source_path_;
};

}  // namespace avsync
