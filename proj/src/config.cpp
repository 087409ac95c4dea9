#include "avsync/config.hpp"

#include <fstream>
#include <sstream>

namespace avsync {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  check(is.good(), cat("cannot open config: ", path));
  RunConfig cfg;
  cfg.source_path_ = path;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    cfg.lines_.push_back(line);
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      check(t.back() == ']', cat(path, ":", lineno, ": malformed section header: ", t));
      section = trim(t.substr(1, t.size() - 2));
      check(!section.empty(), cat(path, ":", lineno, ": empty section name"));
      continue;
    }
    const auto eq = t.find('=');
    check(eq != std::string::npos, cat(path, ":", lineno, ": expected key = value, got: ", t));
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    check(!key.empty(), cat(path, ":", lineno, ": empty key"));
    check(!section.empty(), cat(path, ":", lineno, ": key '", key, "' before any [section]"));
    check(cfg.values_[section].find(key) == cfg.values_[section].end(),
          cat(path, ":", lineno, ": duplicate key '", section, ".", key, "'"));
    cfg.values_[section][key] = value;
  }
  return cfg;
}

void RunConfig::override_value(const std::string& section, const std::string& key,
                               const std::string& value) {
  values_[section][key] = value;
  overrides_.push_back(cat(section, ".", key, " = ", value));
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  return s != values_.end() && s->second.find(key) != s->second.end();
}

std::string RunConfig::get(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  const auto s = values_.find(section);
  if (s == values_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double RunConfig::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    check(pos == v.size(), "");
    return d;
  } catch (...) {
    fail(cat("config: ", section, ".", key, " = '", v, "' is not a number"));
  }
}

std::int64_t RunConfig::get_int(const std::string& section, const std::string& key,
                                std::int64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    check(pos == v.size(), "");
    return d;
  } catch (...) {
    fail(cat("config: ", section, ".", key, " = '", v, "' is not an integer"));
  }
}

bool RunConfig::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(cat("config: ", section, ".", key, " = '", v, "' is not a boolean"));
}

std::vector<double> RunConfig::get_list(const std::string& section, const std::string& key,
                                        std::vector<double> fallback) const {
  if (!has(section, key)) return fallback;
  std::vector<double> out;
  std::istringstream ss(get(section, key, ""));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      fail(cat("config: ", section, ".", key, " has a non-numeric list entry '", tok, "'"));
    }
  }
  check(!out.empty(), cat("config: ", section, ".", key, " is an empty list"));
  return out;
}

void RunConfig::validate_known(
    const std::map<std::string, std::set<std::string>>& registry) const {
  for (const auto& [section, kv] : values_) {
    const auto reg = registry.find(section);
    check(reg != registry.end(), cat("config: unknown section [", section, "]"));
    for (const auto& [key, value] : kv)
      check(reg->second.count(key) > 0,
            cat("config: unknown key '", section, ".", key, "'"));
  }
}

std::string RunConfig::echo() const {
  std::string out;
  if (!source_path_.empty()) out += cat("# config file: ", source_path_, "\n");
  for (const auto& l : lines_) out += l + "\n";
  if (!overrides_.empty()) {
    out += "# command-line overrides\n";
    for (const auto& o : overrides_) out += o + "\n";
  }
  return out;
}

void RunConfig::write_echo(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  check(os.good(), cat("cannot open for write: ", path));
  os << echo();
  check(os.good(), cat("write failed: ", path));
}

}  // namespace avsync
