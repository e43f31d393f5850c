// SPDX-License-Identifier: Apache-2.0
#include "remreg/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "remreg/error.hpp"

namespace remreg {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("key '" + key + "': cannot parse '" + value + "' as " + want);
}

}  // namespace

RunConfig::RunConfig(std::vector<KeySpec> whitelist) : whitelist_(std::move(whitelist)) {
  for (const auto& k : whitelist_) {
    if (!k.default_value.empty()) values_[k.key] = {k.default_value, "default"};
  }
}

bool RunConfig::accepts(const std::string& key) const {
  return std::any_of(whitelist_.begin(), whitelist_.end(), [&](const KeySpec& k) { return k.key == key; });
}

void RunConfig::set(const std::string& key, const std::string& value, const std::string& source) {
  if (!accepts(key)) throw ConfigError("unknown key '" + key + "' (from " + source + ")");
  values_[key] = {value, source};
}

void RunConfig::load_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), source + ":" + std::to_string(lineno));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

const std::string& RunConfig::source(const std::string& key) const {
  static const std::string none = "unset";
  auto it = values_.find(key);
  return it == values_.end() ? none : it->second.source;
}

std::string RunConfig::get(const std::string& key) const {
  if (!accepts(key)) throw ConfigError("lookup of unknown key '" + key + "'");
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
  return it->second.value;
}

std::optional<std::string> RunConfig::get_optional(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get(key);
}

long RunConfig::get_int(const std::string& key) const {
  const std::string v = get(key);
  char* end = nullptr;
  errno = 0;
  const long r = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno != 0) bad_value(key, v, "an integer");
  return r;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string v = get(key);
  char* end = nullptr;
  errno = 0;
  const unsigned long long r = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || *end != '\0' || errno != 0) bad_value(key, v, "a non-negative integer");
  return r;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  char* end = nullptr;
  errno = 0;
  const double r = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno != 0 || !std::isfinite(r)) bad_value(key, v, "a finite number");
  return r;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::array<Index, 3> RunConfig::get_dims(const std::string& key) const {
  const std::string v = get(key);
  std::vector<Index> parts;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    char* end = nullptr;
    const long long d = std::strtoll(tok.c_str(), &end, 10);
    if (tok.empty() || *end != '\0' || d < 1) bad_value(key, v, "positive extents");
    parts.push_back(d);
  }
  if (parts.size() == 1) return {parts[0], parts[0], parts[0]};
  if (parts.size() != 3) bad_value(key, v, "one extent or three comma-separated extents");
  return {parts[0], parts[1], parts[2]};
}

void RunConfig::require(const std::vector<std::string>& keys) const {
  for (const auto& k : keys) {
    if (!has(k)) throw ConfigError("missing required key '" + k + "'");
  }
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& k : whitelist_) {
    auto it = values_.find(k.key);
    if (it == values_.end()) continue;
    out += k.key + "=" + it->second.value + "  # " + it->second.source + "\n";
  }
  return out;
}

RunConfig parse_config(const std::vector<KeySpec>& whitelist, const std::optional<std::filesystem::path>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg(whitelist);
  if (file) cfg.load_file(*file);
  for (const auto& [k, v] : overrides) cfg.set(k, v, "command line");
  return cfg;
}

}  // namespace remreg
