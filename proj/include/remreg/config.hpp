// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "remreg/tensor.hpp"

namespace remreg {

/// One accepted configuration key.
struct KeySpec {
  std::string key;
  std::string default_value;  // empty: no default
  std::string help;
};

/// Resolved key=value configuration. Sources are layered defaults < file <
/// command line; keys outside the whitelist are rejected.
class RunConfig {
 public:
  explicit RunConfig(std::vector<KeySpec> whitelist);

  /// Reads `key = value` lines; blank lines and `#` comments are skipped.
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& source);
  void set(const std::string& key, const std::string& value, const std::string& source);

  bool accepts(const std::string& key) const;
  /// True when the key has a default or was set by some source.
  bool has(const std::string& key) const;
  const std::string& source(const std::string& key) const;

  std::string get(const std::string& key) const;
  long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  /// "32" for a cube or "L,W,H".
  std::array<Index, 3> get_dims(const std::string& key) const;
  std::optional<std::string> get_optional(const std::string& key) const;

  /// Throws ConfigError naming the first key in `keys` without a value.
  void require(const std::vector<std::string>& keys) const;

  const std::vector<KeySpec>& whitelist() const { return whitelist_; }
  /// One `key=value  # source` line per key with a value, whitelist order.
  std::string resolved() const;

 private:
  struct Entry {
    std::string value;
    std::string source;
  };
  std::vector<KeySpec> whitelist_;
  std::map<std::string, Entry> values_;
};

/// Builds a config from the whitelist defaults, an optional file and
/// command-line overrides, in that order of precedence.
RunConfig parse_config(const std::vector<KeySpec>& whitelist, const std::optional<std::filesystem::path>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace remreg
