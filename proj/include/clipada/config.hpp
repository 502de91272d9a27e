// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace clipada {

// Flat `key = value` text. `#` starts a comment; blank lines are ignored.
// Later assignments of the same key win, which is how --set overrides work.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, std::string_view origin = "<text>");
  static KeyValues load(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  // Parses "key=value"; throws ConfigError on malformed input.
  void apply_override(std::string_view assignment);

  bool contains(const std::string& key) const { return entries_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Sorted `key=value` lines; the basis of the config hash.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> entries_;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace clipada
