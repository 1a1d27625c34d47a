#pragma once

// Plain-text key=value documents with [section] headers. Sections may repeat
// (scene files use one [primitive] block per primitive). '#' starts a comment.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hisop {

struct KeyValueSection {
  std::string name;  // empty for entries before the first header
  std::vector<std::pair<std::string, std::string>> entries;

  std::optional<std::string> get(std::string_view key) const;
  /// Throws ConfigError naming the section and key when absent.
  const std::string& require(std::string_view key) const;
  void set(std::string key, std::string value);
};

struct KeyValueDocument {
  std::vector<KeyValueSection> sections;

  static KeyValueDocument parse(std::string_view text, const std::string& source = "<text>");
  static KeyValueDocument load(const std::string& path);
  std::string serialize() const;

  const KeyValueSection* find(std::string_view name) const;
  KeyValueSection& section(std::string_view name);  // creates on demand
  std::vector<const KeyValueSection*> all(std::string_view name) const;
};

double parse_real(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);
std::vector<double> parse_reals(std::string_view text, std::size_t expected, std::string_view what);
/// on/off, true/false, 1/0.
bool parse_switch(std::string_view text, std::string_view what);
std::string format_real(double v);

}  // namespace hisop
