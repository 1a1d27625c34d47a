#include "hisop/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hisop/errors.hpp"

namespace hisop {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::optional<std::string> KeyValueSection::get(std::string_view key) const {
  // Later entries override earlier ones.
  for (auto it = entries.rbegin(); it != entries.rend(); ++it)
    if (it->first == key) return it->second;
  return std::nullopt;
}

const std::string& KeyValueSection::require(std::string_view key) const {
  for (auto it = entries.rbegin(); it != entries.rend(); ++it)
    if (it->first == key) return it->second;
  throw ConfigError("missing key '" + std::string(key) + "' in section [" + name + "]");
}

void KeyValueSection::set(std::string key, std::string value) {
  for (auto& e : entries)
    if (e.first == key) {
      e.second = std::move(value);
      return;
    }
  entries.emplace_back(std::move(key), std::move(value));
}

KeyValueDocument KeyValueDocument::parse(std::string_view text, const std::string& source) {
  KeyValueDocument doc;
  doc.sections.push_back({});
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw FormatError(source + ":" + std::to_string(line_no) + ": unterminated section header");
      doc.sections.push_back({std::string(trim(line.substr(1, line.size() - 2))), {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError(source + ":" + std::to_string(line_no) + ": empty key");
    doc.sections.back().entries.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return doc;
}

KeyValueDocument KeyValueDocument::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::string KeyValueDocument::serialize() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& s : sections) {
    if (s.name.empty() && s.entries.empty()) continue;
    if (!first) os << '\n';
    first = false;
    if (!s.name.empty()) os << '[' << s.name << "]\n";
    for (const auto& [k, v] : s.entries) os << k << " = " << v << '\n';
  }
  return os.str();
}

const KeyValueSection* KeyValueDocument::find(std::string_view name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

KeyValueSection& KeyValueDocument::section(std::string_view name) {
  for (auto& s : sections)
    if (s.name == name) return s;
  sections.push_back({std::string(name), {}});
  return sections.back();
}

std::vector<const KeyValueSection*> KeyValueDocument::all(std::string_view name) const {
  std::vector<const KeyValueSection*> out;
  for (const auto& s : sections)
    if (s.name == name) out.push_back(&s);
  return out;
}

double parse_real(std::string_view text, std::string_view what) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("invalid number '" + std::string(text) + "' for " + std::string(what));
  return v;
}

long long parse_integer(std::string_view text, std::string_view what) {
  text = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("invalid integer '" + std::string(text) + "' for " + std::string(what));
  return v;
}

std::vector<double> parse_reals(std::string_view text, std::size_t expected, std::string_view what) {
  std::vector<double> out;
  std::istringstream is{std::string(text)};
  std::string tok;
  while (is >> tok) out.push_back(parse_real(tok, what));
  if (expected != 0 && out.size() != expected)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(expected) + " numbers, got " +
                      std::to_string(out.size()));
  return out;
}

bool parse_switch(std::string_view text, std::string_view what) {
  text = trim(text);
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ConfigError("invalid switch '" + std::string(text) + "' for " + std::string(what) + " (use on/off)");
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace hisop
