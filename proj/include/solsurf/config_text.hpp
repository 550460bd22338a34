#pragma once

// A small reader for the TOML subset used by model files: [section] headers
// (dotted names allowed), key = value lines, strings, numbers, and
// single-line arrays that may nest. '#' starts a comment outside strings.

#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "solsurf/symexpr/expr.hpp"

namespace solsurf {

class ConfigError : public Error {
 public:
  ConfigError(const std::string& msg, int line)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  [[nodiscard]] int line() const { return line_; }

 private:
  int line_;
};

struct ConfigValue {
  enum class Kind { String, Number, Array };
  Kind kind = Kind::String;
  std::string str;
  double num = 0.0;
  std::vector<ConfigValue> items;
  int line = 0;

  [[nodiscard]] const std::string& as_string(const std::string& key) const {
    if (kind != Kind::String) throw ConfigError("'" + key + "' must be a string", line);
    return str;
  }
  [[nodiscard]] double as_number(const std::string& key) const {
    if (kind != Kind::Number) throw ConfigError("'" + key + "' must be a number", line);
    return num;
  }
  [[nodiscard]] int as_int(const std::string& key) const {
    double v = as_number(key);
    if (v != static_cast<double>(static_cast<int>(v))) throw ConfigError("'" + key + "' must be an integer", line);
    return static_cast<int>(v);
  }
  [[nodiscard]] const std::vector<ConfigValue>& as_array(const std::string& key) const {
    if (kind != Kind::Array) throw ConfigError("'" + key + "' must be an array", line);
    return items;
  }
};

struct ConfigSection {
  std::string name;
  int line = 0;
  std::vector<std::pair<std::string, ConfigValue>> entries;  // file order

  [[nodiscard]] const ConfigValue* find(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return &v;
    return nullptr;
  }
  [[nodiscard]] const ConfigValue& at(const std::string& key) const {
    if (const auto* v = find(key)) return *v;
    throw ConfigError("section [" + name + "] is missing key '" + key + "'", line);
  }
};

namespace detail {

class ConfigLineReader {
 public:
  ConfigLineReader(const std::string& text, int line) : s_(text), line_(line) {}

  ConfigValue value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("expected a value");
    ConfigValue v;
    v.line = line_;
    char c = s_[pos_];
    if (c == '"') {
      v.kind = ConfigValue::Kind::String;
      v.str = quoted();
    } else if (c == '[') {
      ++pos_;
      v.kind = ConfigValue::Kind::Array;
      skip_ws();
      if (peek() == ']') {
        ++pos_;
        return v;
      }
      for (;;) {
        v.items.push_back(value());
        skip_ws();
        if (peek() == ',') {
          ++pos_;
          skip_ws();
          if (peek() == ']') {
            ++pos_;
            break;
          }
          continue;
        }
        if (peek() == ']') {
          ++pos_;
          break;
        }
        fail("expected ',' or ']' in array");
      }
    } else {
      v.kind = ConfigValue::Kind::Number;
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      v.num = std::strtod(begin, &end);
      if (end == begin) fail("expected a string, number or array");
      pos_ += static_cast<std::size_t>(end - begin);
    }
    return v;
  }

  void expect_end() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected trailing text");
  }

 private:
  std::string quoted() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
        char n = s_[pos_ + 1];
        out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
        pos_ += 2;
      } else {
        out += s_[pos_++];
      }
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  [[nodiscard]] char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(msg + " (column " + std::to_string(pos_ + 1) + ")", line_);
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_;
};

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Sections in file order. Keys before the first header land in a section named "".
inline std::vector<ConfigSection> parse_config(const std::string& text) {
  std::vector<ConfigSection> out;
  out.push_back({"", 1, {}});
  std::size_t start = 0;
  int line = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string raw = text.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
    start = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line;
    std::string t = detail::trim(raw);
    if (t.empty() || t[0] == '#') continue;
    if (t[0] == '[') {
      auto close = t.find(']');
      if (close == std::string::npos) throw ConfigError("unterminated section header", line);
      std::string name = detail::trim(t.substr(1, close - 1));
      if (name.empty()) throw ConfigError("empty section name", line);
      std::string rest = detail::trim(t.substr(close + 1));
      if (!rest.empty() && rest[0] != '#') throw ConfigError("unexpected text after section header", line);
      for (const auto& s : out)
        if (s.name == name) throw ConfigError("duplicate section [" + name + "]", line);
      out.push_back({name, line, {}});
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
    std::string key = detail::trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("empty key", line);
    if (out.back().find(key)) throw ConfigError("duplicate key '" + key + "'", line);
    std::string rhs = t.substr(eq + 1);
    detail::ConfigLineReader reader(rhs, line);
    ConfigValue v = reader.value();
    reader.expect_end();
    out.back().entries.emplace_back(key, std::move(v));
  }
  return out;
}

}  // namespace solsurf
