// Reader for the small TOML subset used by search configs.

#include <cctype>
#include <charconv>
#include <string>

#include "hgapso/config.hpp"
#include "hgapso/error.hpp"

namespace hgapso {

namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }
  char take() { return text_[pos_++]; }
  int line() const { return line_; }

  void skip_inline_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }
  /// Whitespace, newlines and comments.
  void skip_all_space() {
    for (;;) {
      skip_inline_space();
      skip_comment();
      if (peek() == '\r') {
        ++pos_;
        continue;
      }
      if (peek() == '\n') {
        ++pos_;
        ++line_;
        continue;
      }
      return;
    }
  }
  void expect_line_end() {
    skip_inline_space();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (eof()) return;
    if (peek() != '\n') fail("unexpected text after value");
    ++pos_;
    ++line_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("toml line " + std::to_string(line_) + ": " + what);
  }

  std::string bare_key() {
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) key += take();
    if (key.empty()) fail("expected a key");
    return key;
  }

  nlohmann::json value() {
    skip_inline_space();
    const char c = peek();
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (c == 't' || c == 'f') return boolean();
    return number();
  }

 private:
  nlohmann::json literal_string() {
    take();
    std::string s;
    while (!eof() && peek() != '\'') {
      if (peek() == '\n') fail("unterminated string");
      s += take();
    }
    if (eof()) fail("unterminated string");
    take();
    return s;
  }

  nlohmann::json basic_string() {
    take();
    std::string s;
    while (!eof() && peek() != '"') {
      char ch = take();
      if (ch == '\n') fail("unterminated string");
      if (ch == '\\') {
        if (eof()) fail("unterminated escape");
        const char e = take();
        switch (e) {
          case 'n': ch = '\n'; break;
          case 't': ch = '\t'; break;
          case '"': ch = '"'; break;
          case '\\': ch = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      s += ch;
    }
    if (eof()) fail("unterminated string");
    take();
    return s;
  }

  nlohmann::json array() {
    take();
    auto arr = nlohmann::json::array();
    skip_all_space();
    while (peek() != ']') {
      if (eof()) fail("unterminated array");
      arr.push_back(value());
      skip_all_space();
      if (peek() == ',') {
        take();
        skip_all_space();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    take();
    return arr;
  }

  nlohmann::json boolean() {
    if (text_.substr(pos_).starts_with("true")) {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_).starts_with("false")) {
      pos_ += 5;
      return false;
    }
    fail("expected a value");
  }

  nlohmann::json number() {
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      tok += take();
    if (tok.empty()) fail("expected a value");
    std::string clean;
    for (char ch : tok) {
      if (ch != '_') clean += ch;
    }
    if (clean.front() == '+') clean.erase(0, 1);
    const bool is_float = clean.find_first_of(".eE") != std::string::npos || clean == "inf" || clean == "nan";
    if (!is_float) {
      if (clean.front() == '-') {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), v);
        if (ec != std::errc() || p != clean.data() + clean.size()) fail("invalid integer '" + tok + "'");
        return v;
      }
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), v);
      if (ec != std::errc() || p != clean.data() + clean.size()) fail("invalid integer '" + tok + "'");
      return v;
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), v);
    if (ec != std::errc() || p != clean.data() + clean.size()) fail("invalid number '" + tok + "'");
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) {
  Cursor cur(text);
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  for (;;) {
    cur.skip_all_space();
    if (cur.eof()) break;
    if (cur.peek() == '[') {
      cur.take();
      table = &root;
      for (;;) {
        cur.skip_inline_space();
        const std::string key = cur.bare_key();
        nlohmann::json& next = (*table)[key];
        if (next.is_null()) next = nlohmann::json::object();
        if (!next.is_object()) cur.fail("'" + key + "' is not a table");
        table = &next;
        cur.skip_inline_space();
        if (cur.peek() == '.') {
          cur.take();
          continue;
        }
        if (cur.peek() != ']') cur.fail("expected ']'");
        cur.take();
        break;
      }
      cur.expect_line_end();
      continue;
    }
    const std::string key = cur.bare_key();
    cur.skip_inline_space();
    if (cur.peek() != '=') cur.fail("expected '=' after '" + key + "'");
    cur.take();
    if (table->contains(key)) cur.fail("duplicate key '" + key + "'");
    (*table)[key] = cur.value();
    cur.expect_line_end();
  }
  return root;
}

nlohmann::json parse_toml_value(std::string_view text) {
  Cursor cur(text);
  auto v = cur.value();
  cur.skip_inline_space();
  if (!cur.eof()) cur.fail("unexpected text after value");
  return v;
}

}  // namespace hgapso
