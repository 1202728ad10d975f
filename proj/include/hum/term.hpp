#pragma once

#include <algorithm>
#include <cctype>
#include <cstring>
#include <charconv>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "hum/error.hpp"

namespace hum {

namespace detail {

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

inline std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::string_view body = text;
  if (body.front() == '+') body.remove_prefix(1);
  // from_chars also accepts inf/nan spellings, which are symbols here.
  if (!std::all_of(body.begin(), body.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || std::strchr(".eE+-", c); }))
    return std::nullopt;
  double value = 0;
  auto [end, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (ec != std::errc{} || end != body.data() + body.size()) return std::nullopt;
  return value;
}

}  // namespace detail

/// A symbolic expression: a symbol, a number, or a list of terms.
///
/// Symbols compare case-insensitively, since the command language mixes
/// `(Draw ?n)` and `(draw 1)` freely. The spelling a term was built with is
/// kept for printing. Numbers keep their source text so printing is lossless.
class Term {
 public:
  enum class Kind { Symbol, Number, List };

  Term() : kind_(Kind::List) {}

  static Term symbol(std::string text) { return Term(Kind::Symbol, std::move(text), {}); }
  static Term number(std::string text) { return Term(Kind::Number, std::move(text), {}); }
  static Term number(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return number(std::string(buf, end));
  }
  static Term list(std::vector<Term> items) { return Term(Kind::List, {}, std::move(items)); }

  /// Reads an atom from its source text: numeric text becomes a Number.
  static Term atom(std::string text) {
    if (detail::parse_number(text)) return number(std::move(text));
    return symbol(std::move(text));
  }

  Kind kind() const noexcept { return kind_; }
  bool is_symbol() const noexcept { return kind_ == Kind::Symbol; }
  bool is_number() const noexcept { return kind_ == Kind::Number; }
  bool is_list() const noexcept { return kind_ == Kind::List; }
  bool is_atom() const noexcept { return kind_ != Kind::List; }

  /// Logical variables are symbols spelled `?name`.
  bool is_variable() const noexcept { return is_symbol() && text_.size() > 1 && text_.front() == '?'; }

  bool is_ground() const {
    if (is_variable()) return false;
    return std::all_of(items_.begin(), items_.end(), [](const Term& t) { return t.is_ground(); });
  }

  const std::string& text() const noexcept { return text_; }
  double number_value() const { return detail::parse_number(text_).value_or(0.0); }

  const std::vector<Term>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  const Term& operator[](std::size_t i) const { return items_.at(i); }

  bool is_symbol(std::string_view name) const { return is_symbol() && detail::iequals(text_, name); }

  /// True for a list whose first element is the symbol `name`.
  bool has_head(std::string_view name) const { return is_list() && !items_.empty() && items_.front().is_symbol(name); }

  std::string str() const {
    std::string out;
    print(out, false);
    return out;
  }

  /// Case-folded canonical text; equal keys mean equal terms.
  std::string key() const {
    std::string out;
    print(out, true);
    return out;
  }

  friend bool operator==(const Term& a, const Term& b) {
    if (a.kind_ != b.kind_) return false;
    if (a.kind_ == Kind::Symbol) return detail::iequals(a.text_, b.text_);
    if (a.kind_ == Kind::Number) return a.text_ == b.text_;
    return a.items_ == b.items_;
  }

 private:
  Term(Kind kind, std::string text, std::vector<Term> items)
      : kind_(kind), text_(std::move(text)), items_(std::move(items)) {}

  void print(std::string& out, bool fold) const {
    if (kind_ != Kind::List) {
      out += fold && kind_ == Kind::Symbol ? detail::lowercase(text_) : text_;
      return;
    }
    out += '(';
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (i) out += ' ';
      items_[i].print(out, fold);
    }
    out += ')';
  }

  Kind kind_;
  std::string text_;
  std::vector<Term> items_;
};

using Bindings = std::map<std::string, Term>;

/// One-way matching of a pattern (may contain `?vars`) against a ground term.
inline bool unify(const Term& pattern, const Term& ground, Bindings& bindings) {
  if (pattern.is_variable()) {
    auto name = detail::lowercase(pattern.text());
    auto it = bindings.find(name);
    if (it != bindings.end()) return it->second == ground;
    bindings.emplace(std::move(name), ground);
    return true;
  }
  if (pattern.kind() != ground.kind()) return false;
  if (pattern.is_atom()) return pattern == ground;
  if (pattern.size() != ground.size()) return false;
  for (std::size_t i = 0; i < pattern.size(); ++i)
    if (!unify(pattern[i], ground[i], bindings)) return false;
  return true;
}

inline Term substitute(const Term& pattern, const Bindings& bindings) {
  if (pattern.is_variable()) {
    auto it = bindings.find(detail::lowercase(pattern.text()));
    return it == bindings.end() ? pattern : it->second;
  }
  if (pattern.is_atom()) return pattern;
  std::vector<Term> items;
  items.reserve(pattern.size());
  for (const auto& item : pattern.items()) items.push_back(substitute(item, bindings));
  return Term::list(std::move(items));
}

inline void collect_variables(const Term& t, std::vector<std::string>& out) {
  if (t.is_variable()) out.push_back(detail::lowercase(t.text()));
  for (const auto& item : t.items()) collect_variables(item, out);
}

struct SourcePosition {
  std::size_t line = 1;
  std::size_t column = 1;
  std::size_t offset = 0;
};

/// A datum read from source, with the exact text it was read from.
struct ParsedTerm {
  Term term;
  SourcePosition position;
  std::string text;
};

/// Incremental s-expression reader. `;` starts a comment that runs to end of line.
class Reader {
 public:
  explicit Reader(std::string_view source) : src_(source) {}

  /// Next top-level datum, or nullopt at end of input.
  std::optional<ParsedTerm> next() {
    skip_blank();
    if (at_end()) return std::nullopt;
    SourcePosition start = pos_;
    Term t = read();
    return ParsedTerm{std::move(t), start, std::string(src_.substr(start.offset, pos_.offset - start.offset))};
  }

  static std::vector<ParsedTerm> read_all(std::string_view source) {
    Reader r(source);
    std::vector<ParsedTerm> out;
    while (auto t = r.next()) out.push_back(std::move(*t));
    return out;
  }

  /// Parses text that must contain exactly one datum.
  static Term read_one(std::string_view source) {
    Reader r(source);
    auto t = r.next();
    if (!t) throw ParseError("expected an expression", r.pos_.line, r.pos_.column);
    r.skip_blank();
    if (!r.at_end()) throw ParseError("unexpected text after expression", r.pos_.line, r.pos_.column);
    return std::move(t->term);
  }

 private:
  bool at_end() const { return pos_.offset >= src_.size(); }
  char peek() const { return src_[pos_.offset]; }

  void advance() {
    if (peek() == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else {
      ++pos_.column;
    }
    ++pos_.offset;
  }

  void skip_blank() {
    while (!at_end()) {
      char c = peek();
      if (c == ';') {
        while (!at_end() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  static bool delimiter(char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == ';' || c == '"';
  }

  Term read() {
    char c = peek();
    if (c == ')') throw ParseError("unbalanced ')'", pos_.line, pos_.column);
    if (c == '"') throw ParseError("string literals are not supported", pos_.line, pos_.column);
    if (c != '(') {
      std::size_t begin = pos_.offset;
      while (!at_end() && !delimiter(peek())) advance();
      return Term::atom(std::string(src_.substr(begin, pos_.offset - begin)));
    }
    SourcePosition open = pos_;
    advance();
    std::vector<Term> items;
    for (;;) {
      skip_blank();
      if (at_end()) throw ParseError("unterminated list", open.line, open.column);
      if (peek() == ')') {
        advance();
        return Term::list(std::move(items));
      }
      items.push_back(read());
    }
  }

  std::string_view src_;
  SourcePosition pos_;
};

}  // namespace hum
