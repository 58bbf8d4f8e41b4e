#pragma once

// Manchu text in its two scripts and table-driven conversion between the
// Mongolian-block encoding and modified Moellendorff romanization.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "manchu_ocr/error.hpp"
#include "manchu_ocr/utf8.hpp"

namespace manchu_ocr {

/// Codepoints accepted in Manchu-script text: the Unicode Mongolian block.
inline bool is_manchu_script(char32_t cp) { return cp >= 0x1800 && cp <= 0x18AF; }

class TransliterationTable {
 public:
  struct Entry {
    std::u32string token;   // canonical uppercase roman token, e.g. U"NG"
    std::u32string glyphs;  // Mongolian-block codepoints
    int line = 0;           // source line, 0 when built in code
  };

  TransliterationTable() = default;

  TransliterationTable(std::vector<Entry> entries, std::string version)
      : entries_(std::move(entries)), version_(std::move(version)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      by_token_.try_emplace(e.token, i);
      by_glyphs_.try_emplace(e.glyphs, i);
      max_token_len_ = std::max(max_token_len_, e.token.size());
      max_glyph_len_ = std::max(max_glyph_len_, e.glyphs.size());
    }
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const std::string& version() const noexcept { return version_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Index of the longest token matching `text` at `pos`, or -1.
  std::ptrdiff_t match_token(std::u32string_view text, std::size_t pos) const {
    return longest_match(by_token_, max_token_len_, text, pos);
  }

  /// Index of the longest glyph sequence matching `text` at `pos`, or -1.
  std::ptrdiff_t match_glyphs(std::u32string_view text, std::size_t pos) const {
    return longest_match(by_glyphs_, max_glyph_len_, text, pos);
  }

  std::ptrdiff_t find_token(std::u32string_view token) const {
    auto it = by_token_.find(std::u32string(token));
    return it == by_token_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
  }

 private:
  using Index = std::unordered_map<std::u32string, std::size_t>;

  static std::ptrdiff_t longest_match(const Index& index, std::size_t max_len, std::u32string_view text,
                                      std::size_t pos) {
    const std::size_t avail = text.size() - pos;
    for (std::size_t len = std::min(max_len, avail); len > 0; --len) {
      auto it = index.find(std::u32string(text.substr(pos, len)));
      if (it != index.end()) return static_cast<std::ptrdiff_t>(it->second);
    }
    return -1;
  }

  std::vector<Entry> entries_;
  std::string version_;
  Index by_token_;
  Index by_glyphs_;
  std::size_t max_token_len_ = 0;
  std::size_t max_glyph_len_ = 0;
};

/// Non-empty Manchu-script string restricted to the Mongolian block.
class ManchuText {
 public:
  static ManchuText from_codepoints(std::u32string cps) {
    if (cps.empty()) throw Error(ErrorKind::InvalidText, "empty Manchu text");
    for (std::size_t i = 0; i < cps.size(); ++i) {
      if (!is_manchu_script(cps[i]))
        throw PositionError(ErrorKind::InvalidText, i, "codepoint outside the Manchu script set");
    }
    ManchuText t;
    t.codepoints_ = std::move(cps);
    return t;
  }

  static ManchuText from_utf8(std::string_view text) { return from_codepoints(utf8::decode(text)); }

  const std::u32string& codepoints() const noexcept { return codepoints_; }
  std::string utf8() const { return utf8::encode(codepoints_); }
  std::size_t size() const noexcept { return codepoints_.size(); }

  friend bool operator==(const ManchuText&, const ManchuText&) = default;

 private:
  ManchuText() = default;
  std::u32string codepoints_;
};

/// Romanized word tokenized against a table; always canonical uppercase.
class RomanText {
 public:
  /// Canonicalizes case and tokenizes by greedy longest match. Throws
  /// UnknownToken with the codepoint position where no entry matches.
  static RomanText parse(std::string_view text, const TransliterationTable& table) {
    const auto cps = utf8::to_upper_latin(utf8::decode(text));
    if (cps.empty()) throw Error(ErrorKind::InvalidText, "empty roman text");
    RomanText r;
    std::size_t pos = 0;
    while (pos < cps.size()) {
      const auto idx = table.match_token(cps, pos);
      if (idx < 0) throw PositionError(ErrorKind::UnknownToken, pos, "no romanization token matches");
      r.tokens_.push_back(static_cast<std::size_t>(idx));
      pos += table.entries()[static_cast<std::size_t>(idx)].token.size();
    }
    r.text_ = cps;
    return r;
  }

  /// Token indices into the table the text was parsed against.
  const std::vector<std::size_t>& tokens() const noexcept { return tokens_; }
  const std::u32string& codepoints() const noexcept { return text_; }
  std::string utf8() const { return utf8::encode(text_); }

  friend bool operator==(const RomanText& a, const RomanText& b) { return a.text_ == b.text_; }

 private:
  friend RomanText manchu_to_roman(const ManchuText&, const TransliterationTable&);
  RomanText() = default;
  std::u32string text_;
  std::vector<std::size_t> tokens_;
};

inline ManchuText roman_to_manchu(const RomanText& text, const TransliterationTable& table) {
  std::u32string out;
  for (auto idx : text.tokens()) out += table.entries().at(idx).glyphs;
  return ManchuText::from_codepoints(std::move(out));
}

inline ManchuText roman_to_manchu(std::string_view text, const TransliterationTable& table) {
  return roman_to_manchu(RomanText::parse(text, table), table);
}

/// Greedy longest match over codepoints; throws UnknownGlyph with the
/// codepoint position of the first undecodable glyph.
inline RomanText manchu_to_roman(const ManchuText& text, const TransliterationTable& table) {
  const auto& cps = text.codepoints();
  RomanText r;
  std::size_t pos = 0;
  while (pos < cps.size()) {
    const auto idx = table.match_glyphs(cps, pos);
    if (idx < 0) throw PositionError(ErrorKind::UnknownGlyph, pos, "no table entry for glyph");
    const auto& e = table.entries()[static_cast<std::size_t>(idx)];
    r.tokens_.push_back(static_cast<std::size_t>(idx));
    r.text_ += e.token;
    pos += e.glyphs.size();
  }
  return r;
}

inline RomanText manchu_to_roman(std::string_view text, const TransliterationTable& table) {
  return manchu_to_roman(ManchuText::from_utf8(text), table);
}

struct TableViolation {
  enum class Kind { DuplicateToken, AmbiguousGlyph, EmptyToken, EmptyGlyphs, NonCanonicalToken, GlyphOutsideScript };
  Kind kind;
  std::size_t entry;        // index of the offending (later) entry
  std::size_t other_entry;  // index of the entry it collides with, or same as entry
  std::string message;
};

inline const char* to_string(TableViolation::Kind k) {
  using K = TableViolation::Kind;
  switch (k) {
    case K::DuplicateToken: return "DuplicateToken";
    case K::AmbiguousGlyph: return "AmbiguousGlyph";
    case K::EmptyToken: return "EmptyToken";
    case K::EmptyGlyphs: return "EmptyGlyphs";
    case K::NonCanonicalToken: return "NonCanonicalToken";
    case K::GlyphOutsideScript: return "GlyphOutsideScript";
  }
  return "?";
}

/// Checks token uniqueness and token-level bijectivity. An empty result
/// means the table round-trips.
inline std::vector<TableViolation> validate_table(const TransliterationTable& table) {
  using K = TableViolation::Kind;
  std::vector<TableViolation> out;
  std::unordered_map<std::u32string, std::size_t> tokens, glyphs;
  const auto& es = table.entries();
  auto describe = [&](std::size_t i) {
    return "'" + utf8::encode(es[i].token) + "' (entry " + std::to_string(i) +
           (es[i].line ? ", line " + std::to_string(es[i].line) : std::string()) + ")";
  };
  for (std::size_t i = 0; i < es.size(); ++i) {
    const auto& e = es[i];
    if (e.token.empty()) out.push_back({K::EmptyToken, i, i, "empty token in entry " + std::to_string(i)});
    if (e.glyphs.empty()) out.push_back({K::EmptyGlyphs, i, i, "no codepoints for " + describe(i)});
    if (utf8::to_upper_latin(e.token) != e.token)
      out.push_back({K::NonCanonicalToken, i, i, "token not uppercase: " + describe(i)});
    if (std::any_of(e.glyphs.begin(), e.glyphs.end(), [](char32_t c) { return !is_manchu_script(c); }))
      out.push_back({K::GlyphOutsideScript, i, i, "codepoint outside script set in " + describe(i)});
    if (auto [it, fresh] = tokens.try_emplace(e.token, i); !fresh && !e.token.empty())
      out.push_back({K::DuplicateToken, i, it->second, "duplicate token " + describe(i) + " first seen at " + describe(it->second)});
    if (auto [it, fresh] = glyphs.try_emplace(e.glyphs, i); !fresh && !e.glyphs.empty())
      out.push_back({K::AmbiguousGlyph, i, it->second, describe(i) + " shares its codepoints with " + describe(it->second)});
  }
  return out;
}

/// Parses `TOKEN<TAB>U+XXXX[,U+XXXX...]` lines. `#` starts a comment; a
/// `# version: <id>` comment sets the table version.
inline TransliterationTable parse_table(std::string_view text, std::string default_version = "unversioned") {
  std::vector<TransliterationTable::Entry> entries;
  std::string version = std::move(default_version);
  int line_no = 0;
  std::size_t start = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::TableFormat, "line " + std::to_string(line_no) + ": " + msg);
  };
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      auto comment = utf8::trim(line.substr(hash + 1));
      constexpr std::string_view key = "version:";
      if (comment.substr(0, key.size()) == key) version = std::string(utf8::trim(comment.substr(key.size())));
      line = line.substr(0, hash);
    }
    if (utf8::trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) fail("expected TOKEN<TAB>codepoints");
    const auto token_raw = utf8::trim(line.substr(0, tab));
    if (token_raw.empty()) fail("empty token");
    TransliterationTable::Entry e;
    try {
      e.token = utf8::to_upper_latin(utf8::decode(token_raw));
    } catch (const Error& err) {
      fail(err.what());
    }
    auto rest = utf8::trim(line.substr(tab + 1));
    if (rest.empty()) fail("missing codepoints");
    while (!rest.empty()) {
      auto comma = rest.find(',');
      auto item = utf8::trim(rest.substr(0, comma));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      if (item.size() < 3 || (item[0] != 'U' && item[0] != 'u') || item[1] != '+') fail("expected U+XXXX, got '" + std::string(item) + "'");
      auto hex = item.substr(2);
      if (hex.size() < 4 || hex.size() > 6) fail("bad codepoint width in '" + std::string(item) + "'");
      std::uint32_t cp = 0;
      for (char c : hex) {
        int v = (c >= '0' && c <= '9') ? c - '0' : (c >= 'A' && c <= 'F') ? c - 'A' + 10 : (c >= 'a' && c <= 'f') ? c - 'a' + 10 : -1;
        if (v < 0) fail("bad hex digit in '" + std::string(item) + "'");
        cp = cp * 16 + static_cast<std::uint32_t>(v);
      }
      if (!is_manchu_script(cp)) fail("codepoint " + std::string(item) + " outside the Manchu script set");
      e.glyphs.push_back(cp);
    }
    e.line = line_no;
    entries.push_back(std::move(e));
    if (end == text.size()) break;
  }
  if (entries.empty()) throw Error(ErrorKind::TableFormat, "table has no entries");
  return TransliterationTable(std::move(entries), std::move(version));
}

inline TransliterationTable load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open table " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_table(ss.str());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::TableFormat) throw Error(ErrorKind::TableFormat, path + ": " + e.what());
    throw;
  }
}

}  // namespace manchu_ocr
