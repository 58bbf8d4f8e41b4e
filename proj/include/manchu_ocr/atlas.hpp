#pragma once

// Per-letter glyph rasters keyed by positional form, plus the machine-drawn
// demonstration atlases bundled with the toolkit.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "manchu_ocr/error.hpp"
#include "manchu_ocr/fileio.hpp"
#include "manchu_ocr/png_io.hpp"
#include "manchu_ocr/raster.hpp"
#include "manchu_ocr/script.hpp"

namespace manchu_ocr {

enum class GlyphForm { Isolated, Initial, Medial, Final };

inline const char* to_string(GlyphForm f) {
  switch (f) {
    case GlyphForm::Isolated: return "isolated";
    case GlyphForm::Initial: return "initial";
    case GlyphForm::Medial: return "medial";
    case GlyphForm::Final: return "final";
  }
  return "?";
}

inline GlyphForm parse_glyph_form(std::string_view s) {
  if (s == "isolated") return GlyphForm::Isolated;
  if (s == "initial") return GlyphForm::Initial;
  if (s == "medial") return GlyphForm::Medial;
  if (s == "final") return GlyphForm::Final;
  throw Error(ErrorKind::BadConfig, "unknown glyph form '" + std::string(s) + "'");
}

/// Positional form of the token at `index` in a word of `count` tokens.
inline GlyphForm form_for_position(std::size_t index, std::size_t count) {
  if (count == 1) return GlyphForm::Isolated;
  if (index == 0) return GlyphForm::Initial;
  if (index + 1 == count) return GlyphForm::Final;
  return GlyphForm::Medial;
}

/// Glyphs are dark ink (0) on white (255).
struct GlyphAtlas {
  std::string font_id;
  std::map<std::pair<std::u32string, GlyphForm>, Raster> glyphs;

  const Raster* find(const std::u32string& token, GlyphForm form) const {
    auto it = glyphs.find({token, form});
    return it == glyphs.end() ? nullptr : &it->second;
  }
};

/// Problems that make an atlas unusable with a table: tokens without an
/// isolated form, and glyph widths more than 20% off the median width.
inline std::vector<std::string> validate_atlas(const GlyphAtlas& atlas, const TransliterationTable& table) {
  std::vector<std::string> out;
  for (const auto& e : table.entries())
    if (!atlas.find(e.token, GlyphForm::Isolated))
      out.push_back("font '" + atlas.font_id + "' has no isolated glyph for '" + utf8::encode(e.token) + "'");
  std::vector<int> widths;
  for (const auto& [key, r] : atlas.glyphs) widths.push_back(r.width());
  if (widths.empty()) {
    out.push_back("font '" + atlas.font_id + "' has no glyphs");
    return out;
  }
  std::nth_element(widths.begin(), widths.begin() + static_cast<std::ptrdiff_t>(widths.size() / 2), widths.end());
  const double median = widths[widths.size() / 2];
  for (const auto& [key, r] : atlas.glyphs)
    if (std::abs(r.width() - median) > 0.2 * median)
      out.push_back("glyph '" + utf8::encode(key.first) + "_" + to_string(key.second) + "' width " +
                    std::to_string(r.width()) + " outside the font's width class");
  return out;
}

// File names use the token's codepoints in hex so they stay shell-safe
// (tokens contain apostrophes and non-ASCII letters).
inline std::string glyph_file_name(const std::u32string& token, GlyphForm form) {
  std::string name;
  for (char32_t c : token) {
    char buf[12];
    std::snprintf(buf, sizeof buf, "%s%04X", name.empty() ? "" : "-", static_cast<unsigned>(c));
    name += buf;
  }
  return name + "_" + to_string(form) + ".png";
}

/// Writes `<token codepoints>_<form>.png` files and an `atlas.json` index.
inline void save_atlas(const GlyphAtlas& atlas, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json index;
  index["fontId"] = atlas.font_id;
  index["glyphs"] = nlohmann::ordered_json::array();
  for (const auto& [key, raster] : atlas.glyphs) {
    const auto file = glyph_file_name(key.first, key.second);
    write_png(dir + "/" + file, raster);
    index["glyphs"].push_back({{"token", utf8::encode(key.first)}, {"form", to_string(key.second)}, {"file", file}});
  }
  write_file_atomic(dir + "/atlas.json", index.dump(2) + "\n");
}

inline GlyphAtlas load_atlas(const std::string& dir) {
  const auto index_path = dir + "/atlas.json";
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_file(index_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, index_path + ": " + e.what());
  }
  GlyphAtlas atlas;
  atlas.font_id = index.value("fontId", std::filesystem::path(dir).filename().string());
  for (const auto& g : index.at("glyphs")) {
    const auto token = utf8::to_upper_latin(utf8::decode(g.at("token").get<std::string>()));
    const auto form = parse_glyph_form(g.at("form").get<std::string>());
    atlas.glyphs[{token, form}] = read_png(dir + "/" + g.at("file").get<std::string>());
  }
  return atlas;
}

/// Stroke parameters of a bundled demonstration font.
struct DemoFontStyle {
  std::string font_id;
  int width;
  int height;
  int stem_width;
  int bar_height;
  int bar_margin;  // gap between bar end and glyph edge
};

inline std::vector<DemoFontStyle> demo_font_styles() {
  return {{"demo-a", 28, 24, 4, 5, 2}, {"demo-b", 32, 24, 3, 4, 4}};
}

namespace detail {

inline void fill_rect(Raster& r, int x0, int y0, int x1, int y1) {
  for (int y = std::max(0, y0); y < std::min(r.height(), y1); ++y)
    for (int x = std::max(0, x0); x < std::min(r.width(), x1); ++x) r.at(x, y) = 0;
}

// Nonzero 6-bit codes with even parity: 31 codes at pairwise Hamming
// distance >= 2.
inline std::vector<unsigned> even_parity_codes() {
  std::vector<unsigned> out;
  for (unsigned c = 1; c < 64; ++c)
    if (__builtin_popcount(c) % 2 == 0) out.push_back(c);
  return out;
}

}  // namespace detail

/// Draws one demonstration glyph. Every glyph is a full-height central stem
/// (so stacked letters join into one connected word) carrying bars on a
/// 2 x 3 grid whose pattern identifies the token. Initial forms add a crown
/// at the top right, final forms a tail at the bottom left; isolated forms
/// carry both.
inline Raster draw_demo_glyph(const DemoFontStyle& s, unsigned code, GlyphForm form) {
  Raster g(s.width, s.height, 255);
  const int cx = s.width / 2;
  const int stem_l = cx - s.stem_width / 2;
  const int stem_r = stem_l + s.stem_width;
  detail::fill_rect(g, stem_l, 0, stem_r, s.height);
  const int row_pitch = 6;
  const int row_top = 3 + (5 - s.bar_height);
  for (int row = 0; row < 3; ++row) {
    const int y0 = row_top + row * row_pitch;
    if (code & (1u << row)) detail::fill_rect(g, s.bar_margin, y0, stem_l, y0 + s.bar_height);
    if (code & (1u << (row + 3))) detail::fill_rect(g, stem_r, y0, s.width - s.bar_margin, y0 + s.bar_height);
  }
  const bool crown = form == GlyphForm::Initial || form == GlyphForm::Isolated;
  const bool tail = form == GlyphForm::Final || form == GlyphForm::Isolated;
  if (crown) detail::fill_rect(g, stem_r, 0, std::min(s.width, stem_r + 7), 2);
  if (tail) detail::fill_rect(g, std::max(0, stem_l - 8), s.height - 2, stem_l, s.height);
  return g;
}

/// Machine-drawn atlas covering every table token in all four forms.
inline GlyphAtlas make_demo_atlas(const TransliterationTable& table, const DemoFontStyle& style) {
  const auto codes = detail::even_parity_codes();
  if (table.size() > codes.size())
    throw Error(ErrorKind::Spec, "demo atlas supports at most " + std::to_string(codes.size()) + " tokens");
  GlyphAtlas atlas;
  atlas.font_id = style.font_id;
  for (std::size_t i = 0; i < table.size(); ++i)
    for (auto form : {GlyphForm::Isolated, GlyphForm::Initial, GlyphForm::Medial, GlyphForm::Final})
      atlas.glyphs[{table.entries()[i].token, form}] = draw_demo_glyph(style, codes[i], form);
  return atlas;
}

}  // namespace manchu_ocr
