#pragma once

// Synthetic word-image generation: vertical glyph stacking, seeded noise
// augmentation, and manifest production with deterministic split assignment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <array>
#include <map>
#include <numeric>
#include <numbers>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "manchu_ocr/atlas.hpp"
#include "manchu_ocr/error.hpp"
#include "manchu_ocr/imaging.hpp"
#include "manchu_ocr/raster.hpp"
#include "manchu_ocr/records.hpp"
#include "manchu_ocr/rng.hpp"
#include "manchu_ocr/script.hpp"

namespace manchu_ocr {

class MissingGlyphError : public Error {
 public:
  MissingGlyphError(const std::u32string& token, GlyphForm form, const std::string& font)
      : Error(ErrorKind::MissingGlyph,
              "font '" + font + "' has neither " + to_string(form) + " nor isolated form of '" + utf8::encode(token) + "'"),
        token_(token),
        form_(form) {}

  const std::u32string& token() const noexcept { return token_; }
  GlyphForm form() const noexcept { return form_; }

 private:
  std::u32string token_;
  GlyphForm form_;
};

/// Stacks the word's glyphs top to bottom, each overlapping the previous by
/// `overlap` of its height; ink from overlapping glyphs is combined by
/// taking the darker pixel. Glyphs are centred horizontally.
inline Raster compose_word(const RomanText& word, const TransliterationTable& table, const GlyphAtlas& atlas,
                           double overlap = 0.15) {
  const auto& tokens = word.tokens();
  std::vector<const Raster*> parts;
  parts.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = table.entries().at(tokens[i]).token;
    const auto form = form_for_position(i, tokens.size());
    const Raster* g = atlas.find(tok, form);
    if (!g) g = atlas.find(tok, GlyphForm::Isolated);
    if (!g) throw MissingGlyphError(tok, form, atlas.font_id);
    parts.push_back(g);
  }
  if (parts.size() == 1) return *parts.front();
  int width = 0, height = 0;
  std::vector<int> tops;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    width = std::max(width, parts[i]->width());
    tops.push_back(height);
    const int h = parts[i]->height();
    height += i + 1 == parts.size() ? h : h - static_cast<int>(std::lround(overlap * h));
  }
  Raster out(width, height, 255);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Raster& g = *parts[i];
    const int ox = (width - g.width()) / 2;
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x) {
        auto& px = out.at(ox + x, tops[i] + y);
        px = std::min(px, g.at(x, y));
      }
  }
  return out;
}

struct NoiseParams {
  double salt_pepper_prob = 0.0;
  double gaussian_sigma = 0.0;
  double rotation_degrees_max = 0.0;

  void validate() const {
    if (!(salt_pepper_prob >= 0.0 && salt_pepper_prob <= 1.0))
      throw Error(ErrorKind::Spec, "saltPepperProb must be in [0, 1]");
    if (!(gaussian_sigma >= 0.0)) throw Error(ErrorKind::Spec, "gaussianSigma must be >= 0");
    if (!(rotation_degrees_max >= 0.0 && rotation_degrees_max <= 10.0))
      throw Error(ErrorKind::Spec, "rotationDegreesMax must be in [0, 10]");
  }
};

/// Most frequent border value; used as the fill for rotated-in corners.
inline std::uint8_t border_mode(const Raster& img) {
  std::array<std::size_t, 256> hist{};
  for (int x = 0; x < img.width(); ++x) {
    ++hist[img.at(x, 0)];
    ++hist[img.at(x, img.height() - 1)];
  }
  for (int y = 0; y < img.height(); ++y) {
    ++hist[img.at(0, y)];
    ++hist[img.at(img.width() - 1, y)];
  }
  return static_cast<std::uint8_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
}

/// Rotation about the image centre by `degrees` (counter-clockwise),
/// bilinear, same dimensions, uncovered area filled with `fill`.
inline Raster rotate(const Raster& img, double degrees, std::uint8_t fill) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cx = (img.width() - 1) / 2.0, cy = (img.height() - 1) / 2.0;
  Raster out(img.width(), img.height(), fill);
  auto sample = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return fill;
    return img.at(x, y);
  };
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double dx = x - cx, dy = y - cy;
      const double sx = c * dx - s * dy + cx;
      const double sy = s * dx + c * dy + cy;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      const double v = (sample(x0, y0) * (1 - fx) + sample(x0 + 1, y0) * fx) * (1 - fy) +
                       (sample(x0, y0 + 1) * (1 - fx) + sample(x0 + 1, y0 + 1) * fx) * fy;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  return out;
}

/// Rotation by a uniform angle in +-max, additive Gaussian luminance noise,
/// then salt-and-pepper flips (a selected pixel goes to the opposite
/// extreme: dark -> 255, light -> 0). Each stage draws from `rng` only when
/// its parameter is non-zero.
inline Raster add_noise(const Raster& img, const NoiseParams& p, Rng& rng) {
  p.validate();
  Raster out = img;
  if (p.rotation_degrees_max > 0.0) {
    const double angle = (2.0 * rng.uniform() - 1.0) * p.rotation_degrees_max;
    out = rotate(out, angle, border_mode(img));
  }
  if (p.gaussian_sigma > 0.0) {
    for (auto& px : out.pixels()) {
      const double v = px + p.gaussian_sigma * rng.normal();
      px = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  if (p.salt_pepper_prob > 0.0) {
    for (auto& px : out.pixels())
      if (rng.uniform() < p.salt_pepper_prob) px = px < 128 ? 255 : 0;
  }
  return out;
}

struct GenSpec {
  std::size_t sample_count = 2000;
  std::uint64_t seed = 0;
  NoiseParams noise;
  std::vector<std::string> fonts;  // empty: every supplied atlas
  std::vector<std::pair<std::string, double>> splits{{"train", 0.8}, {"val", 0.2}};
  double glyph_overlap = 0.15;

  void validate() const {
    noise.validate();
    if (sample_count == 0) throw Error(ErrorKind::Spec, "sampleCount must be positive");
    if (splits.empty()) throw Error(ErrorKind::Spec, "at least one split is required");
    double sum = 0;
    for (const auto& [name, f] : splits) {
      if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorKind::Spec, "split '" + name + "' fraction must be in [0, 1]");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::Spec, "split fractions sum to " + std::to_string(sum) + ", not 1");
    if (!(glyph_overlap >= 0.0 && glyph_overlap < 1.0)) throw Error(ErrorKind::Spec, "glyphOverlap must be in [0, 1)");
  }
};

inline GenSpec gen_spec_from_json(const nlohmann::ordered_json& j, std::uint64_t default_seed = 0) {
  GenSpec s;
  s.sample_count = j.value("sampleCount", s.sample_count);
  s.seed = j.value("seed", default_seed);
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    s.noise.salt_pepper_prob = n.value("saltPepperProb", 0.0);
    s.noise.gaussian_sigma = n.value("gaussianSigma", 0.0);
    s.noise.rotation_degrees_max = n.value("rotationDegreesMax", 0.0);
  }
  if (j.contains("fonts")) s.fonts = j.at("fonts").get<std::vector<std::string>>();
  if (j.contains("splits")) {
    s.splits.clear();
    for (const auto& [name, f] : j.at("splits").items()) s.splits.emplace_back(name, f.get<double>());
  }
  s.glyph_overlap = j.value("glyphOverlap", s.glyph_overlap);
  s.validate();
  return s;
}

inline nlohmann::ordered_json to_json(const GenSpec& s) {
  nlohmann::ordered_json splits = nlohmann::ordered_json::object();
  for (const auto& [name, f] : s.splits) splits[name] = f;
  return {{"sampleCount", s.sample_count},
          {"seed", s.seed},
          {"noise", {{"saltPepperProb", s.noise.salt_pepper_prob},
                     {"gaussianSigma", s.noise.gaussian_sigma},
                     {"rotationDegreesMax", s.noise.rotation_degrees_max}}},
          {"fonts", s.fonts},
          {"splits", splits},
          {"glyphOverlap", s.glyph_overlap}};
}

struct Lexicon {
  std::vector<RomanText> words;
  std::string source;
};

/// One romanized word per line; `#` comments and blank lines ignored.
/// Words must be unique and decodable by the table.
inline Lexicon parse_lexicon(std::string_view text, const TransliterationTable& table, std::string source = "inline") {
  Lexicon lex;
  lex.source = std::move(source);
  std::unordered_set<std::u32string> seen;
  int line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = utf8::trim(line);
    if (line.empty()) continue;
    try {
      auto word = RomanText::parse(line, table);
      if (!seen.insert(word.codepoints()).second)
        throw Error(ErrorKind::Spec, "duplicate word '" + word.utf8() + "'");
      lex.words.push_back(std::move(word));
    } catch (const Error& e) {
      throw Error(ErrorKind::Spec, lex.source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (lex.words.empty()) throw Error(ErrorKind::Spec, lex.source + ": lexicon is empty");
  return lex;
}

inline Lexicon load_lexicon(const std::string& path, const TransliterationTable& table) {
  return parse_lexicon(read_file(path), table, path);
}

/// Per-split row counts by largest remainder; ties favour earlier splits.
inline std::vector<std::size_t> split_counts(const std::vector<std::pair<std::string, double>>& splits, std::size_t n) {
  std::vector<std::size_t> counts(splits.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const double exact = splits[i].second * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[i];
    rem.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[rem[k % rem.size()].second];
  return counts;
}

/// Assigns splits by ranking ids on a hash of the id: exact per-split counts,
/// independent of generation order.
inline std::vector<std::string> assign_splits(const std::vector<std::string>& ids,
                                              const std::vector<std::pair<std::string, double>>& splits) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::uint64_t> key(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) key[i] = splitmix64(fnv1a64(ids[i]));
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return key[a] != key[b] ? key[a] < key[b] : ids[a] < ids[b]; });
  const auto counts = split_counts(splits, ids.size());
  std::vector<std::string> out(ids.size());
  std::size_t pos = 0;
  for (std::size_t s = 0; s < splits.size(); ++s)
    for (std::size_t c = 0; c < counts[s]; ++c) out[order[pos++]] = splits[s].first;
  return out;
}

inline std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", index);
  return buf;
}

using SampleSink = std::function<void(const Sample&, const Raster&)>;

/// Draws `sample_count` (word, font) pairs from per-sample seeded streams,
/// composes each word, renders it light-on-dark, applies noise and hands the
/// result to `sink`. Returns the manifest rows in id order.
inline std::vector<Sample> generate(const Lexicon& lexicon, const std::vector<GlyphAtlas>& atlases, const GenSpec& spec,
                                    const TransliterationTable& table, const SampleSink& sink) {
  spec.validate();
  if (lexicon.words.empty()) throw Error(ErrorKind::Spec, "lexicon is empty");
  if (atlases.empty()) throw Error(ErrorKind::Spec, "no glyph atlases supplied");
  std::vector<const GlyphAtlas*> fonts;
  if (spec.fonts.empty()) {
    for (const auto& a : atlases) fonts.push_back(&a);
  } else {
    for (const auto& id : spec.fonts) {
      auto it = std::find_if(atlases.begin(), atlases.end(), [&](const auto& a) { return a.font_id == id; });
      if (it == atlases.end()) throw Error(ErrorKind::Spec, "font '" + id + "' not among supplied atlases");
      fonts.push_back(&*it);
    }
  }
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < spec.sample_count; ++i) ids.push_back(sample_id(i));
  const auto splits = assign_splits(ids, spec.splits);
  std::vector<Sample> rows;
  rows.reserve(spec.sample_count);
  for (std::size_t i = 0; i < spec.sample_count; ++i) {
    Rng rng(derive_seed(spec.seed, i));
    const auto& word = lexicon.words[rng.uniform_int(lexicon.words.size())];
    const GlyphAtlas& font = *fonts[rng.uniform_int(fonts.size())];
    const Raster clean = invert(compose_word(word, table, font, spec.glyph_overlap));
    const Raster noisy = add_noise(clean, spec.noise, rng);
    Sample s;
    s.id = ids[i];
    s.image_path = "images/" + s.id + ".png";
    s.manchu = roman_to_manchu(word, table).utf8();
    s.roman = word.utf8();
    s.font_id = font.font_id;
    s.split = splits[i];
    if (sink) sink(s, noisy);
    rows.push_back(std::move(s));
  }
  return rows;
}

/// A page of vertical word columns, dark ink on white, with the tight ink
/// box of every planted word in reading order.
struct ComposedPage {
  Raster page;
  struct Planted {
    int column;
    int row;
    std::string roman;
    Box box;
  };
  std::vector<Planted> words;
};

struct PageLayout {
  int margin = 40;
  int column_gap = 120;  // blank pixels between adjacent columns
  int word_gap = 400;    // blank pixels between vertically adjacent words
};

inline ComposedPage compose_page(const std::vector<std::vector<RomanText>>& columns, const TransliterationTable& table,
                                 const GlyphAtlas& atlas, const PageLayout& layout, double overlap = 0.15) {
  std::vector<std::vector<Raster>> images;
  int col_width = 0;
  int page_height = 0;
  for (const auto& col : columns) {
    images.emplace_back();
    int h = 0;
    for (std::size_t r = 0; r < col.size(); ++r) {
      images.back().push_back(compose_word(col[r], table, atlas, overlap));
      col_width = std::max(col_width, images.back().back().width());
      h += images.back().back().height() + (r ? layout.word_gap : 0);
    }
    page_height = std::max(page_height, h);
  }
  const int ncol = static_cast<int>(columns.size());
  ComposedPage out;
  out.page = Raster(2 * layout.margin + ncol * col_width + std::max(0, ncol - 1) * layout.column_gap,
                    2 * layout.margin + std::max(1, page_height), 255);
  for (int c = 0; c < ncol; ++c) {
    int y = layout.margin;
    const int x_col = layout.margin + c * (col_width + layout.column_gap);
    for (std::size_t r = 0; r < images[static_cast<std::size_t>(c)].size(); ++r) {
      const Raster& w = images[static_cast<std::size_t>(c)][r];
      const int x = x_col + (col_width - w.width()) / 2;
      for (int yy = 0; yy < w.height(); ++yy)
        for (int xx = 0; xx < w.width(); ++xx) out.page.at(x + xx, y + yy) = w.at(xx, yy);
      auto ink = ink_bounds(w).value_or(Box{0, 0, w.width(), w.height()});
      out.words.push_back({c, static_cast<int>(r), columns[static_cast<std::size_t>(c)][r].utf8(),
                           Box{x + ink.x, y + ink.y, ink.w, ink.h}});
      y += w.height() + layout.word_gap;
    }
  }
  return out;
}

}  // namespace manchu_ocr
