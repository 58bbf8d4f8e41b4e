#pragma once

// Word extraction from scanned pages of vertical script: binarize, denoise,
// isolate ink components, cluster them into columns and merge vertically
// adjacent components into words, emitted in reading order.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "manchu_ocr/error.hpp"
#include "manchu_ocr/imaging.hpp"
#include "manchu_ocr/raster.hpp"

namespace manchu_ocr {

struct Component {
  Box box;
  long long area = 0;
  double centroid_x = 0;
  double centroid_y = 0;
};

struct WordBox {
  Box box;
  int column_index = 0;
  int order_in_column = 0;
  std::vector<Component> members;
};

struct SegmentConfig {
  int min_component_area = 20;
  double column_gap_factor = 1.5;
  double word_gap_factor = 1.0;
  int padding = 4;
  int median_window = 3;

  void validate() const {
    if (min_component_area < 1) throw Error(ErrorKind::BadConfig, "segment minComponentArea must be >= 1");
    if (!(column_gap_factor > 0) || !(word_gap_factor > 0))
      throw Error(ErrorKind::BadConfig, "segment gap factors must be > 0");
    if (padding < 0) throw Error(ErrorKind::BadConfig, "segment padding must be >= 0");
    if (median_window < 1 || median_window % 2 == 0)
      throw Error(ErrorKind::BadConfig, "segment medianWindow must be odd and >= 1");
  }
};

inline SegmentConfig segment_config_from_json(const nlohmann::json& j) {
  SegmentConfig c;
  c.min_component_area = j.value("minComponentArea", c.min_component_area);
  c.column_gap_factor = j.value("columnGapFactor", c.column_gap_factor);
  c.word_gap_factor = j.value("wordGapFactor", c.word_gap_factor);
  c.padding = j.value("padding", c.padding);
  c.median_window = j.value("medianWindow", c.median_window);
  c.validate();
  return c;
}

inline nlohmann::ordered_json to_json(const SegmentConfig& c) {
  return {{"minComponentArea", c.min_component_area}, {"columnGapFactor", c.column_gap_factor},
          {"wordGapFactor", c.word_gap_factor}, {"padding", c.padding}, {"medianWindow", c.median_window}};
}

/// 8-connected components of the ink class (0) with area >= min_area,
/// sorted by box x, then box y, then area.
inline std::vector<Component> find_components(const Raster& binary, int min_area) {
  for (auto p : binary.pixels())
    if (p != 0 && p != 255) throw Error(ErrorKind::NotBinary, "component search needs a {0,255} image");
  const int w = binary.width(), h = binary.height();
  std::vector<int> label(binary.size(), -1);
  std::vector<Component> out;
  std::vector<int> stack;
  int next = 0;
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      const auto start = static_cast<std::size_t>(y0) * w + x0;
      if (binary.pixels()[start] != 0 || label[start] >= 0) continue;
      int l = x0, r = x0, t = y0, b = y0;
      long long area = 0;
      double sx = 0, sy = 0;
      label[start] = next;
      stack.assign(1, static_cast<int>(start));
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int x = idx % w, y = idx / w;
        ++area;
        sx += x;
        sy += y;
        l = std::min(l, x);
        r = std::max(r, x);
        t = std::min(t, y);
        b = std::max(b, y);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const auto n = static_cast<std::size_t>(ny) * w + nx;
            if (binary.pixels()[n] == 0 && label[n] < 0) {
              label[n] = next;
              stack.push_back(static_cast<int>(n));
            }
          }
      }
      ++next;
      if (area >= min_area)
        out.push_back({Box{l, t, r - l + 1, b - t + 1}, area, sx / static_cast<double>(area), sy / static_cast<double>(area)});
    }
  std::sort(out.begin(), out.end(), [](const Component& a, const Component& b) {
    if (a.box.x != b.box.x) return a.box.x < b.box.x;
    if (a.box.y != b.box.y) return a.box.y < b.box.y;
    return a.area < b.area;
  });
  return out;
}

namespace detail {

// Lower median for even counts.
template <class F>
double median_of(const std::vector<Component>& cs, F f) {
  std::vector<double> v;
  v.reserve(cs.size());
  for (const auto& c : cs) v.push_back(f(c));
  std::sort(v.begin(), v.end());
  return v.empty() ? 0.0 : v[(v.size() - 1) / 2];
}

}  // namespace detail

/// 1-D clustering of x-centroids: a new column starts where the gap between
/// successive centroids exceeds column_gap_factor x median component width.
/// Columns are returned left to right.
inline std::vector<std::vector<Component>> cluster_columns(std::vector<Component> components, const SegmentConfig& cfg) {
  std::vector<std::vector<Component>> columns;
  if (components.empty()) return columns;
  std::sort(components.begin(), components.end(), [](const Component& a, const Component& b) {
    if (a.centroid_x != b.centroid_x) return a.centroid_x < b.centroid_x;
    if (a.centroid_y != b.centroid_y) return a.centroid_y < b.centroid_y;
    return a.box.x != b.box.x ? a.box.x < b.box.x : a.box.y < b.box.y;
  });
  const double threshold = cfg.column_gap_factor * detail::median_of(components, [](const Component& c) { return c.box.w; });
  columns.emplace_back();
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (i > 0 && components[i].centroid_x - components[i - 1].centroid_x > threshold) columns.emplace_back();
    columns.back().push_back(components[i]);
  }
  return columns;
}

/// Sorts a column top to bottom and merges successive components while the
/// vertical gap to the growing word is <= word_gap_factor x median height.
inline std::vector<WordBox> merge_words(std::vector<Component> column, const SegmentConfig& cfg, int column_index = 0) {
  std::vector<WordBox> words;
  if (column.empty()) return words;
  std::sort(column.begin(), column.end(), [](const Component& a, const Component& b) {
    return a.box.y != b.box.y ? a.box.y < b.box.y : a.box.x < b.box.x;
  });
  const double threshold = cfg.word_gap_factor * detail::median_of(column, [](const Component& c) { return c.box.h; });
  for (const auto& c : column) {
    if (!words.empty() && c.box.y - words.back().box.bottom() <= threshold) {
      words.back().box = words.back().box.united(c.box);
      words.back().members.push_back(c);
      continue;
    }
    WordBox wb;
    wb.box = c.box;
    wb.column_index = column_index;
    wb.order_in_column = static_cast<int>(words.size());
    wb.members.push_back(c);
    words.push_back(std::move(wb));
  }
  return words;
}

struct SegmentResult {
  std::vector<WordBox> words;  // reading order
  std::vector<Raster> crops;   // preprocessed, parallel to `words`
  bool inverted_input = false;
};

inline double mean_luminance(const Raster& img) {
  double s = 0;
  for (auto p : img.pixels()) s += p;
  return s / static_cast<double>(img.size());
}

/// Full page pipeline. Light-ink pages (mean < 128) are inverted first.
/// Crops are cut from the polarity-normalized page with `padding` and
/// then preprocessed (without inversion) to match synthetic inputs.
inline SegmentResult segment_page(const Raster& page, const SegmentConfig& cfg, PreprocessConfig prep = {}) {
  cfg.validate();
  SegmentResult res;
  res.inverted_input = mean_luminance(page) < 128.0;
  const Raster gray = res.inverted_input ? invert(page) : page;
  Raster binary = otsu_binarize(gray);
  if (cfg.median_window <= std::min(binary.width(), binary.height())) binary = median_denoise(binary, cfg.median_window);
  auto components = find_components(binary, cfg.min_component_area);
  if (components.empty()) throw Error(ErrorKind::EmptyPage, "no ink components survived filtering");
  const auto columns = cluster_columns(std::move(components), cfg);
  prep.invert = false;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (auto& w : merge_words(columns[c], cfg, static_cast<int>(c))) {
      const Box& b = w.box;
      Raster crop = gray.crop(b.x - cfg.padding, b.y - cfg.padding, b.w + 2 * cfg.padding, b.h + 2 * cfg.padding, 255);
      res.crops.push_back(preprocess(crop, prep));
      res.words.push_back(std::move(w));
    }
  }
  return res;
}

inline nlohmann::ordered_json layout_to_json(const SegmentResult& r, int padding) {
  nlohmann::ordered_json words = nlohmann::ordered_json::array();
  for (const auto& w : r.words) {
    nlohmann::ordered_json members = nlohmann::ordered_json::array();
    for (const auto& m : w.members) members.push_back({m.box.x, m.box.y, m.box.w, m.box.h});
    words.push_back({{"file", "col" + std::to_string(w.column_index) + "_word" + std::to_string(w.order_in_column) + ".png"},
                     {"column", w.column_index},
                     {"order", w.order_in_column},
                     {"box", {w.box.x, w.box.y, w.box.w, w.box.h}},
                     {"cropBox", {w.box.x - padding, w.box.y - padding, w.box.w + 2 * padding, w.box.h + 2 * padding}},
                     {"components", members}});
  }
  return {{"invertedInput", r.inverted_input}, {"words", words}};
}

}  // namespace manchu_ocr
