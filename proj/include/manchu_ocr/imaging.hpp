#pragma once

// Word-image preprocessing: inversion, median denoising, percentile contrast
// stretch, Otsu binarization and aspect-preserving size normalization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "manchu_ocr/error.hpp"
#include "manchu_ocr/raster.hpp"

namespace manchu_ocr {

struct PreprocessConfig {
  int target_width = 64;
  int target_height = 480;
  int median_window = 3;
  double contrast_low_pct = 1.0;
  double contrast_high_pct = 99.0;
  bool invert = true;

  void validate() const {
    if (target_width < 8 || target_height < 8)
      throw Error(ErrorKind::BadConfig, "preprocess target dimensions must be >= 8");
    if (median_window < 1 || median_window % 2 == 0)
      throw Error(ErrorKind::BadConfig, "preprocess medianWindow must be odd and >= 1");
    if (!(contrast_low_pct >= 0.0 && contrast_low_pct < contrast_high_pct && contrast_high_pct <= 100.0))
      throw Error(ErrorKind::BadConfig, "preprocess percentiles must satisfy 0 <= low < high <= 100");
  }
};

inline PreprocessConfig preprocess_config_from_json(const nlohmann::json& j) {
  PreprocessConfig c;
  c.target_width = j.value("targetWidth", c.target_width);
  c.target_height = j.value("targetHeight", c.target_height);
  c.median_window = j.value("medianWindow", c.median_window);
  c.contrast_low_pct = j.value("contrastLowPct", c.contrast_low_pct);
  c.contrast_high_pct = j.value("contrastHighPct", c.contrast_high_pct);
  c.invert = j.value("invert", c.invert);
  c.validate();
  return c;
}

inline nlohmann::ordered_json to_json(const PreprocessConfig& c) {
  return {{"targetWidth", c.target_width}, {"targetHeight", c.target_height},
          {"medianWindow", c.median_window}, {"contrastLowPct", c.contrast_low_pct},
          {"contrastHighPct", c.contrast_high_pct}, {"invert", c.invert}};
}

inline Raster invert(const Raster& img) {
  Raster out = img;
  for (auto& p : out.pixels()) p = static_cast<std::uint8_t>(255 - p);
  return out;
}

/// Median over a window x window neighbourhood with edge clamping.
inline Raster median_denoise(const Raster& img, int window) {
  if (window < 1 || window % 2 == 0 || window > std::min(img.width(), img.height()))
    throw Error(ErrorKind::BadWindow, "median window " + std::to_string(window) + " must be odd and fit in " +
                                          std::to_string(img.width()) + "x" + std::to_string(img.height()));
  if (window == 1) return img;
  const int r = window / 2;
  Raster out(img.width(), img.height());
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(window) * window);
  const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::size_t k = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) buf[k++] = img.clamped(x + dx, y + dy);
      std::nth_element(buf.begin(), mid, buf.end());
      out.at(x, y) = *mid;
    }
  }
  return out;
}

inline std::array<std::size_t, 256> histogram(const Raster& img) {
  std::array<std::size_t, 256> h{};
  for (auto p : img.pixels()) ++h[p];
  return h;
}

/// Nearest-rank percentile: the smallest level whose cumulative count
/// reaches ceil(pct/100 * N), with rank clamped to [1, N].
inline int percentile_level(const std::array<std::size_t, 256>& hist, std::size_t total, double pct) {
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(total)));
  rank = std::clamp<std::size_t>(rank, 1, total);
  std::size_t cum = 0;
  for (int v = 0; v < 256; ++v) {
    cum += hist[static_cast<std::size_t>(v)];
    if (cum >= rank) return v;
  }
  return 255;
}

/// Linear map sending the low percentile to 0 and the high percentile to
/// 255, clamped. Identity when the two percentiles coincide.
inline Raster contrast_stretch(const Raster& img, double low_pct, double high_pct) {
  const auto hist = histogram(img);
  const int lo = percentile_level(hist, img.size(), low_pct);
  const int hi = percentile_level(hist, img.size(), high_pct);
  if (hi <= lo) return img;
  std::array<std::uint8_t, 256> lut{};
  const int span = hi - lo;
  for (int v = 0; v < 256; ++v) {
    if (v <= lo) {
      lut[static_cast<std::size_t>(v)] = 0;
    } else if (v >= hi) {
      lut[static_cast<std::size_t>(v)] = 255;
    } else {
      lut[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(((v - lo) * 255 + span / 2) / span);
    }
  }
  Raster out = img;
  for (auto& p : out.pixels()) p = lut[p];
  return out;
}

/// Otsu threshold: the lowest level t maximizing between-class variance for
/// the split {<= t} / {> t}. Empty when the image has a single level.
inline std::optional<int> otsu_threshold(const Raster& img) {
  const auto hist = histogram(img);
  const double total = static_cast<double>(img.size());
  double sum_all = 0;
  for (int v = 0; v < 256; ++v) sum_all += v * static_cast<double>(hist[static_cast<std::size_t>(v)]);
  double n0 = 0, s0 = 0, best = -1;
  std::optional<int> best_t;
  for (int t = 0; t < 255; ++t) {
    n0 += static_cast<double>(hist[static_cast<std::size_t>(t)]);
    s0 += t * static_cast<double>(hist[static_cast<std::size_t>(t)]);
    const double n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    // w0 w1 (mu0 - mu1)^2 up to the constant factor 1/N^2
    const double d = total * s0 - n0 * sum_all;
    const double var = d * d / (n0 * n1);
    if (var > best) {
      best = var;
      best_t = t;
    }
  }
  return best_t;
}

/// Pixels at or below the Otsu threshold become 0 (ink), the rest 255. A
/// single-level image maps wholly to whichever extreme is nearer.
inline Raster otsu_binarize(const Raster& img) {
  const auto t = otsu_threshold(img);
  Raster out = img;
  if (!t) {
    const std::uint8_t v = img.pixels()[0] < 128 ? 0 : 255;
    for (auto& p : out.pixels()) p = v;
    return out;
  }
  for (auto& p : out.pixels()) p = p <= *t ? 0 : 255;
  return out;
}

inline Raster binarize(const Raster& img, int threshold) {
  Raster out = img;
  for (auto& p : out.pixels()) p = p <= threshold ? 0 : 255;
  return out;
}

/// Bilinear resampling with pixel-centre alignment and clamped edges.
inline Raster resize_bilinear(const Raster& img, int width, int height) {
  if (width == img.width() && height == img.height()) return img;
  Raster out(width, height);
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    fy -= y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      fx -= x0;
      const double top = img.at(x0, y0) * (1 - fx) + img.at(x1, y0) * fx;
      const double bottom = img.at(x0, y1) * (1 - fx) + img.at(x1, y1) * fx;
      const double v = top * (1 - fy) + bottom * fy;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

/// Placement of resampled content inside the normalized canvas.
struct FitGeometry {
  int content_width;
  int content_height;
  int offset_x;
  int offset_y;
};

inline FitGeometry fit_geometry(int width, int height, int target_width, int target_height) {
  const double scale = std::min(static_cast<double>(target_width) / width, static_cast<double>(target_height) / height);
  FitGeometry g{};
  g.content_width = std::clamp(static_cast<int>(std::lround(width * scale)), 1, target_width);
  g.content_height = std::clamp(static_cast<int>(std::lround(height * scale)), 1, target_height);
  g.offset_x = (target_width - g.content_width) / 2;
  g.offset_y = (target_height - g.content_height) / 2;
  return g;
}

/// Aspect-preserving scale into the target box, centred on a white canvas.
inline Raster normalize_size(const Raster& img, const PreprocessConfig& cfg) {
  if (img.width() == cfg.target_width && img.height() == cfg.target_height) return img;
  const auto g = fit_geometry(img.width(), img.height(), cfg.target_width, cfg.target_height);
  const Raster content = resize_bilinear(img, g.content_width, g.content_height);
  Raster out(cfg.target_width, cfg.target_height, 255);
  for (int y = 0; y < g.content_height; ++y)
    for (int x = 0; x < g.content_width; ++x) out.at(g.offset_x + x, g.offset_y + y) = content.at(x, y);
  return out;
}

/// invert (optional) -> median_denoise -> contrast_stretch -> normalize_size.
inline Raster preprocess(const Raster& img, const PreprocessConfig& cfg) {
  cfg.validate();
  Raster out = cfg.invert ? invert(img) : img;
  out = median_denoise(out, cfg.median_window);
  out = contrast_stretch(out, cfg.contrast_low_pct, cfg.contrast_high_pct);
  return normalize_size(out, cfg);
}

}  // namespace manchu_ocr
