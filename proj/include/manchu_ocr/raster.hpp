#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "manchu_ocr/error.hpp"

namespace manchu_ocr {

/// Row-major 8-bit luminance image. 0 is black, 255 is white.
class Raster {
 public:
  Raster() = default;

  Raster(int width, int height, std::uint8_t fill = 255) : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw Error(ErrorKind::InvalidRaster, "raster dimensions must be positive, got " + std::to_string(width) + "x" +
                                              std::to_string(height));
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  Raster(int width, int height, std::vector<std::uint8_t> pixels) : Raster(width, height) {
    if (pixels.size() != pixels_.size()) throw Error(ErrorKind::InvalidRaster, "pixel buffer does not match dimensions");
    pixels_ = std::move(pixels);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t size() const noexcept { return pixels_.size(); }

  std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }

  /// Pixel with coordinates clamped to the image edge.
  std::uint8_t clamped(int x, int y) const {
    x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
    y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
    return pixels_[index(x, y)];
  }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  /// Copy of the rectangle [x, x+w) x [y, y+h); the part outside the image is
  /// filled with `fill`.
  Raster crop(int x, int y, int w, int h, std::uint8_t fill = 255) const {
    Raster out(w, h, fill);
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const int sx = x + xx, sy = y + yy;
        if (sx >= 0 && sy >= 0 && sx < width_ && sy < height_) out.at(xx, yy) = at(sx, sy);
      }
    return out;
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

}  // namespace manchu_ocr

namespace manchu_ocr {

/// Axis-aligned pixel rectangle [x, x+w) x [y, y+h).
struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const noexcept { return x + w; }
  int bottom() const noexcept { return y + h; }
  long long area() const noexcept { return static_cast<long long>(w) * h; }

  Box united(const Box& o) const {
    const int l = std::min(x, o.x), t = std::min(y, o.y);
    return {l, t, std::max(right(), o.right()) - l, std::max(bottom(), o.bottom()) - t};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

inline double iou(const Box& a, const Box& b) {
  const int l = std::max(a.x, b.x), t = std::max(a.y, b.y);
  const int r = std::min(a.right(), b.right()), btm = std::min(a.bottom(), b.bottom());
  const long long inter = (r > l && btm > t) ? static_cast<long long>(r - l) * (btm - t) : 0;
  const long long uni = a.area() + b.area() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Tight bounding box of pixels darker than `threshold`, if any.
inline std::optional<Box> ink_bounds(const Raster& img, int threshold = 128) {
  int l = img.width(), t = img.height(), r = -1, b = -1;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.at(x, y) < threshold) {
        l = std::min(l, x);
        r = std::max(r, x);
        t = std::min(t, y);
        b = std::max(b, y);
      }
  if (r < 0) return std::nullopt;
  return Box{l, t, r - l + 1, b - t + 1};
}

}  // namespace manchu_ocr
