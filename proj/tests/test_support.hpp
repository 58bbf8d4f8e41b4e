#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "manchu_ocr/raster.hpp"
#include "manchu_ocr/script.hpp"

namespace test_support {

inline std::string data_dir() { return MANCHU_OCR_DATA_DIR; }

inline const manchu_ocr::TransliterationTable& table() {
  static const auto t = manchu_ocr::load_table(data_dir() + "/manchu_mollendorff.tsv");
  return t;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mocr-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& rel) const { return (path_ / rel).string(); }

 private:
  std::filesystem::path path_;
};

inline manchu_ocr::Raster random_raster(std::mt19937& gen, int w, int h) {
  std::uniform_int_distribution<int> px(0, 255);
  manchu_ocr::Raster r(w, h);
  for (auto& p : r.pixels()) p = static_cast<std::uint8_t>(px(gen));
  return r;
}

// Two-level image plus uniform jitter, the usual shape of a scanned word.
inline manchu_ocr::Raster bimodal_raster(std::mt19937& gen, int w, int h) {
  std::uniform_int_distribution<int> lo(10, 90), hi(160, 250), jitter(-12, 12), coin(0, 3);
  const int a = lo(gen), b = hi(gen);
  manchu_ocr::Raster r(w, h);
  for (auto& p : r.pixels()) p = static_cast<std::uint8_t>(std::clamp((coin(gen) == 0 ? a : b) + jitter(gen), 0, 255));
  return r;
}

}  // namespace test_support
