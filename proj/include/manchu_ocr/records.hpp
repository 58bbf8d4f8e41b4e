#pragma once

// Records exchanged between modules and persisted as line-delimited JSON:
// manifest samples and recognizer predictions.

#include <algorithm>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "manchu_ocr/error.hpp"
#include "manchu_ocr/fileio.hpp"

namespace manchu_ocr {

enum class Channel { Manchu, Roman };

inline const char* to_string(Channel c) { return c == Channel::Manchu ? "manchu" : "roman"; }

inline Channel parse_channel(std::string_view s) {
  if (s == "manchu") return Channel::Manchu;
  if (s == "roman") return Channel::Roman;
  throw Error(ErrorKind::BadConfig, "unknown channel '" + std::string(s) + "' (expected manchu|roman)");
}

/// One labeled word image. `image_path` is relative to the manifest file.
struct Sample {
  std::string id;
  std::string image_path;
  std::string manchu;
  std::string roman;
  std::string font_id;
  std::string split;

  const std::string& text(Channel c) const { return c == Channel::Manchu ? manchu : roman; }
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// A recognizer's answer for one sample. Empty channels mean the output
/// was missing or malformed; `error` carries transport failures.
struct Prediction {
  std::string sample_id;
  std::string manchu;
  std::string roman;
  double latency_seconds = 0.0;
  std::string raw;
  bool malformed = false;
  std::string error;

  const std::string& text(Channel c) const { return c == Channel::Manchu ? manchu : roman; }
  bool failed() const noexcept { return !error.empty(); }
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

inline nlohmann::ordered_json to_json(const Sample& s) {
  return {{"id", s.id}, {"imagePath", s.image_path}, {"manchu", s.manchu},
          {"roman", s.roman}, {"fontId", s.font_id}, {"split", s.split}};
}

inline nlohmann::ordered_json to_json(const Prediction& p) {
  nlohmann::ordered_json j = {{"id", p.sample_id}, {"manchu", p.manchu}, {"roman", p.roman},
                              {"latencySeconds", p.latency_seconds}, {"raw", p.raw}};
  if (p.malformed) j["malformed"] = true;
  if (!p.error.empty()) j["error"] = p.error;
  return j;
}

namespace detail {

template <class T, class Parse>
std::vector<T> read_jsonl(const std::string& path, Parse parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::vector<T> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      out.push_back(parse(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Io, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

template <class T>
std::string to_jsonl(const std::vector<T>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += to_json(r).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
    out += '\n';
  }
  return out;
}

}  // namespace detail

inline Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  s.id = j.at("id").get<std::string>();
  s.image_path = j.value("imagePath", std::string());
  s.manchu = j.at("manchu").get<std::string>();
  s.roman = j.at("roman").get<std::string>();
  s.font_id = j.value("fontId", std::string());
  s.split = j.value("split", std::string());
  return s;
}

inline Prediction prediction_from_json(const nlohmann::json& j) {
  Prediction p;
  p.sample_id = j.at("id").get<std::string>();
  p.manchu = j.value("manchu", std::string());
  p.roman = j.value("roman", std::string());
  p.latency_seconds = j.value("latencySeconds", 0.0);
  p.raw = j.value("raw", std::string());
  p.malformed = j.value("malformed", false);
  p.error = j.value("error", std::string());
  return p;
}

inline std::vector<Sample> read_manifest(const std::string& path) {
  return detail::read_jsonl<Sample>(path, sample_from_json);
}

inline std::vector<Prediction> read_predictions(const std::string& path) {
  return detail::read_jsonl<Prediction>(path, prediction_from_json);
}

inline std::string manifest_to_string(const std::vector<Sample>& rows) { return detail::to_jsonl(rows); }
inline std::string predictions_to_string(const std::vector<Prediction>& rows) { return detail::to_jsonl(rows); }

inline void write_manifest(const std::string& path, const std::vector<Sample>& rows) {
  write_file_atomic(path, manifest_to_string(rows));
}

inline void write_predictions(const std::string& path, std::vector<Prediction> rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  write_file_atomic(path, predictions_to_string(rows));
}

}  // namespace manchu_ocr
