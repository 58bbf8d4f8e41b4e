#pragma once

// Recognizer contract: the two-line "Manchu:/Roman:" answer format, the
// adapters that obtain it from external processes or HTTP services, and a
// deterministic closed-set template-matching baseline.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "manchu_ocr/atlas.hpp"
#include "manchu_ocr/error.hpp"
#include "manchu_ocr/imaging.hpp"
#include "manchu_ocr/png_io.hpp"
#include "manchu_ocr/records.hpp"
#include "manchu_ocr/script.hpp"
#include "manchu_ocr/subprocess.hpp"
#include "manchu_ocr/synth.hpp"

namespace manchu_ocr {

inline constexpr std::string_view kManchuMarker = "Manchu:";
inline constexpr std::string_view kRomanMarker = "Roman:";

struct ParsedOutput {
  std::string manchu;
  std::string roman;
  bool malformed = false;
};

/// Canonical answer: "Manchu:<m>\nRoman:<r>".
inline std::string format_output(std::string_view manchu, std::string_view roman) {
  std::string out;
  out.append(kManchuMarker).append(manchu).append("\n").append(kRomanMarker).append(roman);
  return out;
}

/// Extracts both channels from a model answer. Each channel is the rest of
/// the line after its marker, trimmed. The Roman marker is looked up after
/// the Manchu line first, so chatter inside the Manchu line cannot shadow
/// it; failing that, its first occurrence anywhere is used. A missing
/// marker leaves that channel empty and sets `malformed`.
inline ParsedOutput parse_output(std::string_view text) {
  ParsedOutput out;
  auto rest_of_line = [&](std::size_t from) {
    auto end = text.find('\n', from);
    return std::string(utf8::trim(text.substr(from, end == std::string_view::npos ? std::string_view::npos : end - from)));
  };
  const auto m = text.find(kManchuMarker);
  std::size_t search_roman_from = 0;
  if (m != std::string_view::npos) {
    const auto start = m + kManchuMarker.size();
    out.manchu = rest_of_line(start);
    const auto eol = text.find('\n', start);
    search_roman_from = eol == std::string_view::npos ? text.size() : eol;
  }
  auto r = text.find(kRomanMarker, search_roman_from);
  if (r == std::string_view::npos) r = text.find(kRomanMarker);
  if (r != std::string_view::npos) out.roman = rest_of_line(r + kRomanMarker.size());
  out.malformed = m == std::string_view::npos || r == std::string_view::npos;
  return out;
}

enum class RecognizerKind { Baseline, Subprocess, Http };

inline RecognizerKind parse_recognizer_kind(std::string_view s) {
  if (s == "baseline") return RecognizerKind::Baseline;
  if (s == "subprocess") return RecognizerKind::Subprocess;
  if (s == "http") return RecognizerKind::Http;
  throw Error(ErrorKind::BadConfig, "unknown recognizer kind '" + std::string(s) + "'");
}

struct RecognizerDescriptor {
  std::string id;
  RecognizerKind kind = RecognizerKind::Baseline;
  std::vector<std::string> command;  // subprocess argv
  std::string endpoint;              // http://host:port/path
  double timeout_seconds = 30.0;
  bool reentrant = false;
  // Baseline template source: either lexicon + atlases, or a manifest.
  std::string lexicon;
  std::vector<std::string> atlases;
  std::string manifest;
  int feature_width = 16;
  int feature_height = 120;

  void validate() const {
    if (id.empty()) throw Error(ErrorKind::BadConfig, "recognizer id is required");
    if (!(timeout_seconds > 0)) throw Error(ErrorKind::BadConfig, "recognizer '" + id + "' timeoutSeconds must be > 0");
    if (kind == RecognizerKind::Subprocess && command.empty())
      throw Error(ErrorKind::BadConfig, "subprocess recognizer '" + id + "' needs a command");
    if (kind == RecognizerKind::Http && endpoint.empty())
      throw Error(ErrorKind::BadConfig, "http recognizer '" + id + "' needs an endpoint");
    if (kind == RecognizerKind::Baseline && manifest.empty() && (lexicon.empty() || atlases.empty()))
      throw Error(ErrorKind::BadConfig, "baseline recognizer '" + id + "' needs lexicon+atlases or a manifest");
    if (feature_width < 1 || feature_height < 1) throw Error(ErrorKind::BadConfig, "feature dimensions must be positive");
  }
};

/// `base_dir` resolves relative paths in the descriptor.
inline RecognizerDescriptor recognizer_from_json(const nlohmann::json& j, const std::string& base_dir = "") {
  auto resolve = [&](const std::string& p) {
    if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
  };
  RecognizerDescriptor d;
  d.id = j.at("id").get<std::string>();
  d.kind = parse_recognizer_kind(j.value("kind", std::string("baseline")));
  if (j.contains("command")) {
    if (j.at("command").is_string()) d.command = {"/bin/sh", "-c", j.at("command").get<std::string>()};
    else d.command = j.at("command").get<std::vector<std::string>>();
  }
  d.endpoint = j.value("endpoint", std::string());
  d.timeout_seconds = j.value("timeoutSeconds", d.timeout_seconds);
  d.reentrant = j.value("reentrant", d.kind == RecognizerKind::Baseline);
  d.lexicon = resolve(j.value("lexicon", std::string()));
  if (j.contains("atlases"))
    for (const auto& a : j.at("atlases")) d.atlases.push_back(resolve(a.get<std::string>()));
  d.manifest = resolve(j.value("manifest", std::string()));
  d.feature_width = j.value("featureWidth", d.feature_width);
  d.feature_height = j.value("featureHeight", d.feature_height);
  d.validate();
  return d;
}

/// Binarized, downsampled image packed 64 pixels per word.
struct FeatureVector {
  std::vector<std::uint64_t> bits;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline std::size_t hamming(const FeatureVector& a, const FeatureVector& b) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) d += static_cast<std::size_t>(std::popcount(a.bits[i] ^ b.bits[i]));
  return d;
}

/// Area-average downsample to width x height, then ink (mean < 128) -> 1.
inline FeatureVector extract_features(const Raster& img, int width, int height) {
  FeatureVector f;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  f.bits.assign((n + 63) / 64, 0);
  for (int y = 0; y < height; ++y) {
    const int y0 = static_cast<int>(static_cast<long long>(y) * img.height() / height);
    const int y1 = std::max(y0 + 1, static_cast<int>(static_cast<long long>(y + 1) * img.height() / height));
    for (int x = 0; x < width; ++x) {
      const int x0 = static_cast<int>(static_cast<long long>(x) * img.width() / width);
      const int x1 = std::max(x0 + 1, static_cast<int>(static_cast<long long>(x + 1) * img.width() / width));
      long long sum = 0;
      for (int yy = y0; yy < y1; ++yy)
        for (int xx = x0; xx < x1; ++xx) sum += img.at(xx, yy);
      const long long count = static_cast<long long>(y1 - y0) * (x1 - x0);
      if (sum < 128 * count) {
        const std::size_t k = static_cast<std::size_t>(y) * width + x;
        f.bits[k / 64] |= std::uint64_t{1} << (k % 64);
      }
    }
  }
  return f;
}

struct TemplateIndex {
  struct Entry {
    std::string label;  // roman
    std::string font_id;
    FeatureVector features;
  };
  std::vector<Entry> entries;
  int feature_width = 16;
  int feature_height = 120;
  std::string source_id;
};

/// One entry per (word, font): each word composed from the atlas, run
/// through `prep` (inversion off, atlas glyphs are already dark-on-light)
/// and reduced to features. Entries are ordered by label, then font.
inline TemplateIndex build_template_index(const Lexicon& lexicon, const std::vector<GlyphAtlas>& atlases,
                                          const TransliterationTable& table, PreprocessConfig prep,
                                          int feature_width = 16, int feature_height = 120, double overlap = 0.15) {
  if (lexicon.words.empty() || atlases.empty()) throw Error(ErrorKind::EmptySource, "no words or no atlases to index");
  prep.invert = false;
  TemplateIndex index;
  index.feature_width = feature_width;
  index.feature_height = feature_height;
  for (const auto& a : atlases) index.source_id += (index.source_id.empty() ? "atlas:" : "+") + a.font_id;
  for (const auto& atlas : atlases)
    for (const auto& word : lexicon.words) {
      const Raster img = preprocess(compose_word(word, table, atlas, overlap), prep);
      index.entries.push_back({word.utf8(), atlas.font_id, extract_features(img, feature_width, feature_height)});
    }
  std::stable_sort(index.entries.begin(), index.entries.end(), [](const auto& a, const auto& b) {
    return a.label != b.label ? a.label < b.label : a.font_id < b.font_id;
  });
  return index;
}

/// One entry per (roman label, font) from manifest images, first sample in
/// id order wins. Images are preprocessed with `prep` as given.
inline TemplateIndex build_template_index(const std::vector<Sample>& manifest, const std::string& manifest_dir,
                                          const PreprocessConfig& prep, int feature_width = 16,
                                          int feature_height = 120) {
  std::vector<const Sample*> rows;
  for (const auto& s : manifest) rows.push_back(&s);
  std::sort(rows.begin(), rows.end(), [](auto a, auto b) { return a->id < b->id; });
  TemplateIndex index;
  index.feature_width = feature_width;
  index.feature_height = feature_height;
  index.source_id = "manifest";
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto* s : rows) {
    if (!seen.insert({s->roman, s->font_id}).second) continue;
    const Raster img = preprocess(read_png(manifest_dir + "/" + s->image_path), prep);
    index.entries.push_back({s->roman, s->font_id, extract_features(img, feature_width, feature_height)});
  }
  if (index.entries.empty()) throw Error(ErrorKind::EmptySource, "manifest has no samples to index");
  std::stable_sort(index.entries.begin(), index.entries.end(), [](const auto& a, const auto& b) {
    return a.label != b.label ? a.label < b.label : a.font_id < b.font_id;
  });
  return index;
}

struct Classification {
  std::string label;
  std::size_t distance = 0;
};

/// Nearest neighbour by Hamming distance; ties go to the smaller label.
inline Classification baseline_classify(const TemplateIndex& index, const FeatureVector& query) {
  if (index.entries.empty()) throw Error(ErrorKind::EmptySource, "template index is empty");
  const TemplateIndex::Entry* best = nullptr;
  std::size_t best_d = 0;
  for (const auto& e : index.entries) {
    const auto d = hamming(e.features, query);
    if (!best || d < best_d || (d == best_d && e.label < best->label)) {
      best = &e;
      best_d = d;
    }
  }
  return {best->label, best_d};
}

inline Classification baseline_classify(const TemplateIndex& index, const Raster& preprocessed) {
  return baseline_classify(index, extract_features(preprocessed, index.feature_width, index.feature_height));
}

/// Raw transport result: the answer text or a failure.
struct RawAnswer {
  std::string text;
  std::optional<ErrorKind> failure;
};

class Recognizer {
 public:
  virtual ~Recognizer() = default;
  virtual const std::string& id() const = 0;
  /// Safe to call infer() from several threads at once.
  virtual bool reentrant() const = 0;
  /// Brings the backend to a ready state outside the timed region.
  virtual void warm_up() {}
  /// Transport plus model compute for one preprocessed image.
  virtual RawAnswer infer(const Raster& image) = 0;
};

class BaselineRecognizer final : public Recognizer {
 public:
  BaselineRecognizer(std::string id, TemplateIndex index, TransliterationTable table)
      : id_(std::move(id)), index_(std::move(index)), table_(std::move(table)) {}

  const std::string& id() const override { return id_; }
  bool reentrant() const override { return true; }
  const TemplateIndex& index() const noexcept { return index_; }

  RawAnswer infer(const Raster& image) override {
    const auto c = baseline_classify(index_, image);
    return {format_output(roman_to_manchu(c.label, table_).utf8(), c.label), std::nullopt};
  }

 private:
  std::string id_;
  TemplateIndex index_;
  TransliterationTable table_;
};

/// Frames each request as a 4-byte big-endian length followed by PNG bytes
/// on the child's stdin and reads a two-line answer from its stdout. The
/// child stays alive across requests; after a timeout or transport failure
/// it is killed and restarted on the next request.
class SubprocessRecognizer final : public Recognizer {
 public:
  explicit SubprocessRecognizer(const RecognizerDescriptor& d)
      : id_(d.id), timeout_(d.timeout_seconds), child_(d.command) {}

  const std::string& id() const override { return id_; }
  bool reentrant() const override { return false; }

  void warm_up() override {
    try {
      child_.start();
    } catch (const Error&) {
      // reported by infer()
    }
  }

  RawAnswer infer(const Raster& image) override {
    try {
      child_.start();
      const auto png = encode_png(image);
      const auto n = static_cast<std::uint32_t>(png.size());
      const unsigned char header[4] = {static_cast<unsigned char>(n >> 24), static_cast<unsigned char>(n >> 16),
                                       static_cast<unsigned char>(n >> 8), static_cast<unsigned char>(n)};
      child_.write_all(header, 4);
      child_.write_all(png.data(), png.size());
      const auto deadline = std::chrono::steady_clock::now() +
                            std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(timeout_));
      std::string text = child_.read_line(deadline);
      text += "\n";
      text += child_.read_line(deadline);
      return {std::move(text), std::nullopt};
    } catch (const Error& e) {
      child_.stop();
      return {e.what(), e.kind()};
    }
  }

 private:
  std::string id_;
  double timeout_;
  ChildProcess child_;
};

/// POSTs the PNG as image/png; a 200 text/plain body is the answer.
class HttpRecognizer final : public Recognizer {
 public:
  explicit HttpRecognizer(const RecognizerDescriptor& d) : id_(d.id), reentrant_(d.reentrant), timeout_(d.timeout_seconds) {
    const std::string_view url = d.endpoint;
    constexpr std::string_view scheme = "http://";
    if (url.substr(0, scheme.size()) != scheme)
      throw Error(ErrorKind::BadConfig, "http recognizer '" + d.id + "' endpoint must start with http://");
    const auto slash = url.find('/', scheme.size());
    host_ = std::string(url.substr(0, slash));
    path_ = slash == std::string_view::npos ? "/" : std::string(url.substr(slash));
  }

  const std::string& id() const override { return id_; }
  bool reentrant() const override { return reentrant_; }

  RawAnswer infer(const Raster& image) override {
    const auto png = encode_png(image);
    httplib::Client client(host_);
    const auto secs = static_cast<time_t>(timeout_);
    const auto usecs = static_cast<time_t>((timeout_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(path_, reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
      return {"http " + host_ + path_ + ": " + httplib::to_string(err), timed_out ? ErrorKind::Timeout : ErrorKind::Transport};
    }
    if (res->status != 200)
      return {"http " + host_ + path_ + ": status " + std::to_string(res->status), ErrorKind::Transport};
    return {res->body, std::nullopt};
  }

 private:
  std::string id_;
  bool reentrant_;
  double timeout_;
  std::string host_;
  std::string path_;
};

/// Runs one image through a recognizer. Latency is wall-clock around the
/// transport and model call only; warm-up and output parsing are excluded.
/// Transport failures become a failed Prediction with empty channels.
inline Prediction recognize(Recognizer& recognizer, const std::string& sample_id, const Raster& image, bool timing = true) {
  recognizer.warm_up();
  const auto t0 = std::chrono::steady_clock::now();
  RawAnswer answer = recognizer.infer(image);
  const auto t1 = std::chrono::steady_clock::now();
  Prediction p;
  p.sample_id = sample_id;
  p.latency_seconds = timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
  p.raw = answer.text;
  if (answer.failure) {
    p.error = to_string(*answer.failure);
    p.malformed = true;
    return p;
  }
  auto parsed = parse_output(answer.text);
  p.manchu = std::move(parsed.manchu);
  p.roman = std::move(parsed.roman);
  p.malformed = parsed.malformed;
  return p;
}

/// Builds the recognizer a descriptor names. Baseline indexes are built
/// here, which may read the lexicon, atlases or manifest from disk.
inline std::unique_ptr<Recognizer> make_recognizer(const RecognizerDescriptor& d, const TransliterationTable& table,
                                                   const PreprocessConfig& prep, double overlap = 0.15) {
  d.validate();
  switch (d.kind) {
    case RecognizerKind::Baseline: {
      TemplateIndex index;
      if (!d.manifest.empty()) {
        index = build_template_index(read_manifest(d.manifest), std::filesystem::path(d.manifest).parent_path().string(),
                                     prep, d.feature_width, d.feature_height);
      } else {
        std::vector<GlyphAtlas> atlases;
        for (const auto& dir : d.atlases) atlases.push_back(load_atlas(dir));
        index = build_template_index(load_lexicon(d.lexicon, table), atlases, table, prep, d.feature_width,
                                     d.feature_height, overlap);
      }
      return std::make_unique<BaselineRecognizer>(d.id, std::move(index), table);
    }
    case RecognizerKind::Subprocess: return std::make_unique<SubprocessRecognizer>(d);
    case RecognizerKind::Http: return std::make_unique<HttpRecognizer>(d);
  }
  throw Error(ErrorKind::BadConfig, "unsupported recognizer kind");
}

}  // namespace manchu_ocr
