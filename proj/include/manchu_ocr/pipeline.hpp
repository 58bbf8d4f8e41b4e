#pragma once

// Reproducible end-to-end commands over the toolkit modules: dataset
// generation, preprocessing, page segmentation, evaluation runs, error
// analysis and run comparison. The CLI is a thin wrapper around these.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "manchu_ocr/analysis.hpp"
#include "manchu_ocr/atlas.hpp"
#include "manchu_ocr/error.hpp"
#include "manchu_ocr/fileio.hpp"
#include "manchu_ocr/imaging.hpp"
#include "manchu_ocr/metrics.hpp"
#include "manchu_ocr/png_io.hpp"
#include "manchu_ocr/recognizers.hpp"
#include "manchu_ocr/records.hpp"
#include "manchu_ocr/rng.hpp"
#include "manchu_ocr/script.hpp"
#include "manchu_ocr/segmenter.hpp"
#include "manchu_ocr/synth.hpp"

#ifndef MANCHU_OCR_DATA_DIR
#define MANCHU_OCR_DATA_DIR "data"
#endif

namespace manchu_ocr {

namespace fs = std::filesystem;

inline std::string default_data_dir() {
  if (const char* env = std::getenv("MANCHU_OCR_DATA_DIR"); env && *env) return env;
  return MANCHU_OCR_DATA_DIR;
}

inline std::string default_table_path() { return default_data_dir() + "/manchu_mollendorff.tsv"; }

/// The nearest-neighbour baseline over the bundled lexicon and demo
/// atlases, available when no recognizers are configured.
inline std::optional<RecognizerDescriptor> default_baseline() {
  RecognizerDescriptor d;
  d.id = "baseline";
  d.reentrant = true;
  d.lexicon = default_data_dir() + "/lexicon.txt";
  d.atlases = {default_data_dir() + "/atlas/demo-a", default_data_dir() + "/atlas/demo-b"};
  if (!fs::exists(d.lexicon)) return std::nullopt;
  for (const auto& a : d.atlases)
    if (!fs::exists(a)) return std::nullopt;
  return d;
}

struct ToolkitConfig {
  PreprocessConfig preprocess;
  SegmentConfig segment;
  nlohmann::ordered_json gen = nlohmann::ordered_json::object();
  std::vector<RecognizerDescriptor> recognizers;
  std::string table_path = default_table_path();
  std::uint64_t seed = 0;
  std::string config_hash;  // sha256 of the config file bytes

  const RecognizerDescriptor& recognizer(const std::string& id) const {
    for (const auto& r : recognizers)
      if (r.id == id) return r;
    throw Error(ErrorKind::BadConfig, "no recognizer '" + id + "' in config");
  }

  GenSpec gen_spec() const { return gen_spec_from_json(gen, seed); }
};

inline ToolkitConfig parse_config(std::string_view bytes, const std::string& base_dir) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadConfig, std::string("config is not valid JSON: ") + e.what());
  }
  auto resolve = [&](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(base_dir) / p).lexically_normal().string();
  };
  ToolkitConfig c;
  c.config_hash = sha256_hex(bytes);
  try {
    if (j.contains("preprocess")) c.preprocess = preprocess_config_from_json(j.at("preprocess"));
    if (j.contains("segment")) c.segment = segment_config_from_json(j.at("segment"));
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("gen")) {
      c.gen = j.at("gen");
      (void)c.gen_spec();
    }
    if (j.contains("tablePath")) c.table_path = resolve(j.at("tablePath").get<std::string>());
    if (j.contains("recognizers"))
      for (const auto& r : j.at("recognizers")) c.recognizers.push_back(recognizer_from_json(r, base_dir));
    else if (auto d = default_baseline(); d) c.recognizers.push_back(*d);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadConfig, e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Spec) throw Error(ErrorKind::BadConfig, e.what());
    throw;
  }
  if (!fs::exists(c.table_path)) throw Error(ErrorKind::BadConfig, "tablePath does not exist: " + c.table_path);
  for (const auto& r : c.recognizers) {
    std::vector<std::string> paths = r.atlases;
    if (!r.lexicon.empty()) paths.push_back(r.lexicon);
    if (!r.manifest.empty()) paths.push_back(r.manifest);
    for (const auto& p : paths)
      if (!fs::exists(p)) throw Error(ErrorKind::BadConfig, "recognizer '" + r.id + "' path does not exist: " + p);
  }
  return c;
}

/// Loads a config file; an empty path yields the defaults.
inline ToolkitConfig load_config(const std::string& path) {
  if (path.empty()) return parse_config("{}", ".");
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorKind::BadConfig, "cannot read config " + path);
  }
  return parse_config(bytes, fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
}

/// UTC timestamp; SOURCE_DATE_EPOCH pins it for reproducible outputs.
inline std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------- gen

struct GenSummary {
  std::size_t rows = 0;
  std::map<std::string, std::size_t> per_split;
  std::map<std::string, std::size_t> per_font;
  std::string manifest_path;
  std::string manifest_hash;
};

inline GenSummary cmd_gen(const std::string& lexicon_path, const std::vector<std::string>& atlas_dirs, const GenSpec& spec,
                          const TransliterationTable& table, const std::string& out_dir) {
  const auto lexicon = load_lexicon(lexicon_path, table);
  std::vector<GlyphAtlas> atlases;
  for (const auto& d : atlas_dirs) {
    atlases.push_back(load_atlas(d));
    if (auto problems = validate_atlas(atlases.back(), table); !problems.empty())
      throw Error(ErrorKind::Spec, "atlas " + d + ": " + problems.front());
  }
  fs::create_directories(fs::path(out_dir) / "images");
  const auto rows = generate(lexicon, atlases, spec, table, [&](const Sample& s, const Raster& img) {
    write_png(out_dir + "/" + s.image_path, img);
  });
  GenSummary sum;
  sum.rows = rows.size();
  for (const auto& r : rows) {
    ++sum.per_split[r.split];
    ++sum.per_font[r.font_id];
  }
  sum.manifest_path = out_dir + "/manifest.jsonl";
  const auto bytes = manifest_to_string(rows);
  write_file_atomic(sum.manifest_path, bytes);
  write_file_atomic(out_dir + "/gen_spec.json", to_json(spec).dump(2) + "\n");
  sum.manifest_hash = sha256_hex(bytes);
  return sum;
}

// ---------------------------------------------------------------- prep

/// Preprocesses PNG files (or every PNG in a directory) into `out_dir`,
/// keeping file names. Returns the number of images written.
inline std::size_t cmd_prep(const std::vector<std::string>& inputs, const PreprocessConfig& cfg, const std::string& out_dir) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in))
        if (e.path().extension() == ".png") files.push_back(e.path());
    } else {
      files.emplace_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) write_png((fs::path(out_dir) / f.filename()).string(), preprocess(read_png(f.string()), cfg));
  return files.size();
}

// ---------------------------------------------------------------- segment

inline SegmentResult cmd_segment(const std::string& page_path, const SegmentConfig& cfg, const PreprocessConfig& prep,
                                 const std::string& out_dir) {
  auto result = segment_page(read_png(page_path), cfg, prep);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < result.words.size(); ++i) {
    const auto& w = result.words[i];
    write_png(out_dir + "/col" + std::to_string(w.column_index) + "_word" + std::to_string(w.order_in_column) + ".png",
              result.crops[i]);
  }
  write_file_atomic(out_dir + "/layout.json", layout_to_json(result, cfg.padding).dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------- eval

struct RunRecord {
  std::string run_id;
  std::string config_hash;
  std::string manifest_hash;
  std::string recognizer_id;
  MetricsReport manchu;
  MetricsReport roman;
  std::string started;
  std::string finished;
  std::size_t failures = 0;
  nlohmann::ordered_json options = nlohmann::ordered_json::object();
};

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  return {{"runId", r.run_id},
          {"configHash", r.config_hash},
          {"manifestHash", r.manifest_hash},
          {"recognizerId", r.recognizer_id},
          {"reports", {{"manchu", to_json(r.manchu)}, {"roman", to_json(r.roman)}}},
          {"timestamps", {{"started", r.started}, {"finished", r.finished}}},
          {"failures", r.failures},
          {"options", r.options}};
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.run_id = j.value("runId", std::string());
  r.config_hash = j.value("configHash", std::string());
  r.manifest_hash = j.value("manifestHash", std::string());
  r.recognizer_id = j.at("recognizerId").get<std::string>();
  r.manchu = report_from_json(j.at("reports").at("manchu"));
  r.roman = report_from_json(j.at("reports").at("roman"));
  if (j.contains("timestamps")) {
    r.started = j.at("timestamps").value("started", std::string());
    r.finished = j.at("timestamps").value("finished", std::string());
  }
  r.failures = j.value("failures", std::size_t{0});
  return r;
}

inline RunRecord load_run_record(const std::string& path) {
  try {
    return run_record_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, path + ": " + e.what());
  }
}

struct EvalOptions {
  std::string manifest_path;
  std::string out_dir;
  std::optional<std::size_t> limit;
  std::uint64_t sample_seed = 0;
  unsigned jobs = 1;
  bool timing = true;
  std::string replay_predictions;  // score stored predictions instead of recognizing
};

/// The ids evaluated under `--limit N --sample-seed S`: a seeded shuffle of
/// the sorted ids, first N kept, returned sorted.
inline std::vector<std::string> select_sample_ids(std::vector<std::string> ids, std::optional<std::size_t> limit,
                                                  std::uint64_t sample_seed) {
  std::sort(ids.begin(), ids.end());
  if (!limit || *limit >= ids.size()) return ids;
  Rng rng(derive_seed(sample_seed, 0x5E1EC7ull));
  for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.uniform_int(i + 1)]);
  ids.resize(*limit);
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace detail {

template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (unsigned t = 0; t < jobs; ++t)
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Scores predictions (already restricted to `samples`, any order) on both
/// channels. Missing predictions are an error.
inline std::pair<MetricsReport, MetricsReport> score_run(const std::vector<Sample>& samples,
                                                         const std::vector<Prediction>& predictions) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.sample_id, &p);
  std::vector<SampleScore> manchu, roman;
  std::vector<const Sample*> sorted;
  for (const auto& s : samples) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->id < b->id; });
  for (const auto* s : sorted) {
    auto it = by_id.find(s->id);
    if (it == by_id.end()) throw Error(ErrorKind::MissingPrediction, "no prediction for sample '" + s->id + "'");
    manchu.push_back(score_sample(*it->second, *s, Channel::Manchu));
    roman.push_back(score_sample(*it->second, *s, Channel::Roman));
  }
  return {aggregate(manchu, Channel::Manchu), aggregate(roman, Channel::Roman)};
}

inline nlohmann::ordered_json report_document(const RunRecord& r, bool timing) {
  nlohmann::ordered_json doc = to_json(r.manchu);
  doc["channels"] = {{"manchu", to_json(r.manchu)}, {"roman", to_json(r.roman)}};
  doc["manifestHash"] = r.manifest_hash;
  doc["recognizerId"] = r.recognizer_id;
  doc["timestamp"] = r.finished;
  doc["timing"] = timing ? "wallclock" : "disabled";
  doc["latencyExcludes"] = "image loading, preprocessing, output parsing";
  return doc;
}

/// preprocess -> recognize -> score -> aggregate on both channels. Writes
/// predictions.jsonl, report.json and run.json into `opts.out_dir`. Throws
/// Transport when no sample got an answer.
inline RunRecord cmd_eval(const ToolkitConfig& config, const std::string& recognizer_id, const EvalOptions& opts,
                          const TransliterationTable& table) {
  RunRecord rec;
  rec.started = utc_timestamp();
  const std::string manifest_bytes = read_file(opts.manifest_path);
  const auto manifest = read_manifest(opts.manifest_path);
  const std::string manifest_dir = fs::path(opts.manifest_path).parent_path().string();
  std::vector<std::string> all_ids;
  for (const auto& s : manifest) all_ids.push_back(s.id);
  const auto chosen = select_sample_ids(all_ids, opts.limit, opts.sample_seed);
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : manifest) by_id.emplace(s.id, &s);
  std::vector<Sample> samples;
  for (const auto& id : chosen) samples.push_back(*by_id.at(id));
  if (samples.empty()) throw Error(ErrorKind::EmptyRun, "manifest has no samples");

  std::vector<Prediction> predictions(samples.size());
  if (!opts.replay_predictions.empty()) {
    std::map<std::string, Prediction> stored;
    for (auto& p : read_predictions(opts.replay_predictions)) stored.emplace(p.sample_id, std::move(p));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto it = stored.find(samples[i].id);
      if (it == stored.end()) throw Error(ErrorKind::MissingPrediction, "no stored prediction for '" + samples[i].id + "'");
      predictions[i] = it->second;
    }
  } else {
    const auto& desc = config.recognizer(recognizer_id);
    auto recognizer = make_recognizer(desc, table, config.preprocess, config.gen_spec().glyph_overlap);
    const unsigned jobs = recognizer->reentrant() ? opts.jobs : 1;
    detail::parallel_for(samples.size(), jobs, [&](std::size_t i) {
      const Raster image = preprocess(read_png(manifest_dir.empty() ? samples[i].image_path : manifest_dir + "/" + samples[i].image_path),
                                      config.preprocess);
      predictions[i] = recognize(*recognizer, samples[i].id, image, opts.timing);
    });
  }
  for (const auto& p : predictions) rec.failures += p.failed() ? 1 : 0;

  std::tie(rec.manchu, rec.roman) = score_run(samples, predictions);
  rec.recognizer_id = recognizer_id;
  rec.config_hash = config.config_hash;
  rec.manifest_hash = sha256_hex(manifest_bytes);
  rec.options = {{"limit", opts.limit ? nlohmann::ordered_json(*opts.limit) : nlohmann::ordered_json(nullptr)},
                 {"sampleSeed", opts.sample_seed},
                 {"timing", opts.timing},
                 {"replay", !opts.replay_predictions.empty()}};
  rec.run_id = sha256_hex(rec.config_hash + "|" + rec.manifest_hash + "|" + recognizer_id + "|" + rec.options.dump()).substr(0, 16);
  rec.finished = utc_timestamp();

  write_predictions(opts.out_dir + "/predictions.jsonl", predictions);
  write_file_atomic(opts.out_dir + "/report.json", report_document(rec, opts.timing).dump(2) + "\n");
  write_file_atomic(opts.out_dir + "/run.json", to_json(rec).dump(2) + "\n");
  if (rec.failures == predictions.size())
    throw Error(ErrorKind::Transport, "recognizer '" + recognizer_id + "' failed on every sample");
  return rec;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeResult {
  ConfusionTable table;
  std::optional<ConcentrationReport> concentration;
  std::optional<LongestMatch> longest;
};

inline AnalyzeResult cmd_analyze(const std::string& manifest_path, const std::string& predictions_path,
                                 const std::string& out_dir, std::size_t k, Channel channel,
                                 const TransliterationTable* table = nullptr) {
  const auto manifest = read_manifest(manifest_path);
  const auto predictions = read_predictions(predictions_path);
  AnalyzeResult r;
  r.table = accumulate(manifest, predictions, channel);
  if (r.table.total_errors > 0) r.concentration = concentration(r.table, k);
  r.longest = longest_correct(manifest, predictions, channel);
  export_analysis(out_dir, r.table, r.concentration, r.longest, channel == Channel::Manchu ? table : nullptr);
  return r;
}

// ---------------------------------------------------------------- compare

struct Comparison {
  std::vector<RunRecord> runs;
  std::vector<bool> manifest_mismatch;
  std::string best;
  std::string csv;
  std::string text;
};

/// Side-by-side Manchu-channel metrics for >= 2 runs plus the best run by
/// word accuracy. Runs are labelled by recognizer id.
inline Comparison compare_runs(const std::vector<RunRecord>& runs) {
  if (runs.size() < 2) throw Error(ErrorKind::BadConfig, "compare needs at least two run records");
  Comparison c;
  c.runs = runs;
  std::vector<std::pair<std::string, MetricsReport>> reports;
  for (const auto& r : runs) {
    reports.emplace_back(r.recognizer_id, r.manchu);
    c.manifest_mismatch.push_back(r.manifest_hash != runs.front().manifest_hash);
  }
  c.best = select_best(reports);
  c.csv = "recognizer,runId,wordAccuracy,cer,f1,meanLatency,sampleCount,manifestMismatch\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& m = runs[i].manchu;
    c.csv += runs[i].recognizer_id + "," + runs[i].run_id + "," + fixed(m.word_accuracy, 6) + "," + fixed(m.mean_cer, 6) +
             "," + fixed(m.mean_f1, 6) + "," + fixed(m.mean_latency, 6) + "," + std::to_string(m.sample_count) + "," +
             (c.manifest_mismatch[i] ? "WARN" : "") + "\n";
  }
  std::size_t name_w = std::string("Recognizer").size();
  for (const auto& r : runs) name_w = std::max(name_w, r.recognizer_id.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::ostringstream t;
  t << pad("Recognizer", name_w) << "  Word Accuracy (%)  CER     F1 Score  Inference Time (s)  Samples  Warning\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& m = runs[i].manchu;
    t << pad(runs[i].recognizer_id, name_w) << "  " << pad(fixed(m.word_accuracy, 1), 17) << "  " << pad(fixed(m.mean_cer, 4), 6)
      << "  " << pad(fixed(m.mean_f1, 3), 8) << "  " << pad(fixed(m.mean_latency, 1), 18) << "  "
      << pad(std::to_string(m.sample_count), 7) << "  " << (c.manifest_mismatch[i] ? "manifest differs" : "") << "\n";
  }
  t << "best: " << c.best << "\n";
  c.text = t.str();
  return c;
}

inline Comparison cmd_compare(const std::vector<std::string>& run_paths, const std::string& out_dir) {
  std::vector<RunRecord> runs;
  for (const auto& p : run_paths) runs.push_back(load_run_record(p));
  auto c = compare_runs(runs);
  write_file_atomic(out_dir + "/comparison.csv", c.csv);
  write_file_atomic(out_dir + "/comparison.txt", c.text);
  return c;
}

}  // namespace manchu_ocr
