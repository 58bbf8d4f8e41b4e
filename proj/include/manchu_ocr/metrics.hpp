#pragma once

// Evaluation metrics over Unicode scalar sequences: edit distance, character
// error rate, matching-block character F1, exact match, and their per-run
// aggregation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "manchu_ocr/error.hpp"
#include "manchu_ocr/records.hpp"
#include "manchu_ocr/utf8.hpp"

namespace manchu_ocr {

/// Unit-cost edit distance (insert, delete, substitute).
inline std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

/// Edit distance normalized by the truth length. Not capped at 1.
inline double cer(std::u32string_view predicted, std::u32string_view truth) {
  if (truth.empty()) throw Error(ErrorKind::EmptyTruth, "CER undefined for empty ground truth");
  return static_cast<double>(levenshtein(predicted, truth)) / static_cast<double>(truth.size());
}

struct MatchingBlock {
  std::size_t predicted_start;
  std::size_t truth_start;
  std::size_t length;
  friend bool operator==(const MatchingBlock&, const MatchingBlock&) = default;
};

namespace detail {

// Longest common contiguous block inside the given windows. Ties resolve to
// the earliest truth start, then the earliest predicted start.
inline MatchingBlock longest_block(std::u32string_view p, std::size_t p_lo, std::size_t p_hi,
                                   std::u32string_view t, std::size_t t_lo, std::size_t t_hi) {
  MatchingBlock best{p_lo, t_lo, 0};
  // run[j] = length of the common suffix ending at p[i-1], t[j-1]
  std::vector<std::size_t> prev(t_hi - t_lo + 1, 0), cur(t_hi - t_lo + 1, 0);
  for (std::size_t i = p_lo; i < p_hi; ++i) {
    for (std::size_t j = t_lo; j < t_hi; ++j) {
      const std::size_t k = j - t_lo + 1;
      cur[k] = p[i] == t[j] ? prev[k - 1] + 1 : 0;
      if (cur[k] == 0) continue;
      const std::size_t ps = i + 1 - cur[k];
      const std::size_t ts = j + 1 - cur[k];
      if (cur[k] > best.length ||
          (cur[k] == best.length && (ts < best.truth_start || (ts == best.truth_start && ps < best.predicted_start)))) {
        best = {ps, ts, cur[k]};
      }
    }
    std::swap(prev, cur);
    std::fill(cur.begin(), cur.end(), 0);
  }
  return best;
}

inline void collect_blocks(std::u32string_view p, std::size_t p_lo, std::size_t p_hi, std::u32string_view t,
                           std::size_t t_lo, std::size_t t_hi, std::vector<MatchingBlock>& out) {
  if (p_lo >= p_hi || t_lo >= t_hi) return;
  const auto b = longest_block(p, p_lo, p_hi, t, t_lo, t_hi);
  if (b.length == 0) return;
  collect_blocks(p, p_lo, b.predicted_start, t, t_lo, b.truth_start, out);
  out.push_back(b);
  collect_blocks(p, b.predicted_start + b.length, p_hi, t, b.truth_start + b.length, t_hi, out);
}

}  // namespace detail

/// Recursive longest-common-block decomposition (Ratcliff/Obershelp style).
/// Blocks are non-overlapping and ordered in both sequences.
inline std::vector<MatchingBlock> matching_blocks(std::u32string_view predicted, std::u32string_view truth) {
  std::vector<MatchingBlock> out;
  detail::collect_blocks(predicted, 0, predicted.size(), truth, 0, truth.size(), out);
  return out;
}

struct CharF1Breakdown {
  std::size_t true_positives = 0;
  std::size_t predicted_len = 0;
  std::size_t truth_len = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline CharF1Breakdown char_f1(std::u32string_view predicted, std::u32string_view truth) {
  if (truth.empty()) throw Error(ErrorKind::EmptyTruth, "F1 undefined for empty ground truth");
  CharF1Breakdown r;
  for (const auto& b : matching_blocks(predicted, truth)) r.true_positives += b.length;
  r.predicted_len = predicted.size();
  r.truth_len = truth.size();
  const auto tp = static_cast<double>(r.true_positives);
  r.precision = r.predicted_len == 0 ? 0.0 : tp / static_cast<double>(r.predicted_len);
  r.recall = tp / static_cast<double>(r.truth_len);
  // 2PR/(P+R) reduced to 2TP/(|p|+|t|): one rounding, so exact fractions
  // such as 10/13 come out bit-identical.
  r.f1 = 2.0 * tp / static_cast<double>(r.predicted_len + r.truth_len);
  return r;
}

struct SampleScore {
  std::string sample_id;
  double cer = 0.0;
  bool exact_match = false;
  CharF1Breakdown f1;
  double latency_seconds = 0.0;
};

/// Scores one prediction on the chosen script channel. Malformed or failed
/// predictions score as ordinary (empty) outputs.
inline SampleScore score_sample(const Prediction& prediction, const Sample& truth, Channel channel) {
  if (prediction.sample_id != truth.id)
    throw Error(ErrorKind::IdMismatch, "prediction '" + prediction.sample_id + "' scored against sample '" + truth.id + "'");
  const auto p = utf8::decode(prediction.text(channel));
  const auto t = utf8::decode(truth.text(channel));
  SampleScore s;
  s.sample_id = truth.id;
  s.exact_match = p == t;
  s.cer = cer(p, t);
  s.f1 = char_f1(p, t);
  s.latency_seconds = prediction.latency_seconds;
  return s;
}

struct MetricsReport {
  double word_accuracy = 0.0;  // percent
  double mean_cer = 0.0;
  double mean_f1 = 0.0;
  double mean_latency = 0.0;  // seconds
  std::size_t sample_count = 0;
  Channel channel = Channel::Manchu;
};

/// Arithmetic means over per-sample scores, folded in the given order.
inline MetricsReport aggregate(std::span<const SampleScore> scores, Channel channel) {
  if (scores.empty()) throw Error(ErrorKind::EmptyRun, "no samples to aggregate");
  std::size_t exact = 0;
  double cer_sum = 0, f1_sum = 0, latency_sum = 0;
  for (const auto& s : scores) {
    exact += s.exact_match ? 1 : 0;
    cer_sum += s.cer;
    f1_sum += s.f1.f1;
    latency_sum += s.latency_seconds;
  }
  const auto n = static_cast<double>(scores.size());
  MetricsReport r;
  r.word_accuracy = 100.0 * static_cast<double>(exact) / n;
  r.mean_cer = cer_sum / n;
  r.mean_f1 = f1_sum / n;
  r.mean_latency = latency_sum / n;
  r.sample_count = scores.size();
  r.channel = channel;
  return r;
}

/// Highest word accuracy wins; ties go to lower mean CER, then smaller id.
inline std::string select_best(std::span<const std::pair<std::string, MetricsReport>> reports) {
  if (reports.empty()) throw Error(ErrorKind::EmptyRun, "no checkpoints to select from");
  const auto better = [](const auto& a, const auto& b) {
    if (a.second.word_accuracy != b.second.word_accuracy) return a.second.word_accuracy > b.second.word_accuracy;
    if (a.second.mean_cer != b.second.mean_cer) return a.second.mean_cer < b.second.mean_cer;
    return a.first < b.first;
  };
  const auto* best = &reports.front();
  for (const auto& r : reports)
    if (better(r, *best)) best = &r;
  return best->first;
}

/// Rounds to the 6 decimal places used in every persisted report.
inline double round6(double x) { return std::round(x * 1e6) / 1e6; }

/// Fixed-point rendering used for display and for exact comparisons.
inline std::string fixed(double x, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, x);
  return buf;
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  return {{"channel", to_string(r.channel)},
          {"wordAccuracy", round6(r.word_accuracy)},
          {"meanCer", round6(r.mean_cer)},
          {"meanF1", round6(r.mean_f1)},
          {"meanLatency", round6(r.mean_latency)},
          {"sampleCount", r.sample_count}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.channel = parse_channel(j.value("channel", std::string("manchu")));
  r.word_accuracy = j.at("wordAccuracy").get<double>();
  r.mean_cer = j.at("meanCer").get<double>();
  r.mean_f1 = j.at("meanF1").get<double>();
  r.mean_latency = j.at("meanLatency").get<double>();
  r.sample_count = j.at("sampleCount").get<std::size_t>();
  return r;
}

}  // namespace manchu_ocr
