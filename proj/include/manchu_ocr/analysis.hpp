#pragma once

// Character-level error attribution: edit-script alignment, per-character
// confusion counts, top-k error concentration, longest exact match, and
// CSV/JSON export of the results.

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "manchu_ocr/error.hpp"
#include "manchu_ocr/fileio.hpp"
#include "manchu_ocr/metrics.hpp"
#include "manchu_ocr/records.hpp"
#include "manchu_ocr/script.hpp"
#include "manchu_ocr/utf8.hpp"

namespace manchu_ocr {

struct EditOp {
  enum class Kind { Match, Substitute, Delete, Insert };
  Kind kind;
  char32_t truth = 0;      // unset for Insert
  char32_t predicted = 0;  // unset for Delete
  friend bool operator==(const EditOp&, const EditOp&) = default;
};

/// One minimal edit script turning `truth` into `predicted`. Delete drops a
/// truth character, Insert adds a predicted one. The backtrace from the end
/// prefers match, then substitute, then delete, then insert.
inline std::vector<EditOp> align(std::u32string_view predicted, std::u32string_view truth) {
  const std::size_t n = truth.size(), m = predicted.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j) + 1, at(i, j - 1) + 1, at(i - 1, j - 1) + (truth[i - 1] == predicted[j - 1] ? 0 : 1)});
  std::vector<EditOp> ops;
  std::size_t i = n, j = m;
  using K = EditOp::Kind;
  while (i > 0 || j > 0) {
    const std::size_t cur = at(i, j);
    if (i > 0 && j > 0 && truth[i - 1] == predicted[j - 1] && cur == at(i - 1, j - 1)) {
      ops.push_back({K::Match, truth[i - 1], predicted[j - 1]});
      --i, --j;
    } else if (i > 0 && j > 0 && cur == at(i - 1, j - 1) + 1) {
      ops.push_back({K::Substitute, truth[i - 1], predicted[j - 1]});
      --i, --j;
    } else if (i > 0 && cur == at(i - 1, j) + 1) {
      ops.push_back({K::Delete, truth[i - 1], 0});
      --i;
    } else {
      ops.push_back({K::Insert, 0, predicted[j - 1]});
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

inline std::size_t edit_cost(const std::vector<EditOp>& ops) {
  return static_cast<std::size_t>(std::count_if(ops.begin(), ops.end(), [](const EditOp& o) { return o.kind != EditOp::Kind::Match; }));
}

struct CharErrors {
  std::map<char32_t, std::size_t> substitutions;  // replacement -> count
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t total = 0;
};

/// Substitutions and deletions are charged to the ground-truth character,
/// insertions to the inserted predicted character (its own bucket).
struct ConfusionTable {
  std::map<char32_t, CharErrors> per_char;
  std::size_t total_errors = 0;

  void add(const std::vector<EditOp>& ops) {
    for (const auto& op : ops) {
      switch (op.kind) {
        case EditOp::Kind::Match: continue;
        case EditOp::Kind::Substitute: ++per_char[op.truth].substitutions[op.predicted]; ++per_char[op.truth].total; break;
        case EditOp::Kind::Delete: ++per_char[op.truth].deletions; ++per_char[op.truth].total; break;
        case EditOp::Kind::Insert: ++per_char[op.predicted].insertions; ++per_char[op.predicted].total; break;
      }
      ++total_errors;
    }
  }

  /// Associative, commutative merge of partial tables.
  void merge(const ConfusionTable& other) {
    for (const auto& [c, e] : other.per_char) {
      auto& mine = per_char[c];
      for (const auto& [r, n] : e.substitutions) mine.substitutions[r] += n;
      mine.deletions += e.deletions;
      mine.insertions += e.insertions;
      mine.total += e.total;
    }
    total_errors += other.total_errors;
  }
};

/// Aligns every manifest sample with its prediction on `channel`.
inline ConfusionTable accumulate(const std::vector<Sample>& manifest, const std::vector<Prediction>& predictions,
                                 Channel channel = Channel::Manchu) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.sample_id, &p);
  ConfusionTable table;
  for (const auto& s : manifest) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) throw Error(ErrorKind::MissingPrediction, "no prediction for sample '" + s.id + "'");
    table.add(align(utf8::decode(it->second->text(channel)), utf8::decode(s.text(channel))));
  }
  return table;
}

enum class AttributionView { AllErrors, ExcludeInsertions };

inline const char* to_string(AttributionView v) {
  return v == AttributionView::AllErrors ? "all-errors" : "substitutions-and-deletions";
}

struct ConcentrationReport {
  struct Share {
    char32_t character;
    std::size_t errors;
    double share;  // percent of the view's total
  };
  std::vector<Share> top_k;
  double concentration = 0.0;
  std::size_t k = 0;
  std::size_t total_errors = 0;
  AttributionView view = AttributionView::AllErrors;
};

/// Top-k characters by share of attributed errors (ties by codepoint) and
/// their summed share.
inline ConcentrationReport concentration(const ConfusionTable& table, std::size_t k,
                                         AttributionView view = AttributionView::AllErrors) {
  std::vector<std::pair<char32_t, std::size_t>> counts;
  std::size_t total = 0;
  for (const auto& [c, e] : table.per_char) {
    const std::size_t n = view == AttributionView::AllErrors ? e.total : e.total - e.insertions;
    if (n == 0) continue;
    counts.emplace_back(c, n);
    total += n;
  }
  if (total == 0) throw Error(ErrorKind::NoErrors, "no attributed errors to rank");
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  ConcentrationReport r;
  r.k = k;
  r.total_errors = total;
  r.view = view;
  for (std::size_t i = 0; i < std::min(k, counts.size()); ++i) {
    const double share = 100.0 * static_cast<double>(counts[i].second) / static_cast<double>(total);
    r.top_k.push_back({counts[i].first, counts[i].second, share});
    r.concentration += share;
  }
  return r;
}

struct LongestMatch {
  std::string sample_id;
  std::size_t length = 0;
};

/// Exact-match sample with the most characters on `channel`; ties go to the
/// smaller id. Empty when nothing matched.
inline std::optional<LongestMatch> longest_correct(const std::vector<Sample>& manifest,
                                                   const std::vector<Prediction>& predictions,
                                                   Channel channel = Channel::Manchu) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.sample_id, &p);
  std::optional<LongestMatch> best;
  for (const auto& s : manifest) {
    auto it = by_id.find(s.id);
    if (it == by_id.end() || it->second->text(channel) != s.text(channel)) continue;
    const auto len = utf8::decode(s.text(channel)).size();
    if (!best || len > best->length || (len == best->length && s.id < best->sample_id)) best = LongestMatch{s.id, len};
  }
  return best;
}

inline std::string codepoint_label(char32_t c) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(c));
  return buf;
}

/// Rows: characters with errors; columns: every replacement character seen,
/// then DEL and INS. Sorted by codepoint throughout.
inline std::string confusion_csv(const ConfusionTable& table) {
  std::set<char32_t> replacements;
  for (const auto& [c, e] : table.per_char)
    for (const auto& [r, n] : e.substitutions) replacements.insert(r);
  std::string out = "truth";
  for (auto r : replacements) out += "," + utf8::encode(r);
  out += ",DEL,INS\n";
  for (const auto& [c, e] : table.per_char) {
    out += utf8::encode(c);
    for (auto r : replacements) {
      auto it = e.substitutions.find(r);
      out += "," + std::to_string(it == e.substitutions.end() ? 0 : it->second);
    }
    out += "," + std::to_string(e.deletions) + "," + std::to_string(e.insertions) + "\n";
  }
  return out;
}

inline nlohmann::ordered_json to_json(const ConcentrationReport& r, const TransliterationTable* table = nullptr) {
  nlohmann::ordered_json top = nlohmann::ordered_json::array();
  for (const auto& s : r.top_k) {
    nlohmann::ordered_json e = {{"char", utf8::encode(s.character)}, {"codepoint", codepoint_label(s.character)}};
    if (table) {
      if (auto idx = table->match_glyphs(std::u32string(1, s.character), 0); idx >= 0)
        e["roman"] = utf8::encode(table->entries()[static_cast<std::size_t>(idx)].token);
    }
    e["errors"] = s.errors;
    e["share"] = round6(s.share);
    top.push_back(std::move(e));
  }
  return {{"k", r.k},
          {"view", to_string(r.view)},
          {"attribution", "substitutions and deletions charge the ground-truth character; insertions charge the inserted character"},
          {"totalErrors", r.total_errors},
          {"topK", top},
          {"concentration", round6(r.concentration)}};
}

inline nlohmann::ordered_json to_json(const std::optional<LongestMatch>& m) {
  if (!m) return {{"found", false}};
  return {{"found", true}, {"id", m->sample_id}, {"length", m->length}};
}

/// Writes confusion.csv and concentration.json (and longest.json when
/// given) into `dir`. Identical inputs give identical bytes.
inline void export_analysis(const std::string& dir, const ConfusionTable& table,
                            const std::optional<ConcentrationReport>& report,
                            const std::optional<std::optional<LongestMatch>>& longest = std::nullopt,
                            const TransliterationTable* translit = nullptr) {
  write_file_atomic(dir + "/confusion.csv", confusion_csv(table));
  nlohmann::ordered_json conc = report ? to_json(*report, translit)
                                       : nlohmann::ordered_json{{"totalErrors", 0}, {"topK", nlohmann::ordered_json::array()}, {"concentration", 0}};
  write_file_atomic(dir + "/concentration.json", conc.dump(2) + "\n");
  if (longest) write_file_atomic(dir + "/longest.json", to_json(*longest).dump(2) + "\n");
}

}  // namespace manchu_ocr
