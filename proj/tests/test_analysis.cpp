#include <random>

#include <gtest/gtest.h>

#include "manchu_ocr/analysis.hpp"
#include "test_support.hpp"

using namespace manchu_ocr;
using test_support::table;
using K = EditOp::Kind;

namespace {

std::u32string random_word(std::mt19937& gen, int max_len) {
  static const std::u32string alphabet = U"ᠠᡝᡳᠣᠮ";
  std::uniform_int_distribution<int> len(0, max_len), sym(0, static_cast<int>(alphabet.size()) - 1);
  std::u32string s;
  for (int n = len(gen); n > 0; --n) s += alphabet[static_cast<std::size_t>(sym(gen))];
  return s;
}

char32_t glyph(const char* roman) { return roman_to_manchu(roman, table()).codepoints().at(0); }

Sample sample(std::string id, std::string manchu) {
  Sample s;
  s.id = std::move(id);
  s.manchu = std::move(manchu);
  return s;
}

Prediction prediction(std::string id, std::string manchu) {
  Prediction p;
  p.sample_id = std::move(id);
  p.manchu = std::move(manchu);
  return p;
}

std::string fixture(const std::string& rel) { return test_support::data_dir() + "/fixtures/" + rel; }

}  // namespace

TEST(Align, MinimalAndReconstructsBothStrings) {
  std::mt19937 gen(31);
  for (int i = 0; i < 3000; ++i) {
    const auto p = random_word(gen, 9), t = random_word(gen, 9);
    const auto ops = align(p, t);
    ASSERT_EQ(edit_cost(ops), levenshtein(p, t));
    std::u32string rp, rt;
    for (const auto& op : ops) {
      if (op.kind != K::Insert) rt += op.truth;
      if (op.kind != K::Delete) rp += op.predicted;
      if (op.kind == K::Match) {
        ASSERT_EQ(op.truth, op.predicted);
      }
      if (op.kind == K::Substitute) {
        ASSERT_NE(op.truth, op.predicted);
      }
    }
    ASSERT_EQ(rp, p);
    ASSERT_EQ(rt, t);
  }
}

TEST(Align, BacktracePreference) {
  EXPECT_EQ(align(U"B", U"AB"), (std::vector<EditOp>{{K::Delete, U'A', 0}, {K::Match, U'B', U'B'}}));
  EXPECT_EQ(align(U"AC", U"AB"), (std::vector<EditOp>{{K::Match, U'A', U'A'}, {K::Substitute, U'B', U'C'}}));
  EXPECT_EQ(align(U"AA", U"A"), (std::vector<EditOp>{{K::Insert, 0, U'A'}, {K::Match, U'A', U'A'}}));
  // substitution is preferred over a delete+insert pair of equal cost
  EXPECT_EQ(align(U"X", U"Y"), (std::vector<EditOp>{{K::Substitute, U'Y', U'X'}}));
  EXPECT_TRUE(align(U"", U"").empty());
}

TEST(Confusion, ChargesAndTotals) {
  ConfusionTable t;
  t.add(align(U"ᠠᠮᠠ", U"ᠠᠮᠠᠯᠠ"));  // two deletions
  t.add(align(U"ᡝᠮᠠᠯᠠ", U"ᠠᠮᠠᠯᠠ"));  // one substitution
  t.add(align(U"ᠠᠮᠠᠯᠠᡳ", U"ᠠᠮᠠᠯᠠ"));  // one insertion
  EXPECT_EQ(t.total_errors, 4u);
  std::size_t sum = 0;
  for (const auto& [c, e] : t.per_char) sum += e.total;
  EXPECT_EQ(sum, t.total_errors);
  EXPECT_EQ(t.per_char[U'ᠠ'].substitutions[U'ᡝ'], 1u);
  EXPECT_EQ(t.per_char[U'ᡳ'].insertions, 1u);
  EXPECT_EQ(t.per_char[U'ᠠ'].deletions + t.per_char[U'ᠯ'].deletions, 2u);
}

TEST(Confusion, MergeIsAssociativeAndCommutative) {
  std::mt19937 gen(5);
  auto part = [&] {
    ConfusionTable t;
    for (int i = 0; i < 30; ++i) t.add(align(random_word(gen, 6), random_word(gen, 6)));
    return t;
  };
  const auto a = part(), b = part(), c = part();
  auto dump = [](const ConfusionTable& t) { return confusion_csv(t) + std::to_string(t.total_errors); };
  ConfusionTable ab = a, ab_c, bc = b, a_bc = a, ba = b;
  ab.merge(b);
  ab_c = ab;
  ab_c.merge(c);
  bc.merge(c);
  a_bc.merge(bc);
  ba.merge(a);
  EXPECT_EQ(dump(ab_c), dump(a_bc));
  EXPECT_EQ(dump(ab), dump(ba));
}

TEST(Concentration, TopKSharesAndViews) {
  ConfusionTable t;
  t.add(align(U"ᡝᡝᡝ", U"ᠠᠠᠠ"));  // 3 x A->E
  t.add(align(U"ᠮ", U""));        // insertion of M
  t.add(align(U"", U"ᠯ"));        // deletion of L
  const auto all = concentration(t, 2);
  ASSERT_EQ(all.top_k.size(), 2u);
  EXPECT_EQ(all.top_k[0].character, U'ᠠ');
  EXPECT_DOUBLE_EQ(all.top_k[0].share, 60.0);
  EXPECT_EQ(all.top_k[1].character, U'ᠮ');  // tie with L broken by codepoint
  EXPECT_DOUBLE_EQ(all.concentration, 80.0);
  const auto no_ins = concentration(t, 5, AttributionView::ExcludeInsertions);
  EXPECT_EQ(no_ins.total_errors, 4u);
  EXPECT_EQ(no_ins.top_k.size(), 2u);
  EXPECT_DOUBLE_EQ(no_ins.top_k[0].share, 75.0);
  try {
    concentration(ConfusionTable{}, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoErrors);
  }
}

TEST(Accumulate, MissingPredictionAndLongest) {
  const std::vector<Sample> m{sample("a", "ᠠᠮᠠᠯᠠ"), sample("b", "ᠰᡳ"), sample("c", "ᠮᠣᡵᡳᠨ")};
  const std::vector<Prediction> p{prediction("a", "ᠠᠮᠠᠯᠠ"), prediction("b", "ᠰᡳ"), prediction("c", "ᠮᠣᡵᡳ")};
  EXPECT_EQ(accumulate(m, p).total_errors, 1u);
  const auto best = longest_correct(m, p);
  ASSERT_TRUE(best);
  EXPECT_EQ(best->sample_id, "a");
  EXPECT_EQ(best->length, 5u);
  EXPECT_FALSE(longest_correct(m, {prediction("a", ""), prediction("b", ""), prediction("c", "")}));
  try {
    accumulate(m, {p[0], p[1]});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingPrediction);
  }
}

TEST(Export, CsvLayoutAndJson) {
  ConfusionTable t;
  t.add(align(U"ᡝ", U"ᠠ"));
  t.add(align(U"ᠠᡳ", U"ᠠ"));
  EXPECT_EQ(confusion_csv(t), "truth,ᡝ,DEL,INS\nᠠ,1,0,0\nᡳ,0,0,1\n");
  const auto j = to_json(concentration(t, 3), &table());
  EXPECT_EQ(j["topK"][0]["codepoint"], "U+1820");
  EXPECT_EQ(j["topK"][0]["roman"], "A");
  EXPECT_EQ(j["view"], "all-errors");
  test_support::TempDir dir("export");
  export_analysis(dir.str(), t, concentration(t, 3), std::optional<LongestMatch>{});
  EXPECT_EQ(read_file(dir / "confusion.csv"), confusion_csv(t));
  EXPECT_NE(read_file(dir / "longest.json").find("\"found\": false"), std::string::npos);
}

// Bundled prediction files replay to the reference aggregates.
TEST(Fixtures, AggregatesReplay) {
  struct Row {
    const char* model;
    const char* split;
    const char* acc;
    const char* cer;
    const char* f1;
    const char* latency;
  };
  const Row rows[] = {
      {"llama-3.2-11b", "validation", "98.3", "0.0024", "0.998", "14.7"},
      {"qwen2.5-vl-7b", "validation", "87.5", "0.0264", "0.978", "1.3"},
      {"qwen2.5-vl-3b", "validation", "84.4", "0.0329", "0.973", "1.2"},
      {"llama-3.2-11b", "test", "93.1", "0.0219", "0.983", "8.9"},
      {"qwen2.5-vl-7b", "test", "43.1", "0.2541", "0.789", "0.9"},
      {"qwen2.5-vl-3b", "test", "23.9", "0.3682", "0.709", "0.7"},
  };
  for (const auto& r : rows) {
    const auto manifest = read_manifest(fixture(std::string(r.split) + "_manifest.jsonl"));
    const auto preds = read_predictions(fixture("predictions/" + std::string(r.model) + "_" + r.split + ".jsonl"));
    ASSERT_EQ(preds.size(), manifest.size());
    std::vector<SampleScore> scores;
    for (std::size_t i = 0; i < manifest.size(); ++i) scores.push_back(score_sample(preds[i], manifest[i], Channel::Manchu));
    const auto rep = aggregate(scores, Channel::Manchu);
    EXPECT_EQ(fixed(rep.word_accuracy, 1), r.acc) << r.model << " " << r.split;
    EXPECT_EQ(fixed(rep.mean_cer, 4), r.cer) << r.model << " " << r.split;
    EXPECT_EQ(fixed(rep.mean_f1, 3), r.f1) << r.model << " " << r.split;
    EXPECT_EQ(fixed(rep.mean_latency, 1), r.latency) << r.model << " " << r.split;
  }
}

TEST(Fixtures, ConcentrationReplay) {
  struct Row {
    const char* model;
    const char* chars[3];
    const char* shares[3];
    const char* total;
  };
  const Row rows[] = {
      {"llama-3.2-11b", {"A", "E", "M"}, {"32.4", "14.7", "8.8"}, "55.9"},
      {"qwen2.5-vl-7b", {"A", "I", "N"}, {"23.6", "12.6", "8.7"}, "44.9"},
      {"qwen2.5-vl-3b", {"A", "I", "D"}, {"27.2", "11.9", "6.2"}, "45.3"},
  };
  const auto manifest = read_manifest(fixture("test_manifest.jsonl"));
  for (const auto& r : rows) {
    const auto preds = read_predictions(fixture("predictions/" + std::string(r.model) + "_test.jsonl"));
    const auto rep = concentration(accumulate(manifest, preds), 3);
    ASSERT_EQ(rep.top_k.size(), 3u);
    for (int i = 0; i < 3; ++i) {
      EXPECT_EQ(rep.top_k[static_cast<std::size_t>(i)].character, glyph(r.chars[i])) << r.model << " " << i;
      EXPECT_EQ(fixed(rep.top_k[static_cast<std::size_t>(i)].share, 1), r.shares[i]) << r.model << " " << i;
    }
    EXPECT_EQ(fixed(rep.concentration, 1), r.total) << r.model;
  }
}
