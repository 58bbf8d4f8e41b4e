#include <map>
#include <set>

#include <gtest/gtest.h>

#include "manchu_ocr/synth.hpp"
#include "test_support.hpp"

using namespace manchu_ocr;
using test_support::table;

namespace {

const GlyphAtlas& atlas_a() {
  static const auto a = make_demo_atlas(table(), demo_font_styles()[0]);
  return a;
}
const GlyphAtlas& atlas_b() {
  static const auto b = make_demo_atlas(table(), demo_font_styles()[1]);
  return b;
}

Lexicon small_lexicon() { return parse_lexicon("AMALA\nBITHE\n# comment\n\nMORIN  # horse\nSI\n", table()); }

}  // namespace

TEST(Rng, SameSeedSameStreamDifferentStreamsDiffer) {
  Rng a(derive_seed(7, 3)), b(derive_seed(7, 3)), c(derive_seed(7, 4));
  std::vector<std::uint64_t> va, vb, vc;
  for (int i = 0; i < 50; ++i) va.push_back(a.next()), vb.push_back(b.next()), vc.push_back(c.next());
  EXPECT_EQ(va, vb);
  EXPECT_NE(va, vc);
}

TEST(Rng, UniformIntCoversRangeRoughlyEvenly) {
  Rng r(99);
  std::array<int, 7> hits{};
  for (int i = 0; i < 70000; ++i) ++hits[r.uniform_int(7)];
  for (int h : hits) EXPECT_NEAR(h, 10000, 500);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalHasUnitMoments) {
  Rng r(5);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal();
    s += v, s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Splits, LargestRemainderGivesExactCounts) {
  EXPECT_EQ(split_counts({{"train", 0.8}, {"val", 0.2}}, 1000), (std::vector<std::size_t>{800, 200}));
  EXPECT_EQ(split_counts({{"a", 1.0 / 3}, {"b", 1.0 / 3}, {"c", 1.0 / 3}}, 10), (std::vector<std::size_t>{4, 3, 3}));
  EXPECT_EQ(split_counts({{"a", 0.5}, {"b", 0.5}}, 3), (std::vector<std::size_t>{2, 1}));
  for (std::size_t n = 1; n < 300; n += 7) {
    const auto c = split_counts({{"a", 0.7}, {"b", 0.2}, {"c", 0.1}}, n);
    ASSERT_EQ(c[0] + c[1] + c[2], n);
    ASSERT_LE(std::abs(static_cast<double>(c[1]) - 0.2 * n), 1.0);
  }
}

TEST(Splits, AssignmentIsExactAndOrderIndependent) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < 1000; ++i) ids.push_back(sample_id(i));
  const auto s = assign_splits(ids, {{"train", 0.8}, {"val", 0.2}});
  EXPECT_EQ(std::count(s.begin(), s.end(), "train"), 800);
  EXPECT_EQ(std::count(s.begin(), s.end(), "val"), 200);

  std::vector<std::string> rev(ids.rbegin(), ids.rend());
  const auto sr = assign_splits(rev, {{"train", 0.8}, {"val", 0.2}});
  for (std::size_t i = 0; i < ids.size(); ++i) ASSERT_EQ(s[i], sr[ids.size() - 1 - i]);
}

TEST(Compose, StacksGlyphsWithOverlap) {
  const auto word = RomanText::parse("AMALA", table());
  const auto img = compose_word(word, table(), atlas_a(), 0.15);
  const int h = 24, step = h - static_cast<int>(std::lround(0.15 * h));
  EXPECT_EQ(img.height(), 4 * step + h);
  EXPECT_EQ(img.width(), 28);
  // word is one connected stroke from top to bottom
  const auto box = ink_bounds(img);
  ASSERT_TRUE(box);
  EXPECT_EQ(box->y, 0);
  EXPECT_EQ(box->y + box->h, img.height());

  const auto single = compose_word(RomanText::parse("A", table()), table(), atlas_a());
  EXPECT_EQ(single, *atlas_a().find(U"A", GlyphForm::Isolated));
}

TEST(Compose, FallsBackToIsolatedThenReportsMissingGlyph) {
  GlyphAtlas sparse;
  sparse.font_id = "sparse";
  sparse.glyphs[{U"A", GlyphForm::Isolated}] = *atlas_a().find(U"A", GlyphForm::Isolated);
  EXPECT_NO_THROW(compose_word(RomanText::parse("AA", table()), table(), sparse));
  try {
    compose_word(RomanText::parse("AM", table()), table(), sparse);
    FAIL();
  } catch (const MissingGlyphError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingGlyph);
    EXPECT_EQ(e.token(), U"M");
    EXPECT_EQ(e.form(), GlyphForm::Final);
  }
}

TEST(Compose, PositionalForms) {
  EXPECT_EQ(form_for_position(0, 1), GlyphForm::Isolated);
  EXPECT_EQ(form_for_position(0, 3), GlyphForm::Initial);
  EXPECT_EQ(form_for_position(1, 3), GlyphForm::Medial);
  EXPECT_EQ(form_for_position(2, 3), GlyphForm::Final);
}

TEST(Atlas, DemoFontsValidateAndRoundTrip) {
  EXPECT_TRUE(validate_atlas(atlas_a(), table()).empty());
  EXPECT_TRUE(validate_atlas(atlas_b(), table()).empty());
  EXPECT_EQ(atlas_a().glyphs.size(), table().entries().size() * 4);
  test_support::TempDir dir("atlas");
  save_atlas(atlas_b(), dir.str());
  const auto back = load_atlas(dir.str());
  EXPECT_EQ(back.font_id, "demo-b");
  EXPECT_EQ(back.glyphs, atlas_b().glyphs);
  // every token draws a distinct isolated glyph
  std::set<std::vector<std::uint8_t>> seen;
  for (const auto& e : table().entries()) {
    const auto px = atlas_a().find(e.token, GlyphForm::Isolated)->pixels();
    seen.emplace(px.begin(), px.end());
  }
  EXPECT_EQ(seen.size(), table().entries().size());
}

TEST(Atlas, ValidationFlagsGapsAndWidthOutliers) {
  GlyphAtlas a = atlas_a();
  a.glyphs.erase({U"O", GlyphForm::Isolated});
  a.glyphs[{U"E", GlyphForm::Medial}] = Raster(60, 24, 255);
  const auto problems = validate_atlas(a, table());
  EXPECT_EQ(problems.size(), 2u);
}

TEST(Lexicon, ParsesCommentsAndRejectsBadWords) {
  const auto lex = small_lexicon();
  ASSERT_EQ(lex.words.size(), 4u);
  EXPECT_EQ(lex.words[2].utf8(), "MORIN");
  EXPECT_THROW(parse_lexicon("AMALA\nAMALA\n", table()), Error);
  EXPECT_THROW(parse_lexicon("# nothing\n", table()), Error);
  try {
    parse_lexicon("AMALA\n\nAMXLA\n", table(), "lex.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Spec);
    EXPECT_NE(std::string(e.what()).find("lex.txt:3"), std::string::npos);
  }
}

TEST(Lexicon, BundledLexiconLoads) {
  const auto lex = load_lexicon(test_support::data_dir() + "/lexicon.txt", table());
  EXPECT_GE(lex.words.size(), 400u);
}

TEST(GenSpec, JsonRoundTripAndValidation) {
  const auto spec = gen_spec_from_json(nlohmann::ordered_json::parse(
      R"({"sampleCount": 10, "seed": 3, "noise": {"saltPepperProb": 0.02}, "splits": {"a": 0.5, "b": 0.5}})"));
  EXPECT_EQ(spec.sample_count, 10u);
  EXPECT_EQ(spec.noise.salt_pepper_prob, 0.02);
  EXPECT_EQ(gen_spec_from_json(to_json(spec)).splits, spec.splits);
  for (const char* bad : {R"({"sampleCount": 0})", R"({"splits": {"a": 0.5, "b": 0.4}})",
                          R"({"noise": {"saltPepperProb": 1.5}})", R"({"noise": {"rotationDegreesMax": 20}})",
                          R"({"glyphOverlap": 1.0})"}) {
    try {
      gen_spec_from_json(nlohmann::ordered_json::parse(bad));
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Spec) << bad;
    }
  }
}

TEST(Generate, DeterministicForSeedAndWellFormed) {
  GenSpec spec;
  spec.sample_count = 40;
  spec.seed = 11;
  spec.noise.salt_pepper_prob = 0.02;
  spec.noise.gaussian_sigma = 4;
  spec.noise.rotation_degrees_max = 2;
  const std::vector<GlyphAtlas> fonts{atlas_a(), atlas_b()};
  std::vector<Raster> imgs1, imgs2;
  const auto rows1 = generate(small_lexicon(), fonts, spec, table(), [&](const Sample&, const Raster& r) { imgs1.push_back(r); });
  const auto rows2 = generate(small_lexicon(), fonts, spec, table(), [&](const Sample&, const Raster& r) { imgs2.push_back(r); });
  EXPECT_EQ(rows1, rows2);
  EXPECT_EQ(imgs1, imgs2);
  std::set<std::string> seen_fonts;
  for (std::size_t i = 0; i < rows1.size(); ++i) {
    const auto& s = rows1[i];
    EXPECT_EQ(s.id, sample_id(i));
    EXPECT_EQ(s.image_path, "images/" + s.id + ".png");
    EXPECT_EQ(roman_to_manchu(s.roman, table()).utf8(), s.manchu);
    seen_fonts.insert(s.font_id);
  }
  EXPECT_EQ(seen_fonts.size(), 2u);

  spec.seed = 12;
  const auto rows3 = generate(small_lexicon(), fonts, spec, table(), nullptr);
  EXPECT_NE(rows1, rows3);
}

TEST(Generate, CleanSamplesAreLightOnDark) {
  GenSpec spec;
  spec.sample_count = 3;
  spec.fonts = {"demo-a"};
  generate(small_lexicon(), {atlas_a(), atlas_b()}, spec, table(), [&](const Sample& s, const Raster& r) {
    EXPECT_EQ(s.font_id, "demo-a");
    EXPECT_EQ(r, invert(compose_word(RomanText::parse(s.roman, table()), table(), atlas_a())));
  });
  spec.fonts = {"nope"};
  EXPECT_THROW(generate(small_lexicon(), {atlas_a()}, spec, table(), nullptr), Error);
}

TEST(Noise, SaltPepperRateAndZeroParamsIdentity) {
  Rng r(1);
  const Raster flat(200, 200, 255);
  EXPECT_EQ(add_noise(flat, NoiseParams{}, r), flat);
  NoiseParams p;
  p.salt_pepper_prob = 0.05;
  const auto noisy = add_noise(flat, p, r);
  const auto flipped = std::count(noisy.pixels().begin(), noisy.pixels().end(), std::uint8_t{0});
  EXPECT_NEAR(static_cast<double>(flipped) / flat.size(), 0.05, 0.005);
}

TEST(Noise, RotationKeepsSizeAndZeroAngleIsIdentity) {
  std::mt19937 gen(2);
  const auto img = test_support::bimodal_raster(gen, 30, 50);
  EXPECT_EQ(rotate(img, 0.0, 255), img);
  const auto rot = rotate(img, 5.0, 255);
  EXPECT_EQ(rot.width(), 30);
  EXPECT_EQ(rot.height(), 50);
}

TEST(Page, PlantedBoxesCoverEachWord) {
  const std::vector<std::vector<RomanText>> cols{{RomanText::parse("AMALA", table()), RomanText::parse("SI", table())},
                                                 {RomanText::parse("MORIN", table())}};
  const auto page = compose_page(cols, table(), atlas_a(), PageLayout{});
  ASSERT_EQ(page.words.size(), 3u);
  EXPECT_EQ(page.words[1].column, 0);
  EXPECT_EQ(page.words[1].row, 1);
  EXPECT_EQ(page.words[2].roman, "MORIN");
  for (const auto& w : page.words) {
    const auto crop = page.page.crop(w.box.x, w.box.y, w.box.w, w.box.h);
    EXPECT_EQ(ink_bounds(crop), (Box{0, 0, w.box.w, w.box.h}));
  }
}
