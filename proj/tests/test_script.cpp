#include <random>
#include <string>

#include <gtest/gtest.h>

#include "manchu_ocr/script.hpp"
#include "manchu_ocr/synth.hpp"
#include "test_support.hpp"

using namespace manchu_ocr;
using test_support::table;

TEST(Transliteration, AmalaConvertsToFiveLetters) {
  EXPECT_EQ(roman_to_manchu("AMALA", table()).utf8(), "ᠠᠮᠠᠯᠠ");
  EXPECT_EQ(manchu_to_roman("ᠠᠮᠠᠯᠠ", table()).utf8(), "AMALA");
}

TEST(Transliteration, LongWordWithDigraphAndLongVowel) {
  const auto m = roman_to_manchu("FERGUWEBURAKŪNGGE", table());
  EXPECT_EQ(m.utf8(), "ᡶᡝᡵᡤᡠᠸᡝᠪᡠᡵᠠᡴᡡᠩᡤᡝ");
  EXPECT_EQ(m.size(), 16u);
  EXPECT_EQ(manchu_to_roman(m, table()).utf8(), "FERGUWEBURAKŪNGGE");
}

TEST(Transliteration, LowercaseInputIsCanonicalized) {
  EXPECT_EQ(RomanText::parse("amala", table()).utf8(), "AMALA");
  EXPECT_EQ(RomanText::parse("ferguweburakūngge", table()).utf8(), "FERGUWEBURAKŪNGGE");
  EXPECT_EQ(roman_to_manchu("šun", table()), roman_to_manchu("ŠUN", table()));
}

TEST(Transliteration, GreedyLongestMatchPrefersDigraphs) {
  const auto r = RomanText::parse("NGG", table());
  ASSERT_EQ(r.tokens().size(), 2u);
  EXPECT_EQ(table().entries()[r.tokens()[0]].token, U"NG");
  EXPECT_EQ(table().entries()[r.tokens()[1]].token, U"G");
  EXPECT_EQ(RomanText::parse("K'A", table()).tokens().size(), 2u);
}

TEST(Transliteration, UnknownTokenReportsPosition) {
  try {
    RomanText::parse("AMXLA", table());
    FAIL() << "expected UnknownToken";
  } catch (const PositionError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownToken);
    EXPECT_EQ(e.position(), 2u);
  }
  EXPECT_THROW(RomanText::parse("", table()), Error);
}

TEST(Transliteration, UnknownGlyphReportsPosition) {
  // U+1880 is in the block but not in the table
  try {
    manchu_to_roman("ᠠᢀ", table());
    FAIL() << "expected UnknownGlyph";
  } catch (const PositionError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownGlyph);
    EXPECT_EQ(e.position(), 1u);
  }
}

TEST(Transliteration, ManchuTextRejectsOtherScripts) {
  EXPECT_THROW(ManchuText::from_utf8("AMALA"), PositionError);
  EXPECT_THROW(ManchuText::from_utf8(""), Error);
  EXPECT_NO_THROW(ManchuText::from_utf8("ᠠ"));
}

TEST(Utf8, StrictDecodeRejectsMalformedInput) {
  EXPECT_THROW(utf8::decode("\xC3"), Error);
  EXPECT_THROW(utf8::decode("\xC0\xAF"), Error);
  EXPECT_THROW(utf8::decode("\xED\xA0\x80"), Error);
  EXPECT_EQ(utf8::decode("aŪᠠ"), std::u32string(U"aŪᠠ"));
  EXPECT_EQ(utf8::encode(utf8::decode("ᡶᡝᡵ")), "ᡶᡝᡵ");
}

TEST(Table, BundledTableIsBijectiveAtTokenLevel) {
  EXPECT_TRUE(validate_table(table()).empty());
  EXPECT_EQ(table().size(), 31u);
  EXPECT_EQ(table().version(), "mollendorff-1");
}

TEST(Table, ValidationFindsCollisions) {
  const auto t = parse_table("A\tU+1820\nA\tU+185D\nE\tU+1820\n");
  const auto v = validate_table(t);
  auto has = [&](const std::vector<TableViolation>& vs, TableViolation::Kind k) {
    return std::any_of(vs.begin(), vs.end(), [&](const auto& x) { return x.kind == k; });
  };
  EXPECT_TRUE(has(v, TableViolation::Kind::DuplicateToken));
  EXPECT_TRUE(has(v, TableViolation::Kind::AmbiguousGlyph));

  // tables built in code skip the parser's checks
  const TransliterationTable raw({{U"x", U"\u1873"}, {U"Q", U"A"}, {U"", U"\u1820"}}, "raw");
  const auto w = validate_table(raw);
  EXPECT_TRUE(has(w, TableViolation::Kind::NonCanonicalToken));
  EXPECT_TRUE(has(w, TableViolation::Kind::GlyphOutsideScript));
  EXPECT_TRUE(has(w, TableViolation::Kind::EmptyToken));
}

TEST(Table, ParseErrorsCarryLineNumbers) {
  try {
    parse_table("# header\nA\tU+1820\nB U+182A\n");
    FAIL() << "expected TableFormat";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TableFormat);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_table("A\tU+ZZZZ\n"), Error);
  EXPECT_THROW(parse_table("Q\tU+0041\n"), Error);
  EXPECT_EQ(parse_table("# version: v9\nA\tU+1820\n").version(), "v9");
}

// A string that tokenizes at all tokenizes to itself, so roman -> manchu ->
// roman is the identity on it. Some concatenations (N then G') do not parse.
TEST(TransliterationProperty, RomanRoundTripOnRandomTokenStrings) {
  std::mt19937 gen(11);
  const auto& es = table().entries();
  std::uniform_int_distribution<std::size_t> pick(0, es.size() - 1), len(1, 12);
  int parsed = 0;
  for (int iter = 0; iter < 2000; ++iter) {
    std::u32string word;
    for (std::size_t k = len(gen); k > 0; --k) word += es[pick(gen)].token;
    RomanText roman = RomanText::parse("A", table());
    try {
      roman = RomanText::parse(utf8::encode(word), table());
    } catch (const PositionError&) {
      continue;
    }
    ++parsed;
    const auto back = manchu_to_roman(roman_to_manchu(roman, table()), table());
    ASSERT_EQ(back.utf8(), utf8::encode(word));
  }
  EXPECT_GT(parsed, 1500);
}

TEST(TransliterationProperty, ManchuRoundTripOnLexicon) {
  const auto lex = load_lexicon(test_support::data_dir() + "/lexicon.txt", table());
  ASSERT_GE(lex.words.size(), 300u);
  for (const auto& w : lex.words) {
    const auto m = roman_to_manchu(w, table());
    EXPECT_EQ(roman_to_manchu(manchu_to_roman(m, table()), table()), m) << w.utf8();
  }
}

// Documented limitation of greedy digraphs: a plain N glyph followed by a G
// glyph romanizes to "NG", which parses back as the single NG letter.
TEST(TransliterationProperty, SeparateNAndGDoNotRoundTrip) {
  const auto m = ManchuText::from_utf8("ᠠᠨᡤᠠ");
  const auto r = manchu_to_roman(m, table());
  EXPECT_EQ(r.utf8(), "ANGA");
  EXPECT_NE(roman_to_manchu(r.utf8(), table()), m);
}
