#include <fstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "manchu_ocr/recognizers.hpp"
#include "test_support.hpp"

using namespace manchu_ocr;
using test_support::table;

namespace {

RecognizerDescriptor fake(std::vector<std::string> extra, double timeout = 5.0) {
  RecognizerDescriptor d;
  d.id = "fake";
  d.kind = RecognizerKind::Subprocess;
  d.command = {FAKE_RECOGNIZER};
  d.command.insert(d.command.end(), extra.begin(), extra.end());
  d.timeout_seconds = timeout;
  return d;
}

std::size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST(ParseOutput, CanonicalRoundTrip) {
  for (auto [m, r] : {std::pair{"ᠠᠮᠠᠯᠠ", "AMALA"}, {"", ""}, {"ᡶᡝ", "FE"}}) {
    const auto p = parse_output(format_output(m, r));
    EXPECT_EQ(p.manchu, m);
    EXPECT_EQ(p.roman, r);
    EXPECT_FALSE(p.malformed);
  }
}

TEST(ParseOutput, NoisyAnswers) {
  struct Case {
    const char* text;
    const char* manchu;
    const char* roman;
    bool malformed;
  };
  const Case cases[] = {
      {"Sure! Here it is:\nManchu: ᠠᠮᠠᠯᠠ\nRoman: AMALA\nHope that helps.", "ᠠᠮᠠᠯᠠ", "AMALA", false},
      {"Manchu:ᠠᠮᠠᠯᠠ\r\nRoman:AMALA\r\n", "ᠠᠮᠠᠯᠠ", "AMALA", false},
      {"Roman: AMALA\nManchu: ᠠᠮᠠᠯᠠ", "ᠠᠮᠠᠯᠠ", "AMALA", false},
      {"Manchu: ᠠᠮᠠᠯᠠ (Roman: guess)\nRoman: AMALA", "ᠠᠮᠠᠯᠠ (Roman: guess)", "AMALA", false},
      {"Manchu: ᠠᠮᠠᠯᠠ Roman: AMALA", "ᠠᠮᠠᠯᠠ Roman: AMALA", "AMALA", false},
      {"Manchu:\nRoman:", "", "", false},
      {"Manchu: ᠠᠮᠠᠯᠠ", "ᠠᠮᠠᠯᠠ", "", true},
      {"Roman: AMALA", "", "AMALA", true},
      {"", "", "", true},
      {"I cannot read this image.", "", "", true},
      {"manchu: ᠠᠮᠠᠯᠠ\nroman: AMALA", "", "", true},
      {"\n\n\nManchu:   ᠪᡳᡨᡥᡝ   \n\nRoman:\tBITHE\t\n", "ᠪᡳᡨᡥᡝ", "BITHE", false},
      {"Manchu: ᠠ\nRoman: A\nManchu: ᠮ\nRoman: M", "ᠠ", "A", false},
      {"```\nManchu: ᠮᠣᡵᡳᠨ\nRoman: MORIN\n```", "ᠮᠣᡵᡳᠨ", "MORIN", false},
      {"**Manchu:** ᠮᠣᡵᡳᠨ\n**Roman:** MORIN", "** ᠮᠣᡵᡳᠨ", "** MORIN", false},
      {"Manchu:ᠰᡳ", "ᠰᡳ", "", true},
      {"Manchu: \xff\xfe\nRoman: \xc3", "\xff\xfe", "\xc3", false},
      {"Roman:", "", "", true},
      {"ManchuRoman:", "", "", true},
      {"The answer is Manchu: ᡝᡵᡝ and Roman: ERE.", "ᡝᡵᡝ and Roman: ERE.", "ERE.", false},
  };
  static_assert(std::size(cases) == 20);
  for (const auto& c : cases) {
    const auto p = parse_output(c.text);
    EXPECT_EQ(p.manchu, c.manchu) << c.text;
    EXPECT_EQ(p.roman, c.roman) << c.text;
    EXPECT_EQ(p.malformed, c.malformed) << c.text;
  }
}

TEST(Descriptor, JsonValidation) {
  const auto d = recognizer_from_json(nlohmann::json::parse(R"({"id": "x", "kind": "subprocess", "command": "echo hi"})"));
  EXPECT_EQ(d.command, (std::vector<std::string>{"/bin/sh", "-c", "echo hi"}));
  EXPECT_FALSE(d.reentrant);
  const auto b = recognizer_from_json(nlohmann::json::parse(R"({"id": "b", "lexicon": "l.txt", "atlases": ["a"]})"), "/base");
  EXPECT_EQ(b.lexicon, "/base/l.txt");
  EXPECT_EQ(b.atlases[0], "/base/a");
  EXPECT_TRUE(b.reentrant);
  for (const char* bad : {R"({"id": "x", "kind": "grpc"})", R"({"id": "x", "kind": "subprocess"})",
                          R"({"id": "x", "kind": "http"})", R"({"id": "x"})", R"({"id": "", "manifest": "m"})",
                          R"({"id": "x", "manifest": "m", "timeoutSeconds": 0})"}) {
    try {
      recognizer_from_json(nlohmann::json::parse(bad));
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::BadConfig) << bad;
    }
  }
}

TEST(Baseline, FeaturesAndNearestNeighbour) {
  Raster img(32, 240, 255);
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 16; ++x) img.at(x, y) = 0;
  const auto f = extract_features(img, 16, 120);
  EXPECT_EQ(hamming(f, f), 0u);
  EXPECT_EQ(hamming(f, extract_features(Raster(32, 240, 255), 16, 120)), 8u * 60u);
  EXPECT_EQ(hamming(f, extract_features(invert(img), 16, 120)), 16u * 120u);
}

TEST(Baseline, RecognizesItsOwnTemplates) {
  const auto lex = parse_lexicon("AMALA\nBITHE\nMORIN\nSI\nFERGUWEBURAKŪNGGE\n", table());
  const std::vector<GlyphAtlas> atlases{make_demo_atlas(table(), demo_font_styles()[0]),
                                        make_demo_atlas(table(), demo_font_styles()[1])};
  const PreprocessConfig prep;
  BaselineRecognizer rec("baseline", build_template_index(lex, atlases, table(), prep), table());
  EXPECT_EQ(rec.index().entries.size(), 10u);
  for (const auto& w : lex.words)
    for (const auto& a : atlases) {
      // generated samples are light-on-dark; preprocessing flips them back
      const auto img = preprocess(invert(compose_word(w, table(), a)), prep);
      const auto p = recognize(rec, "x", img);
      EXPECT_EQ(p.roman, w.utf8());
      EXPECT_EQ(p.manchu, roman_to_manchu(w, table()).utf8());
      EXPECT_FALSE(p.malformed);
    }
}

TEST(Subprocess, FixedReplyAndFraming) {
  SubprocessRecognizer rec(fake({"--size"}));
  for (auto [w, h] : {std::pair{64, 480}, {3, 7}, {200, 1}}) {
    const auto p = recognize(rec, "s", Raster(w, h, 200));
    EXPECT_EQ(p.manchu, std::to_string(w) + "x" + std::to_string(h));
    EXPECT_EQ(p.roman, "AMALA");
    EXPECT_TRUE(p.error.empty());
  }
}

TEST(Subprocess, GarbageIsMalformedNotFatal) {
  SubprocessRecognizer rec(fake({"--garbage"}));
  const auto p = recognize(rec, "s", Raster(8, 8));
  EXPECT_TRUE(p.malformed);
  EXPECT_TRUE(p.error.empty());
  EXPECT_EQ(p.manchu, "");
}

TEST(Subprocess, ChildStaysAliveAcrossRequests) {
  test_support::TempDir dir("starts");
  SubprocessRecognizer rec(fake({"--starts-file", dir / "starts"}));
  for (int i = 0; i < 5; ++i) EXPECT_EQ(recognize(rec, "s", Raster(8, 8)).roman, "AMALA");
  EXPECT_EQ(count_lines(dir / "starts"), 1u);
}

TEST(Subprocess, TimeoutFailsSampleThenRestarts) {
  test_support::TempDir dir("timeout");
  SubprocessRecognizer slow(fake({"--sleep-ms", "2000", "--starts-file", dir / "starts"}, 0.2));
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = recognize(slow, "s", Raster(8, 8));
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(2));
  ASSERT_FALSE(p.error.empty());
  EXPECT_EQ(p.error, to_string(ErrorKind::Timeout));
  EXPECT_EQ(p.manchu, "");
  recognize(slow, "s", Raster(8, 8));
  EXPECT_EQ(count_lines(dir / "starts"), 2u);
}

TEST(Subprocess, CrashedChildIsRestarted) {
  test_support::TempDir dir("crash");
  SubprocessRecognizer rec(fake({"--die-after", "2", "--starts-file", dir / "starts"}));
  EXPECT_TRUE(recognize(rec, "a", Raster(8, 8)).error.empty());
  EXPECT_TRUE(recognize(rec, "b", Raster(8, 8)).error.empty());
  const auto third = recognize(rec, "c", Raster(8, 8));
  ASSERT_FALSE(third.error.empty());
  EXPECT_EQ(third.error, to_string(ErrorKind::Transport));
  EXPECT_TRUE(recognize(rec, "d", Raster(8, 8)).error.empty());
  EXPECT_EQ(count_lines(dir / "starts"), 2u);
}

TEST(Subprocess, MissingExecutableIsTransportFailure) {
  auto d = fake({});
  d.command = {"/nonexistent/recognizer"};
  SubprocessRecognizer rec(d);
  const auto p = recognize(rec, "s", Raster(8, 8));
  ASSERT_FALSE(p.error.empty());
}

class HttpFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/ocr", [](const httplib::Request& req, httplib::Response& res) {
      if (req.get_header_value("Content-Type") != "image/png") {
        res.status = 415;
        return;
      }
      const auto img = decode_png(std::vector<std::uint8_t>(req.body.begin(), req.body.end()));
      res.set_content(format_output("ᠰᡳ", std::to_string(img.width())), "text/plain");
    });
    server_.Post("/slow", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1500));
      res.set_content("Manchu:x\nRoman:y", "text/plain");
    });
    server_.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  RecognizerDescriptor desc(const std::string& path, double timeout = 5.0) {
    RecognizerDescriptor d;
    d.id = "h";
    d.kind = RecognizerKind::Http;
    d.endpoint = "http://127.0.0.1:" + std::to_string(port_) + path;
    d.timeout_seconds = timeout;
    return d;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpFixture, PostsPngAndParsesBody) {
  HttpRecognizer rec(desc("/ocr"));
  const auto p = recognize(rec, "s", Raster(37, 5));
  EXPECT_EQ(p.manchu, "ᠰᡳ");
  EXPECT_EQ(p.roman, "37");
}

TEST_F(HttpFixture, FailuresAreClassified) {
  HttpRecognizer slow(desc("/slow", 0.3));
  auto p = recognize(slow, "s", Raster(4, 4));
  ASSERT_FALSE(p.error.empty());
  EXPECT_EQ(p.error, to_string(ErrorKind::Timeout));
  HttpRecognizer broken(desc("/broken"));
  p = recognize(broken, "s", Raster(4, 4));
  ASSERT_FALSE(p.error.empty());
  EXPECT_EQ(p.error, to_string(ErrorKind::Transport));
}

TEST(Http, OnlyPlainHttpEndpoints) {
  RecognizerDescriptor d;
  d.id = "h";
  d.kind = RecognizerKind::Http;
  d.endpoint = "https://example.org/ocr";
  EXPECT_THROW(HttpRecognizer{d}, Error);
  d.endpoint = "http://127.0.0.1:1/ocr";  // nothing listens on port 1
  HttpRecognizer rec(d);
  const auto p = recognize(rec, "s", Raster(4, 4));
  ASSERT_FALSE(p.error.empty());
}
