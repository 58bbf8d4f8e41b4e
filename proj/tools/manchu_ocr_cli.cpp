// manchu-ocr: command-line front end for the toolkit.
//
// Exit codes: 0 ok, 1 other failure, 2 config/usage, 3 I/O, 4 transport.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "manchu_ocr/pipeline.hpp"

namespace mo = manchu_ocr;

namespace {

int exit_code(mo::ErrorKind kind) {
  switch (kind) {
    case mo::ErrorKind::BadConfig:
    case mo::ErrorKind::Spec:
    case mo::ErrorKind::TableFormat: return 2;
    case mo::ErrorKind::Io: return 3;
    case mo::ErrorKind::Transport:
    case mo::ErrorKind::Timeout: return 4;
    default: return 1;
  }
}

std::vector<std::vector<mo::RomanText>> parse_page_words(const std::string& spec, const mo::TransliterationTable& table) {
  // columns separated by '|', words by whitespace
  std::vector<std::vector<mo::RomanText>> columns(1);
  std::string word;
  auto flush = [&] {
    if (!word.empty()) columns.back().push_back(mo::RomanText::parse(word, table));
    word.clear();
  };
  for (char c : spec) {
    if (c == '|') {
      flush();
      columns.emplace_back();
    } else if (c == ' ' || c == '\t' || c == ',') {
      flush();
    } else {
      word += c;
    }
  }
  flush();
  return columns;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manchu OCR toolkit: synthetic data, preprocessing, segmentation, evaluation and error analysis"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "toolkit config JSON");
  app.add_option("--jobs", jobs, "worker threads for reentrant recognizers")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "root seed (overrides the config)");

  auto* gen = app.add_subcommand("gen", "render a synthetic word-image dataset");
  std::string gen_lexicon = mo::default_data_dir() + "/lexicon.txt";
  std::vector<std::string> gen_atlases;
  std::string gen_out;
  std::optional<std::size_t> gen_count;
  gen->add_option("--lexicon", gen_lexicon, "lexicon file, one romanized word per line");
  gen->add_option("--atlas", gen_atlases, "glyph atlas directory (repeatable)");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--count", gen_count, "number of samples (overrides the spec)");

  auto* prep = app.add_subcommand("prep", "preprocess word images");
  std::vector<std::string> prep_inputs;
  std::string prep_out;
  prep->add_option("inputs", prep_inputs, "PNG files or directories")->required();
  prep->add_option("--out", prep_out, "output directory")->required();

  auto* seg = app.add_subcommand("segment", "split a page image into word crops");
  std::string seg_page, seg_out;
  seg->add_option("--page", seg_page, "page PNG")->required();
  seg->add_option("--out", seg_out, "output directory")->required();

  auto* page = app.add_subcommand("page", "compose a synthetic page from romanized words");
  std::string page_words, page_atlas, page_out;
  page->add_option("--words", page_words, "words; columns separated by '|'")->required();
  page->add_option("--atlas", page_atlas, "glyph atlas directory")->required();
  page->add_option("--out", page_out, "output PNG")->required();

  auto* eval = app.add_subcommand("eval", "run a recognizer over a manifest and score it");
  std::string eval_manifest, eval_recognizer = "baseline", eval_out, eval_replay;
  std::optional<std::size_t> eval_limit;
  std::uint64_t eval_sample_seed = 0;
  bool eval_no_timing = false;
  eval->add_option("--manifest", eval_manifest, "manifest.jsonl")->required();
  eval->add_option("--recognizer", eval_recognizer, "recognizer id from the config");
  eval->add_option("--out", eval_out, "run directory")->required();
  eval->add_option("--limit", eval_limit, "evaluate a seeded subset of N samples");
  eval->add_option("--sample-seed", eval_sample_seed, "seed for --limit");
  eval->add_flag("--no-timing", eval_no_timing, "record zero latency for byte-identical reruns");
  eval->add_option("--replay", eval_replay, "score stored predictions instead of recognizing");

  auto* analyze = app.add_subcommand("analyze", "per-character error analysis");
  std::string an_manifest, an_predictions, an_out, an_channel = "manchu";
  std::size_t an_k = 3;
  analyze->add_option("--manifest", an_manifest, "manifest.jsonl")->required();
  analyze->add_option("--predictions", an_predictions, "predictions.jsonl")->required();
  analyze->add_option("--out", an_out, "output directory")->required();
  analyze->add_option("--k", an_k, "top-k characters for concentration")->check(CLI::PositiveNumber);
  analyze->add_option("--channel", an_channel, "manchu or roman")->check(CLI::IsMember({"manchu", "roman"}));

  auto* compare = app.add_subcommand("compare", "compare run records side by side");
  std::vector<std::string> cmp_runs;
  std::string cmp_out;
  compare->add_option("runs", cmp_runs, "run.json files (at least two)")->required();
  compare->add_option("--out", cmp_out, "output directory")->required();

  auto* atlas = app.add_subcommand("atlas", "export a built-in demo glyph atlas");
  std::string atlas_style = "demo-a", atlas_out;
  atlas->add_option("--style", atlas_style, "demo-a or demo-b");
  atlas->add_option("--out", atlas_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    auto config = mo::load_config(config_path);
    if (seed) config.seed = *seed;
    const auto table = mo::load_table(config.table_path);

    if (*gen) {
      auto spec = config.gen_spec();
      if (seed) spec.seed = *seed;
      if (gen_count) spec.sample_count = *gen_count;
      if (gen_atlases.empty())
        gen_atlases = {mo::default_data_dir() + "/atlas/demo-a", mo::default_data_dir() + "/atlas/demo-b"};
      spec.validate();
      const auto sum = mo::cmd_gen(gen_lexicon, gen_atlases, spec, table, gen_out);
      std::cout << "wrote " << sum.rows << " samples to " << sum.manifest_path << "\n";
      for (const auto& [split, n] : sum.per_split) std::cout << "  split " << split << ": " << n << "\n";
      for (const auto& [font, n] : sum.per_font) std::cout << "  font " << font << ": " << n << "\n";
      std::cout << "manifest sha256 " << sum.manifest_hash << "\n";
    } else if (*prep) {
      const auto n = mo::cmd_prep(prep_inputs, config.preprocess, prep_out);
      std::cout << "preprocessed " << n << " images into " << prep_out << "\n";
    } else if (*seg) {
      const auto r = mo::cmd_segment(seg_page, config.segment, config.preprocess, seg_out);
      std::cout << "found " << r.words.size() << " words";
      if (r.inverted_input) std::cout << " (input was light-on-dark, inverted)";
      std::cout << "\n";
    } else if (*page) {
      const auto atlas_data = mo::load_atlas(page_atlas);
      const auto composed = mo::compose_page(parse_page_words(page_words, table), table, atlas_data, mo::PageLayout{},
                                             config.gen_spec().glyph_overlap);
      mo::write_png(page_out, composed.page);
      std::cout << "composed " << composed.words.size() << " words into " << page_out << "\n";
    } else if (*eval) {
      mo::EvalOptions opts;
      opts.manifest_path = eval_manifest;
      opts.out_dir = eval_out;
      opts.limit = eval_limit;
      opts.sample_seed = eval_sample_seed;
      opts.jobs = jobs;
      opts.timing = !eval_no_timing;
      opts.replay_predictions = eval_replay;
      const auto rec = mo::cmd_eval(config, eval_recognizer, opts, table);
      std::cout << "run " << rec.run_id << " recognizer " << rec.recognizer_id << " on " << rec.manchu.sample_count
                << " samples\n"
                << "  manchu: accuracy " << mo::fixed(rec.manchu.word_accuracy, 1) << "%  CER "
                << mo::fixed(rec.manchu.mean_cer, 4) << "  F1 " << mo::fixed(rec.manchu.mean_f1, 3) << "  latency "
                << mo::fixed(rec.manchu.mean_latency, 3) << "s\n"
                << "  roman:  accuracy " << mo::fixed(rec.roman.word_accuracy, 1) << "%  CER "
                << mo::fixed(rec.roman.mean_cer, 4) << "  F1 " << mo::fixed(rec.roman.mean_f1, 3) << "\n";
      if (rec.failures) std::cout << "  " << rec.failures << " samples failed in transport\n";
    } else if (*analyze) {
      const auto r = mo::cmd_analyze(an_manifest, an_predictions, an_out, an_k, mo::parse_channel(an_channel), &table);
      std::cout << r.table.total_errors << " attributed errors\n";
      if (r.concentration) {
        for (const auto& e : r.concentration->top_k)
        {
          std::string roman = "?";
          if (const auto t = table.match_glyphs(std::u32string(1, e.character), 0); t >= 0)
            roman = mo::utf8::encode(table.entries()[static_cast<std::size_t>(t)].token);
          std::cout << "  " << mo::codepoint_label(e.character) << " (" << roman << ") " << mo::fixed(e.share, 1) << "%\n";
        }
        std::cout << "  top-" << an_k << " concentration " << mo::fixed(r.concentration->concentration, 1) << "%\n";
      }
      if (r.longest) std::cout << "longest correct: " << r.longest->sample_id << " (" << r.longest->length << " chars)\n";
    } else if (*compare) {
      const auto c = mo::cmd_compare(cmp_runs, cmp_out);
      std::cout << c.text;
    } else if (*atlas) {
      for (const auto& style : mo::demo_font_styles()) {
        if (style.font_id != atlas_style) continue;
        mo::save_atlas(mo::make_demo_atlas(table, style), atlas_out);
        std::cout << "wrote atlas " << style.font_id << " to " << atlas_out << "\n";
        return 0;
      }
      throw mo::Error(mo::ErrorKind::BadConfig, "unknown demo style '" + atlas_style + "'");
    }
  } catch (const mo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
