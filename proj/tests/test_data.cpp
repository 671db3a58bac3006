#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "test_util.hpp"
#include "zzd/data.hpp"
#include "zzd/error.hpp"

using namespace zzd;

namespace {

std::vector<std::string> numbered_sentences(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("Sentence " + std::to_string(i) + ".");
  return out;
}

std::vector<Chunk> labeled_chunks(int n, Label label, const std::string& prefix) {
  std::vector<Chunk> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({prefix + "#" + std::to_string(i), {"A.", "B.", "C."}, label,
                   label == Label::ai ? "gpt4" : "human"});
  }
  return out;
}

std::size_t count_label(const std::vector<Chunk>& chunks, Label label) {
  return std::count_if(chunks.begin(), chunks.end(), [&](const Chunk& c) { return c.label == label; });
}

std::string corpus_line(const std::string& id, const std::string& text, const std::string& label,
                        const std::string& source) {
  return R"({"id":")" + id + R"(","text":")" + text + R"(","label":")" + label + R"(","source_model":")" +
         source + R"(","dataset_id":"d"})";
}

}  // namespace

TEST_CASE("split_sentences on terminal punctuation") {
  CHECK(split_sentences("A cat sat. It slept! Why?") ==
        std::vector<std::string>{"A cat sat.", "It slept!", "Why?"});
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("   ").empty());
  CHECK(split_sentences("No terminal punctuation") == std::vector<std::string>{"No terminal punctuation"});
}

TEST_CASE("split_sentences keeps abbreviations") {
  CHECK(split_sentences("Dr. Smith left. He returned.") ==
        std::vector<std::string>{"Dr. Smith left.", "He returned."});
  CHECK(split_sentences("See e.g. Table one. Then stop.") ==
        std::vector<std::string>{"See e.g. Table one.", "Then stop."});
  CHECK(split_sentences("Made in the U.S. Then shipped.").size() == 1);
}

TEST_CASE("split_sentences handles closers and lowercase continuations") {
  CHECK(split_sentences("He said \"stop.\" Then left.") ==
        std::vector<std::string>{"He said \"stop.\"", "Then left."});
  CHECK(split_sentences("Version 2.5 shipped. 3 bugs remain.") ==
        std::vector<std::string>{"Version 2.5 shipped.", "3 bugs remain."});
  CHECK(split_sentences("Wait... what happened.") == std::vector<std::string>{"Wait... what happened."});
}

TEST_CASE("split_sentences round trips up to whitespace") {
  const std::string text = "First one here.  Second?\n\nThird! Fourth (aside.) Fifth.";
  const auto parts = split_sentences(text);
  std::string joined, squeezed;
  for (const auto& p : parts) joined += p;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) squeezed += c;
  std::string joined_squeezed;
  for (char c : joined)
    if (!std::isspace(static_cast<unsigned char>(c))) joined_squeezed += c;
  CHECK(joined_squeezed == squeezed);
}

TEST_CASE("make_chunks drop or keep the remainder") {
  const auto s7 = numbered_sentences(7);
  const auto train = make_chunks(s7, ChunkMode::train);
  REQUIRE(train.size() == 2);
  CHECK(train[0].sentences.size() == 3);
  CHECK(train[1].sentences[0] == "Sentence 3.");
  const auto infer = make_chunks(s7, ChunkMode::infer, {"doc", std::nullopt, ""});
  REQUIRE(infer.size() == 3);
  CHECK(infer[2].sentences.size() == 1);
  CHECK(infer[2].id == "doc#2");
  CHECK(infer[0].text() == "Sentence 0. Sentence 1. Sentence 2.");
  const auto s3 = numbered_sentences(3);
  CHECK(make_chunks(s3, ChunkMode::train).size() == 1);
  CHECK(make_chunks(s3, ChunkMode::infer).size() == 1);
  CHECK(make_chunks(numbered_sentences(2), ChunkMode::train).empty());
}

TEST_CASE("build_balanced samples an equal human share") {
  const auto ai = labeled_chunks(100, Label::ai, "a");
  const auto pool = labeled_chunks(1000, Label::human, "h");
  const auto out = build_balanced(ai, pool, 17);
  CHECK(out.size() == 200);
  CHECK(count_label(out, Label::ai) == 100);
  CHECK(count_label(out, Label::human) == 100);
  std::set<std::string> ids;
  for (const auto& c : out) ids.insert(c.id);
  CHECK(ids.size() == 200);

  const auto again = build_balanced(ai, pool, 17);
  REQUIRE(again.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(again[i].id == out[i].id);
  CHECK(build_balanced(ai, pool, 18)[0].id != out[0].id);

  const auto small = labeled_chunks(50, Label::human, "h");
  CHECK_THROWS_AS(build_balanced(ai, small, 1), DataError);
}

TEST_CASE("split_dataset sizes and stratification") {
  const auto hundred = labeled_chunks(100, Label::ai, "a");
  const auto s = split_dataset(hundred, {}, 3);
  CHECK(s.train.size() == 80);
  CHECK(s.val.size() == 10);
  CHECK(s.test.size() == 10);

  auto mixed = labeled_chunks(50, Label::ai, "a");
  const auto humans = labeled_chunks(50, Label::human, "h");
  mixed.insert(mixed.end(), humans.begin(), humans.end());
  const auto m = split_dataset(mixed, {}, 4);
  for (const auto* part : {&m.train, &m.val, &m.test}) {
    const auto diff = static_cast<long>(count_label(*part, Label::ai)) - static_cast<long>(count_label(*part, Label::human));
    CHECK(std::abs(diff) <= 1);
  }
  const auto m2 = split_dataset(mixed, {}, 4);
  for (std::size_t i = 0; i < m.train.size(); ++i) CHECK(m.train[i].id == m2.train[i].id);

  CHECK_THROWS_AS(split_dataset(hundred, {0.5, 0.5, 0.5}, 1), DataError);
  CHECK_THROWS_AS(split_dataset(hundred, {1.0, 0.0, 0.0}, 1), DataError);
  CHECK_THROWS_AS(split_dataset(labeled_chunks(2, Label::ai, "a"), {}, 1), DataError);
}

TEST_CASE("parse_corpus_line validates invariants") {
  const auto ok = parse_corpus_line(corpus_line("x1", "Hello there.", "ai", "claude"));
  CHECK(ok.id == "x1");
  CHECK(ok.label == Label::ai);
  CHECK(ok.source_model == "claude");
  CHECK(ok.dataset_id == "d");
  CHECK_NOTHROW(parse_corpus_line(R"({"id":"y","text":"Hi.","label":"human","source_model":"human","dataset_id":"d","extra":1})"));
  CHECK_THROWS_AS(parse_corpus_line(corpus_line("x", "   ", "ai", "claude")), DataError);
  CHECK_THROWS_AS(parse_corpus_line(corpus_line("x", "Hi.", "human", "claude")), DataError);
  CHECK_THROWS_AS(parse_corpus_line(corpus_line("x", "Hi.", "ai", "human")), DataError);
  CHECK_THROWS_AS(parse_corpus_line(corpus_line("x", "Hi.", "robot", "claude")), DataError);
  CHECK_THROWS_AS(parse_corpus_line(corpus_line("x", "Hi.", "ai", "bard")), DataError);
  CHECK_THROWS_AS(parse_corpus_line("{not json"), DataError);
}

TEST_CASE("read_corpus skips bad lines up to the budget") {
  TempDir dir;
  const auto path = dir.path() / "corpus.jsonl";
  {
    std::ofstream out(path);
    out << corpus_line("a", "One. Two. Three.", "ai", "gpt4") << "\n"
        << "garbage\n"
        << corpus_line("b", "One. Two. Three.", "human", "human") << "\n"
        << "\n"
        << "{\"id\":3}\n";
  }
  const auto r = read_corpus(path, 2);
  CHECK(r.samples.size() == 2);
  REQUIRE(r.errors.size() == 2);
  CHECK(r.errors[0].line == 2);
  CHECK(r.errors[1].line == 5);
  try {
    read_corpus(path, 1);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":5:") != std::string::npos);
  }
  CHECK_THROWS_AS(read_corpus(dir.path() / "missing.jsonl", 0), DataError);
}

TEST_CASE("chunk files round trip with null labels") {
  TempDir dir;
  std::vector<Chunk> chunks = labeled_chunks(2, Label::ai, "a");
  chunks.push_back({"u#0", {"Quote \"x\".", "Tab\there."}, std::nullopt, "unknown"});
  write_chunk_file(chunks, dir.path() / "c.jsonl");
  const auto back = read_chunk_file(dir.path() / "c.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(back[0].id == "a#0");
  CHECK(back[0].text == "A. B. C.");
  CHECK(back[0].label == Label::ai);
  CHECK(back[2].label == std::nullopt);
  CHECK(back[2].text == "Quote \"x\". Tab\there.");
  CHECK(back[2].source_model == "unknown");
}

TEST_CASE("prepare_corpus balances train and val with one human per ai chunk") {
  std::vector<TextSample> samples;
  const std::string three = "One here. Two here. Three here.";
  for (int i = 0; i < 100; ++i) samples.push_back({"ai" + std::to_string(i), three, Label::ai, "llama", "d"});
  for (int i = 0; i < 1000; ++i) samples.push_back({"h" + std::to_string(i), three, Label::human, "human", "d"});
  const auto p = prepare_corpus(samples, {}, 5);
  CHECK(p.human_pool_size == 1000);
  CHECK(p.ai_chunk_count == 100);
  REQUIRE(p.sources.count("llama") == 1);
  const auto& s = p.sources.at("llama");
  CHECK(count_label(s.train, Label::human) + count_label(s.val, Label::human) == 100);
  CHECK(count_label(s.train, Label::ai) == 80);
  CHECK(count_label(s.val, Label::ai) == 10);
  CHECK(s.test.size() == 10);
  CHECK(count_label(s.test, Label::ai) == 10);

  const auto again = prepare_corpus(samples, {}, 5);
  for (std::size_t i = 0; i < s.train.size(); ++i) CHECK(again.sources.at("llama").train[i].id == s.train[i].id);

  std::vector<TextSample> humans_only(samples.begin() + 100, samples.end());
  CHECK_THROWS_AS(prepare_corpus(humans_only, {}, 5), DataError);
}
