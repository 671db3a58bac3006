#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "zzd/data.hpp"
#include "zzd/error.hpp"
#include "zzd/infer.hpp"
#include "zzd/loss.hpp"
#include "zzd/random.hpp"

using namespace zzd;

namespace {

NetConfig tiny() {
  NetConfig c;
  c.block_channels = {64};
  c.downsample_blocks = {};
  return c;
}

double softmax_ai(double human, double ai) {
  const double m = std::max(human, ai);
  return std::exp(ai - m) / (std::exp(human - m) + std::exp(ai - m));
}

}  // namespace

TEST_CASE("ai_probability is the softmax ai probability") {
  CHECK(ai_probability({0, 0}) == 0.5);
  CHECK(ai_probability({0, 100}) == doctest::Approx(1.0));
  CHECK(ai_probability({0, 1000}) == 1.0);
  CHECK(ai_probability({1000, 0}) == 0.0);
  CHECK(std::isfinite(ai_probability({-800, 800})));
  SplitMix64 rng(12);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const double h = 20 * rng.normal(), a = 20 * rng.normal();
    worst = std::max(worst, std::abs(ai_probability({h, a}) - softmax_ai(h, a)));
  }
  CHECK(worst <= 1e-12);
  double last = -1;
  for (double d = -30; d <= 30; d += 0.5) {
    const double p = ai_probability({0, d});
    CHECK(p > last);
    last = p;
  }
}

TEST_CASE("detect on three sentences gives one chunk") {
  const auto p = build<float>(tiny(), 1);
  const StubEncoder enc;
  const auto r = detect("One sentence here. Another one there. A third one now.", p, enc);
  REQUIRE(r.chunk_count == 1);
  REQUIRE(r.per_chunk.size() == 1);
  CHECK(r.per_chunk[0].chunk_id == "doc#0");
  CHECK(r.overall_ai_probability == r.per_chunk[0].ai_probability);
  CHECK((r.overall_ai_probability >= 0 && r.overall_ai_probability <= 1));

  const auto again = detect("One sentence here. Another one there. A third one now.", p, enc);
  CHECK(again.overall_ai_probability == r.overall_ai_probability);
}

TEST_CASE("detect averages chunk probabilities") {
  const auto p = build<float>(tiny(), 2);
  const StubEncoder enc(3);
  const std::string text = synthetic_text(7, 1);
  DetectOptions opt;
  opt.doc_id = "essay";
  opt.batch_size = 2;
  const auto r = detect(text, p, enc, opt);
  REQUIRE(r.chunk_count == 3);
  CHECK(r.per_chunk[2].chunk_id == "essay#2");
  double sum = 0;
  for (const auto& c : r.per_chunk) sum += c.ai_probability;
  CHECK(r.overall_ai_probability == doctest::Approx(sum / 3).epsilon(1e-15));

  // the short trailing chunk is scored from its own text
  const auto chunks = document_chunks(text, "essay");
  REQUIRE(chunks.size() == 3);
  CHECK(chunks[2].sentences.size() == 1);
  const Mat<float> x = scale_to_pixels(enc.encode(chunks[2].id, chunks[2].text())).values;
  CHECK(r.per_chunk[2].ai_probability == doctest::Approx(ai_probability(logit_pair(forward(p, x), 0))).epsilon(1e-6));

  opt.batch_size = 32;
  CHECK(detect(text, p, enc, opt).overall_ai_probability == doctest::Approx(r.overall_ai_probability).epsilon(1e-6));
}

TEST_CASE("detect rejects text without sentences") {
  const auto p = build<float>(tiny(), 1);
  CHECK_THROWS_AS(detect("   \n ", p, StubEncoder{}), DataError);
}

TEST_CASE("detection json") {
  DetectionResult r{0.25, {{"doc#0", 0.5}, {"doc#1", 0.0}}, 2};
  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j["overall_ai_probability"] == 0.25);
  CHECK(j["chunk_count"] == 2);
  CHECK(j["per_chunk"][1]["chunk_id"] == "doc#1");
  CHECK(j["per_chunk"][0]["ai_probability"] == 0.5);
}

TEST_CASE("synthetic text has the requested sentences") {
  const auto text = synthetic_text(50, 7);
  CHECK(text == synthetic_text(50, 7));
  CHECK(text != synthetic_text(50, 8));
  const auto sentences = split_sentences(text);
  REQUIRE(sentences.size() == 50);
  for (const auto& s : sentences) {
    const auto words = std::count(s.begin(), s.end(), ' ') + 1;
    CHECK((words >= 8 && words <= 20));
  }
}

TEST_CASE("benchmark structure") {
  const auto p = build<float>(tiny(), 1);
  BenchOptions opt;
  opt.sentence_counts = {10, 30};
  opt.batch_sizes = {1, 4, 8};
  opt.repetitions = 2;
  const auto report = benchmark(p, StubEncoder{}, opt);
  CHECK(report.encoder == StubEncoder{}.name());
  REQUIRE(report.rows.size() == 6);
  CHECK(report.rows[0].num_sentences == 10);
  CHECK(report.rows[5].batch_size == 8);
  for (const auto& r : report.rows) {
    CHECK(r.total_ms >= r.preprocessing_ms);
    CHECK(r.total_ms >= r.forward_ms);
    CHECK(r.total_ms >= r.output_ms);
    CHECK(r.ms_per_sentence == doctest::Approx(r.total_ms / r.num_sentences));
  }
  const auto csv = to_csv(report);
  CHECK(csv.rfind("# encoder=", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
  opt.repetitions = 0;
  CHECK_THROWS_AS(benchmark(p, StubEncoder{}, opt), ConfigError);
}

TEST_CASE("bench warnings flag slower larger batches") {
  BenchReport r;
  r.rows = {{10, 1, 0, 5.0, 0, 5.0, 0.5}, {10, 32, 0, 7.0, 0, 7.0, 0.7}, {10, 128, 0, 1.0, 0, 1.0, 0.1}};
  const auto w = bench_warnings(r);
  REQUIRE(w.size() == 1);
  CHECK(w[0].find("batch 1 ") != std::string::npos);
}
