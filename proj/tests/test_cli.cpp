#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"
#include "zzd/checkpoint.hpp"
#include "zzd/commands.hpp"
#include "zzd/infer.hpp"
#include "zzd/model.hpp"

using namespace zzd;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string line(const std::string& id, const std::string& text, const std::string& label, const std::string& source) {
  return nlohmann::json{{"id", id}, {"text", text}, {"label", label}, {"source_model", source}, {"dataset_id", "d"}}.dump();
}

// 12 AI documents from two sources, 12 human documents, 6 sentences each.
fs::path write_corpus(const fs::path& dir, bool with_ai = true) {
  const auto path = dir / "corpus.jsonl";
  std::ofstream out(path);
  for (int i = 0; i < 12; ++i) {
    if (with_ai) out << line("a" + std::to_string(i), synthetic_text(6, i), "ai", i % 2 ? "claude" : "mistral") << "\n";
    out << line("h" + std::to_string(i), synthetic_text(6, 100 + i), "human", "human") << "\n";
  }
  return path;
}

fs::path tiny_checkpoint(const fs::path& dir, std::uint64_t seed) {
  NetConfig c;
  c.block_channels = {64};
  c.downsample_blocks = {};
  const auto path = dir / ("m" + std::to_string(seed) + ".zzck");
  save_checkpoint(build<float>(c, seed), path);
  return path;
}

}  // namespace

TEST_CASE("prepare writes per-source splits and a reproducible manifest") {
  TempDir dir;
  const auto corpus = write_corpus(dir.path());
  const auto out = (dir.path() / "prep").string();
  const auto r = cli({"prepare", "--corpus", corpus.string(), "--out", out, "--seed", "3"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("claude: ") != std::string::npos);
  for (const char* part : {"train", "val", "test"}) {
    CHECK(fs::exists(fs::path(out) / "mistral" / (std::string(part) + ".jsonl")));
    CHECK(fs::exists(fs::path(out) / "claude" / (std::string(part) + ".jsonl")));
  }
  const auto manifest = slurp(fs::path(out) / "manifest.json");
  const auto j = nlohmann::json::parse(manifest);
  CHECK(j["seed"] == 3);
  CHECK(j["ai_chunk_count"] == 24);
  CHECK(j["human_pool_size"] == 24);
  const auto& m = j["sources"]["mistral"];
  CHECK(m["test"]["human"] == 0);
  CHECK(m["train"]["human"].get<int>() + m["val"]["human"].get<int>() == 12);
  CHECK(m["train"]["ai"].get<int>() + m["val"]["ai"].get<int>() + m["test"]["ai"].get<int>() == 12);

  REQUIRE(cli({"prepare", "--corpus", corpus.string(), "--out", out, "--seed", "3"}).code == kExitOk);
  CHECK(slurp(fs::path(out) / "manifest.json") == manifest);
}

TEST_CASE("prepare fails on a corpus without ai text") {
  TempDir dir;
  const auto corpus = write_corpus(dir.path(), false);
  const auto r = cli({"prepare", "--corpus", corpus.string(), "--out", (dir.path() / "p").string()});
  CHECK(r.code == kExitData);
  CHECK(!r.err.empty());
}

TEST_CASE("detect prints json") {
  TempDir dir;
  const auto model = tiny_checkpoint(dir.path(), 1);
  const auto r = cli({"detect", "--model", model.string(), "--text", "One sentence here. Another one there. A third one now."});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["chunk_count"] == 1);
  const double p = j["overall_ai_probability"];
  CHECK((p >= 0 && p <= 1));

  const auto file = dir.path() / "doc.txt";
  std::ofstream(file) << "One sentence here. Another one there. A third one now.";
  const auto f = cli({"detect", "--model", model.string(), "--file", file.string()});
  REQUIRE(f.code == kExitOk);
  CHECK(f.out == r.out);
}

TEST_CASE("detect errors") {
  TempDir dir;
  const auto missing = (dir.path() / "absent.zzck").string();
  const auto r = cli({"detect", "--model", missing, "--text", "Hello there."});
  CHECK(r.code == kExitData);
  CHECK(r.err.find(missing) != std::string::npos);

  const auto model = tiny_checkpoint(dir.path(), 1);
  CHECK(cli({"detect", "--model", model.string()}).code == kExitUsage);
  CHECK(cli({"detect", "--model", model.string(), "--text", "a.", "--file", "b"}).code == kExitUsage);
  CHECK(cli({"detect", "--model", model.string(), "--text", "   "}).code == kExitData);
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"detect", "--bogus", "1"}).code == kExitUsage);
  CHECK(cli({"bench", "--model", "x", "--counts", "1,z"}).code == kExitUsage);
}

TEST_CASE("eval-matrix prints one row per model and an average column") {
  TempDir dir;
  const auto corpus = write_corpus(dir.path());
  const auto prep = dir.path() / "prep";
  REQUIRE(cli({"prepare", "--corpus", corpus.string(), "--out", prep.string(), "--ratios", "0.4,0.2,0.4"}).code == kExitOk);
  const auto m1 = tiny_checkpoint(dir.path(), 1), m2 = tiny_checkpoint(dir.path(), 2);
  const auto csv = dir.path() / "matrix.csv";
  const auto r = cli({"eval-matrix", "--model", "one=" + m1.string(), "--model", "two=" + m2.string(),
                      "--testset", "mistral=" + (prep / "mistral" / "test.jsonl").string(),
                      "--testset", "claude=" + (prep / "claude" / "test.jsonl").string(),
                      "--testset", "again=" + (prep / "claude" / "test.jsonl").string(), "--csv", csv.string()});
  REQUIRE(r.code == kExitOk);
  const auto text = slurp(csv);
  std::istringstream in(text);
  std::string row;
  std::vector<std::string> rows;
  while (std::getline(in, row)) rows.push_back(row);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "train,mistral,claude,again,average");
  CHECK(rows[1].rfind("one,", 0) == 0);
  CHECK(rows[2].rfind("two,", 0) == 0);
  CHECK(std::count(rows[1].begin(), rows[1].end(), ',') == 4);
  CHECK(r.out.find("Average") != std::string::npos);

  const auto ens = cli({"eval-matrix", "--model", "one=" + m1.string(), "--model", "two=" + m2.string(), "--testset",
                        "mistral=" + (prep / "mistral" / "test.jsonl").string(), "--ensemble", "--csv", csv.string()});
  REQUIRE(ens.code == kExitOk);
  const auto ens_csv = slurp(csv);
  const auto last = ens_csv.substr(ens_csv.rfind("ensemble,"));
  const double rate = std::stod(last.substr(9));
  CHECK((rate >= 0.0 && rate <= 100.0));

  // the training split holds humans, so it is not a valid test set
  const auto bad = cli({"eval-matrix", "--model", m1.string(), "--testset", (prep / "claude" / "train.jsonl").string()});
  CHECK(bad.code == kExitData);
}

TEST_CASE("train writes checkpoints, history and config") {
  TempDir dir;
  const auto corpus = write_corpus(dir.path());
  const auto prep = dir.path() / "prep";
  REQUIRE(cli({"prepare", "--corpus", corpus.string(), "--out", prep.string()}).code == kExitOk);
  const auto out = dir.path() / "run";
  const auto r = cli({"train", "--train", (prep / "mistral" / "train.jsonl").string(), "--val",
                      (prep / "mistral" / "val.jsonl").string(), "--out", out.string(), "--train.epochs", "2",
                      "--train.batch_size", "4", "--model.block_channels", "64", "--model.downsample_blocks", ""});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  CHECK(fs::exists(out / "best.zzck"));
  CHECK(fs::exists(out / "last.zzck"));
  CHECK(fs::exists(out / "config.txt"));
  const auto history = slurp(out / "history.jsonl");
  CHECK(std::count(history.begin(), history.end(), '\n') == 2);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 2);
  CHECK(slurp(out / "config.txt").find("train.epochs=2") != std::string::npos);

  const auto bad = cli({"train", "--train", (prep / "mistral" / "train.jsonl").string(), "--val",
                        (prep / "mistral" / "val.jsonl").string(), "--out", out.string(), "--sgd.lr", "-1"});
  CHECK(bad.code == kExitData);
  CHECK(bad.err.find("sgd.lr") != std::string::npos);
}

TEST_CASE("bench prints a csv grid") {
  TempDir dir;
  const auto model = tiny_checkpoint(dir.path(), 1);
  const auto r = cli({"bench", "--model", model.string(), "--counts", "3,6", "--batches", "1,2", "--reps", "1"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.rfind("# encoder=", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 6);
}
