#include "zzd/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "zzd/checkpoint.hpp"
#include "zzd/data.hpp"
#include "zzd/embedding.hpp"
#include "zzd/error.hpp"
#include "zzd/eval.hpp"
#include "zzd/infer.hpp"
#include "zzd/run_config.hpp"
#include "zzd/train.hpp"

namespace zzd {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Chunk files and ZZEB files are told apart by the magic bytes.
std::vector<EmbeddingRecord> load_records(const fs::path& path, const Encoder& encoder) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::string_view(magic, 4) == "ZZEB") return read_embeddings(path);
  return encode_records(read_chunk_file(path), encoder);
}

std::pair<std::string, fs::path> split_named(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) return {fs::path(spec).stem().string(), spec};
  if (eq == 0 || eq + 1 == spec.size()) throw UsageError("expected NAME=PATH, got '" + spec + "'");
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

std::vector<NamedTestSet> load_testsets(const std::vector<std::string>& specs, const Encoder& encoder) {
  std::vector<NamedTestSet> sets;
  for (const auto& spec : specs) {
    auto [name, path] = split_named(spec);
    sets.push_back({name, load_records(path, encoder)});
  }
  return sets;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw FormatError(FormatError::Kind::io, "write failed for '" + path.string() + "'");
}

std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError(flag + ": invalid integer list '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

// Config file first, then any dotted-key flags.
struct SettingFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key=value settings file")->check(CLI::ExistingFile);
    for (auto key : known_setting_keys()) {
      const std::string k(key);
      app->add_option("--" + k, values[k], "overrides " + k);
    }
  }

  TrainConfig resolve(CLI::App* app) const {
    TrainConfig config;
    std::vector<Setting> settings;
    if (!config_file.empty()) settings = read_settings_file(config_file);
    apply_settings(config, settings);
    std::vector<Setting> flags;
    for (const auto& [k, v] : values)
      if (app->count("--" + k) > 0) flags.emplace_back(k, v);
    apply_settings(config, flags);
    config.validate();
    return config;
  }
};

// prepare

struct PrepareArgs {
  std::string corpus, out_dir;
  std::uint64_t seed = 0;
  std::vector<double> ratios = {0.8, 0.1, 0.1};
  std::size_t max_errors = 10;
};

void cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  if (a.ratios.size() != 3) throw UsageError("--ratios takes three values");
  const auto corpus = read_corpus(a.corpus, a.max_errors);
  for (const auto& e : corpus.errors) err << a.corpus << ":" << e.line << ": skipped: " << e.message << "\n";
  const SplitRatios ratios{a.ratios[0], a.ratios[1], a.ratios[2]};
  const auto prepared = prepare_corpus(corpus.samples, ratios, a.seed);

  const fs::path root(a.out_dir);
  fs::create_directories(root);
  nlohmann::json manifest;
  manifest["corpus"] = a.corpus;
  manifest["seed"] = a.seed;
  manifest["ratios"] = a.ratios;
  manifest["max_errors"] = a.max_errors;
  manifest["skipped_lines"] = nlohmann::json::array();
  for (const auto& e : corpus.errors) manifest["skipped_lines"].push_back(e.line);
  manifest["human_pool_size"] = prepared.human_pool_size;
  manifest["ai_chunk_count"] = prepared.ai_chunk_count;
  nlohmann::json sources = nlohmann::json::object();
  for (const auto& [source, split] : prepared.sources) {
    const fs::path dir = root / source;
    fs::create_directories(dir);
    nlohmann::json entry;
    entry["seed"] = split.seed;
    const std::pair<const char*, const std::vector<Chunk>*> parts[] = {
        {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
    for (const auto& [name, chunks] : parts) {
      write_chunk_file(*chunks, dir / (std::string(name) + ".jsonl"));
      const auto ai = std::count_if(chunks->begin(), chunks->end(),
                                    [](const Chunk& c) { return c.label == Label::ai; });
      entry[name] = {{"total", chunks->size()}, {"ai", ai}, {"human", chunks->size() - ai}};
    }
    sources[source] = entry;
    out << source << ": train=" << split.train.size() << " val=" << split.val.size()
        << " test=" << split.test.size() << "\n";
  }
  manifest["sources"] = sources;
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  out << "manifest: " << (root / "manifest.json").string() << "\n";
}

// train

struct TrainArgs {
  std::string train, val, out_dir, encoder = "stub";
  SettingFlags settings;
};

void cmd_train(TrainArgs& a, CLI::App* app, std::ostream& out, std::ostream& err) {
  auto config = a.settings.resolve(app);
  const auto encoder = make_encoder(a.encoder);
  const auto train = load_records(a.train, *encoder);
  const auto val = load_records(a.val, *encoder);
  const fs::path root(a.out_dir);
  fs::create_directories(root);
  config.checkpoint_dir = root;
  write_text(root / "config.txt", dump_settings(config));
  const auto result = fit(train, val, config, [&](const EpochRecord& r) { err << to_json_line(r) << "\n"; });
  write_history(result.history, root / "history.jsonl");
  out << "best_epoch=" << result.best_epoch << " best_val_acc=" << result.best_val_acc << "\n"
      << "checkpoint: " << (root / "best.zzck").string() << "\n";
}

// eval-matrix

struct EvalArgs {
  std::vector<std::string> models, testsets;
  std::string encoder = "stub", csv;
  bool ensemble = false;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto encoder = make_encoder(a.encoder);
  std::vector<NamedModel> models;
  for (const auto& spec : a.models) {
    auto [name, path] = split_named(spec);
    models.push_back({name, std::make_shared<const Parameters<float>>(load_checkpoint(path).params)});
  }
  const auto sets = load_testsets(a.testsets, *encoder);
  auto report = cross_matrix(models, sets);
  if (a.ensemble) {
    std::vector<double> rates;
    for (const auto& s : sets) rates.push_back(ensemble_rate(models, s.records));
    append_row(report, "ensemble", rates);
  }
  if (!a.csv.empty()) write_text(a.csv, to_csv(report));
  out << format_table(report);
}

// ablate

struct AblateArgs {
  std::string train, val, out_dir, encoder = "stub";
  std::vector<std::string> testsets;
  SettingFlags settings;
};

void cmd_ablate(AblateArgs& a, CLI::App* app, std::ostream& out, std::ostream& err) {
  auto config = a.settings.resolve(app);
  const auto encoder = make_encoder(a.encoder);
  const auto train = load_records(a.train, *encoder);
  const auto val = load_records(a.val, *encoder);
  const auto sets = load_testsets(a.testsets, *encoder);
  const fs::path root(a.out_dir);
  fs::create_directories(root);
  config.checkpoint_dir = root;
  write_text(root / "config.txt", dump_settings(config));
  const auto report = run_ablation(train, val, sets, config, [&](const EpochRecord& r) { err << to_json_line(r) << "\n"; });
  for (const auto& run : report.runs) {
    const auto dir = root / ablation_row_name(run.arch, run.schedule);
    fs::create_directories(dir);
    write_history(run.fit.history, dir / "history.jsonl");
  }
  write_text(root / "ablation.csv", to_csv(report.table));
  out << format_table(report.table);
}

// detect

struct DetectArgs {
  std::string model, text, file, encoder = "stub", doc_id = "doc";
  int batch_size = 32;
};

void cmd_detect(const DetectArgs& a, std::ostream& out) {
  std::string text = a.text;
  if (!a.file.empty()) {
    std::ifstream in(a.file, std::ios::binary);
    if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + a.file + "'");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto params = load_checkpoint(a.model).params;
  const auto encoder = make_encoder(a.encoder);
  DetectOptions options;
  options.doc_id = a.doc_id;
  options.batch_size = a.batch_size;
  out << to_json(detect(text, params, *encoder, options)) << "\n";
}

// bench

struct BenchArgs {
  std::string model, encoder = "stub", csv, counts = "10,100,1000,10000", batches = "1,32,128";
  int reps = 5;
};

void cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  BenchOptions options;
  options.sentence_counts = parse_int_list(a.counts, "--counts");
  options.batch_sizes = parse_int_list(a.batches, "--batches");
  options.repetitions = a.reps;
  if (a.reps < 1) throw UsageError("--reps must be at least 1");
  const auto params = load_checkpoint(a.model).params;
  const auto encoder = make_encoder(a.encoder);
  const auto report = benchmark(params, *encoder, options);
  for (const auto& w : bench_warnings(report)) err << "warning: " << w << "\n";
  const auto csv = to_csv(report);
  if (!a.csv.empty()) write_text(a.csv, csv);
  out << csv;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"AI-generated text detection with a ZigZag ResNet", "zzdetect"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "split a corpus into per-source chunk files");
  prepare->add_option("--corpus", prep.corpus, "corpus JSON lines")->required();
  prepare->add_option("--out", prep.out_dir, "output directory")->required();
  prepare->add_option("--seed", prep.seed);
  prepare->add_option("--ratios", prep.ratios, "train val test")->expected(3)->delimiter(',');
  prepare->add_option("--max-errors", prep.max_errors, "malformed lines tolerated");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train one model");
  train->add_option("--train", tr.train, "chunk file or .zzeb")->required();
  train->add_option("--val", tr.val, "chunk file or .zzeb")->required();
  train->add_option("--out", tr.out_dir, "output directory")->required();
  train->add_option("--encoder", tr.encoder, "stub | stub:<seed> | file:<path>");
  tr.settings.attach(train);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval-matrix", "cross-domain detection rates");
  eval->add_option("--model", ev.models, "NAME=checkpoint")->required();
  eval->add_option("--testset", ev.testsets, "NAME=chunk file or .zzeb")->required();
  eval->add_option("--encoder", ev.encoder);
  eval->add_option("--csv", ev.csv, "also write CSV here");
  eval->add_flag("--ensemble", ev.ensemble, "append a mean-probability ensemble row");

  AblateArgs ab;
  auto* ablate = app.add_subcommand("ablate", "architecture x schedule ablation");
  ablate->add_option("--train", ab.train)->required();
  ablate->add_option("--val", ab.val)->required();
  ablate->add_option("--testset", ab.testsets, "NAME=chunk file or .zzeb")->required();
  ablate->add_option("--out", ab.out_dir)->required();
  ablate->add_option("--encoder", ab.encoder);
  ab.settings.attach(ablate);

  DetectArgs de;
  auto* det = app.add_subcommand("detect", "score one document");
  det->add_option("--model", de.model, "checkpoint")->required();
  auto* text_opt = det->add_option("--text", de.text);
  auto* file_opt = det->add_option("--file", de.file);
  text_opt->excludes(file_opt);
  det->add_option("--encoder", de.encoder);
  det->add_option("--doc-id", de.doc_id);
  det->add_option("--batch-size", de.batch_size)->check(CLI::PositiveNumber);

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "inference latency");
  bench->add_option("--model", be.model, "checkpoint")->required();
  bench->add_option("--encoder", be.encoder);
  bench->add_option("--counts", be.counts, "comma-separated sentence counts");
  bench->add_option("--batches", be.batches, "comma-separated batch sizes");
  bench->add_option("--reps", be.reps);
  bench->add_option("--csv", be.csv, "also write CSV here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (prepare->parsed()) cmd_prepare(prep, out, err);
    else if (train->parsed()) cmd_train(tr, train, out, err);
    else if (eval->parsed()) cmd_eval(ev, out);
    else if (ablate->parsed()) cmd_ablate(ab, ablate, out, err);
    else if (det->parsed()) {
      if (text_opt->count() == 0 && file_opt->count() == 0) throw UsageError("detect: one of --text or --file is required");
      cmd_detect(de, out);
    } else if (bench->parsed()) cmd_bench(be, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace zzd
