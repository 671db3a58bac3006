#include "zzd/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "zzd/error.hpp"
#include "zzd/random.hpp"

namespace zzd {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 11> kAbbreviations = {
    "Dr.", "Mr.", "Mrs.", "Ms.", "e.g.", "i.e.", "etc.", "vs.", "Fig.", "Eq.", "U.S."};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
bool starts_sentence(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '"' || c == '\'';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Word ending at `dot` (inclusive), without leading opening punctuation.
std::string_view word_ending_at(std::string_view text, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0 && !is_space(text[begin - 1])) --begin;
  while (begin < dot && (text[begin] == '(' || text[begin] == '"' || text[begin] == '\'')) ++begin;
  return text.substr(begin, dot - begin + 1);
}

bool is_abbreviation(std::string_view word) {
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

int class_key(const Chunk& c) { return c.label ? static_cast<int>(*c.label) : 2; }

std::string require_string(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) throw DataError(std::string("missing field '") + field + "'");
  if (!it->is_string()) throw DataError(std::string("field '") + field + "' must be a string");
  return it->get<std::string>();
}

json optional_label_json(const std::optional<Label>& label) {
  return label ? json(std::string(to_string(*label))) : json(nullptr);
}

}  // namespace

std::string_view to_string(Label label) { return label == Label::human ? "human" : "ai"; }

std::optional<Label> parse_label(std::string_view text) {
  if (text == "human") return Label::human;
  if (text == "ai") return Label::ai;
  return std::nullopt;
}

std::string Chunk::text() const {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

std::span<const std::string_view> abbreviations() { return kAbbreviations; }

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  const std::size_t n = text.size();
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < n) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && is_terminator(text[j])) ++j;
    const bool single_dot = (j == i + 1 && text[i] == '.');
    while (j < n && is_closer(text[j])) ++j;
    if (j >= n || !is_space(text[j])) {
      i = j;
      continue;
    }
    std::size_t k = j;
    while (k < n && is_space(text[k])) ++k;
    if (k >= n || !starts_sentence(text[k]) ||
        (single_dot && is_abbreviation(word_ending_at(text, i)))) {
      i = k;
      continue;
    }
    auto sentence = trim(text.substr(start, j - start));
    if (!sentence.empty()) out.emplace_back(sentence);
    start = k;
    i = k;
  }
  if (start < n) {
    auto tail = trim(text.substr(start));
    if (!tail.empty()) out.emplace_back(tail);
  }
  return out;
}

std::vector<Chunk> make_chunks(std::span<const std::string> sentences, ChunkMode mode,
                               const ChunkMeta& meta) {
  std::vector<Chunk> chunks;
  for (std::size_t begin = 0; begin < sentences.size(); begin += kSentencesPerChunk) {
    const std::size_t end = std::min(begin + kSentencesPerChunk, sentences.size());
    if (end - begin < kSentencesPerChunk && mode == ChunkMode::train) break;
    Chunk c;
    c.id = meta.id_prefix + "#" + std::to_string(chunks.size());
    c.sentences.assign(sentences.begin() + static_cast<std::ptrdiff_t>(begin),
                       sentences.begin() + static_cast<std::ptrdiff_t>(end));
    c.label = meta.label;
    c.source_model = meta.source_model;
    chunks.push_back(std::move(c));
  }
  return chunks;
}

std::vector<Chunk> build_balanced(std::span<const Chunk> ai, std::span<const Chunk> human_pool,
                                  std::uint64_t seed) {
  if (human_pool.size() < ai.size()) {
    throw DataError("insufficient human pool: need " + std::to_string(ai.size()) +
                    " human chunks, have " + std::to_string(human_pool.size()));
  }
  for (const auto& c : ai) {
    if (c.label != Label::ai) throw DataError("build_balanced: chunk '" + c.id + "' is not labeled ai");
  }
  for (const auto& c : human_pool) {
    if (c.label != Label::human)
      throw DataError("build_balanced: pool chunk '" + c.id + "' is not labeled human");
  }
  SplitMix64 rng(seed);
  std::vector<Chunk> out(ai.begin(), ai.end());
  out.reserve(2 * ai.size());
  for (std::size_t idx : sample_indices(human_pool.size(), ai.size(), rng)) {
    out.push_back(human_pool[idx]);
  }
  shuffle(out, rng);
  return out;
}

DatasetSplit split_dataset(std::span<const Chunk> chunks, SplitRatios ratios, std::uint64_t seed) {
  const std::array<double, 3> r = {ratios.train, ratios.val, ratios.test};
  for (double x : r) {
    if (!(x > 0.0)) throw DataError("split ratios must be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");
  if (chunks.size() < 3) {
    throw DataError("split_dataset needs at least 3 chunks, got " + std::to_string(chunks.size()));
  }

  std::array<std::vector<Chunk>, 3> groups;  // human, ai, unlabeled
  for (const auto& c : chunks) groups[static_cast<std::size_t>(class_key(c))].push_back(c);

  std::array<std::vector<Chunk>, 3> parts;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& group = groups[g];
    if (group.empty()) continue;
    SplitMix64 rng(derive_seed(seed, g));
    shuffle(group, rng);

    // Largest-remainder apportionment of the group across the three splits.
    const double n = static_cast<double>(group.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double exact = n * r[s];
      counts[s] = static_cast<std::size_t>(std::floor(exact));
      frac[s] = exact - std::floor(exact);
      assigned += counts[s];
    }
    std::array<std::size_t, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; assigned < group.size(); ++k, ++assigned) ++counts[order[k % 3]];

    auto it = group.begin();
    for (std::size_t s = 0; s < 3; ++s) {
      auto next = it + static_cast<std::ptrdiff_t>(counts[s]);
      parts[s].insert(parts[s].end(), it, next);
      it = next;
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    SplitMix64 rng(derive_seed(seed, 16 + s));
    shuffle(parts[s], rng);
  }
  return DatasetSplit{std::move(parts[0]), std::move(parts[1]), std::move(parts[2]), seed};
}

TextSample parse_corpus_line(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw DataError("line is not a JSON object");

  TextSample s;
  s.id = require_string(obj, "id");
  s.text = require_string(obj, "text");
  const auto label = require_string(obj, "label");
  s.source_model = require_string(obj, "source_model");
  if (auto it = obj.find("dataset_id"); it != obj.end() && it->is_string()) {
    s.dataset_id = it->get<std::string>();
  }

  if (s.id.empty()) throw DataError("field 'id' is empty");
  if (trim(s.text).empty()) throw DataError("field 'text' is empty for id '" + s.id + "'");
  auto parsed = parse_label(label);
  if (!parsed) throw DataError("field 'label' must be 'human' or 'ai', got '" + label + "'");
  s.label = *parsed;
  if (std::find(std::begin(kSourceModels), std::end(kSourceModels), s.source_model) ==
      std::end(kSourceModels)) {
    throw DataError("field 'source_model' has unknown value '" + s.source_model + "'");
  }
  if (s.label == Label::human && s.source_model != "human") {
    throw DataError("human-labeled sample '" + s.id + "' must have source_model 'human'");
  }
  if (s.label == Label::ai && s.source_model == "human") {
    throw DataError("ai-labeled sample '" + s.id + "' cannot have source_model 'human'");
  }
  return s;
}

CorpusReadResult read_corpus(const std::filesystem::path& path, std::size_t max_errors) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path.string() + "'");
  CorpusReadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      result.samples.push_back(parse_corpus_line(line));
    } catch (const DataError& e) {
      result.errors.push_back({line_no, e.what()});
      if (result.errors.size() > max_errors) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what() +
                        " (error budget of " + std::to_string(max_errors) + " exceeded)");
      }
    }
  }
  return result;
}

void write_chunk_file(std::span<const Chunk> chunks, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write chunk file '" + path.string() + "'");
  for (const auto& c : chunks) {
    json obj;
    obj["id"] = c.id;
    obj["text"] = c.text();
    obj["label"] = optional_label_json(c.label);
    obj["source_model"] = c.source_model;
    out << obj.dump() << '\n';
  }
  if (!out) throw DataError("failed writing chunk file '" + path.string() + "'");
}

std::vector<ChunkRecord> read_chunk_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open chunk file '" + path.string() + "'");
  std::vector<ChunkRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const json obj = json::parse(line);
      ChunkRecord r;
      r.id = require_string(obj, "id");
      r.text = require_string(obj, "text");
      if (auto it = obj.find("source_model"); it != obj.end() && it->is_string()) {
        r.source_model = it->get<std::string>();
      }
      if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
        if (!it->is_string()) throw DataError("field 'label' must be a string or null");
        r.label = parse_label(it->get<std::string>());
        if (!r.label) throw DataError("field 'label' must be 'human', 'ai' or null");
      }
      if (r.id.empty()) throw DataError("field 'id' is empty");
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  return records;
}

PreparedCorpus prepare_corpus(std::span<const TextSample> samples, SplitRatios ratios,
                              std::uint64_t seed) {
  PreparedCorpus prepared;
  std::vector<Chunk> human_pool;
  std::map<std::string, std::vector<Chunk>> ai_by_source;
  for (const auto& s : samples) {
    const auto sentences = split_sentences(s.text);
    auto chunks = make_chunks(sentences, ChunkMode::train, {s.id, s.label, s.source_model});
    auto& dest = s.label == Label::human ? human_pool : ai_by_source[s.source_model];
    dest.insert(dest.end(), std::make_move_iterator(chunks.begin()),
                std::make_move_iterator(chunks.end()));
  }
  prepared.human_pool_size = human_pool.size();
  for (const auto& [source, chunks] : ai_by_source) prepared.ai_chunk_count += chunks.size();
  if (prepared.ai_chunk_count == 0) throw DataError("corpus contains no AI-generated chunks");

  for (auto& [source, ai_chunks] : ai_by_source) {
    if (ai_chunks.empty()) continue;
    const std::uint64_t source_seed = derive_seed(seed, fnv1a64(source));
    const auto ai_split = split_dataset(ai_chunks, ratios, source_seed);

    // One human per AI chunk of the source; the test split stays pure AI, so
    // all sampled humans go to train and val in proportion to their ratios.
    const auto balanced = build_balanced(ai_chunks, human_pool, derive_seed(source_seed, 1));
    const auto humans = ai_chunks.size();
    auto humans_to_train = static_cast<std::size_t>(
        std::llround(static_cast<double>(humans) * ratios.train / (ratios.train + ratios.val)));

    SourceSplit out;
    out.seed = source_seed;
    out.train = ai_split.train;
    out.val = ai_split.val;
    for (const auto& c : balanced) {
      if (c.label != Label::human) continue;
      if (humans_to_train > 0) {
        out.train.push_back(c);
        --humans_to_train;
      } else {
        out.val.push_back(c);
      }
    }
    SplitMix64 rng(derive_seed(source_seed, 2));
    shuffle(out.train, rng);
    shuffle(out.val, rng);
    out.test = ai_split.test;
    prepared.sources.emplace(source, std::move(out));
  }
  return prepared;
}

}  // namespace zzd
