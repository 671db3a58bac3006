#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace zzd {

enum class Label : std::uint8_t { human = 0, ai = 1 };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

/// Source-model tags accepted in corpus files.
inline constexpr std::string_view kSourceModels[] = {"mistral", "claude", "llama", "chatgpt",
                                                     "gpt4",    "falcon", "human"};

struct TextSample {
  std::string id;
  std::string text;
  Label label = Label::human;
  std::string source_model;
  std::string dataset_id;
};

/// Up to three consecutive sentences: the unit the classifier scores.
struct Chunk {
  std::string id;
  std::vector<std::string> sentences;
  std::optional<Label> label;
  std::string source_model;

  /// Sentences joined by a single space; the canonical text handed to encoders.
  std::string text() const;
};

/// One line of a chunk file. Unlike Chunk it keeps only the joined text.
struct ChunkRecord {
  std::string id;
  std::string text;
  std::optional<Label> label;
  std::string source_model;
};

struct DatasetSplit {
  std::vector<Chunk> train;
  std::vector<Chunk> val;
  std::vector<Chunk> test;
  std::uint64_t seed = 0;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

enum class ChunkMode { train, infer };

struct ChunkMeta {
  std::string id_prefix = "chunk";
  std::optional<Label> label;
  std::string source_model;
};

inline constexpr std::size_t kSentencesPerChunk = 3;

/// Splits after '.', '!' or '?' (optionally followed by closing quotes or
/// brackets) when the next non-space character is an uppercase letter, a
/// digit or a quote. A lone '.' ending one of the abbreviations in
/// abbreviations() never splits. Returned sentences are whitespace-trimmed.
std::vector<std::string> split_sentences(std::string_view text);

std::span<const std::string_view> abbreviations();

/// Consecutive non-overlapping groups of three. A trailing short group is
/// dropped in train mode and kept in infer mode. Chunk ids are
/// "<id_prefix>#<index>".
std::vector<Chunk> make_chunks(std::span<const std::string> sentences, ChunkMode mode,
                               const ChunkMeta& meta = {});

/// All of `ai` plus an equally sized seeded sample (without replacement) of
/// `human_pool`, shuffled by the same seed.
std::vector<Chunk> build_balanced(std::span<const Chunk> ai, std::span<const Chunk> human_pool,
                                  std::uint64_t seed);

/// Stratified by label: each class is shuffled and cut by largest-remainder
/// rounding of the ratios, then every split is shuffled.
DatasetSplit split_dataset(std::span<const Chunk> chunks, SplitRatios ratios, std::uint64_t seed);

// Corpus and chunk files (JSON lines).

TextSample parse_corpus_line(std::string_view line);

struct LineError {
  std::size_t line = 0;
  std::string message;
};

struct CorpusReadResult {
  std::vector<TextSample> samples;
  std::vector<LineError> errors;
};

/// Reads a corpus file, skipping malformed lines. Throws DataError once more
/// than `max_errors` lines have failed.
CorpusReadResult read_corpus(const std::filesystem::path& path, std::size_t max_errors);

void write_chunk_file(std::span<const Chunk> chunks, const std::filesystem::path& path);
std::vector<ChunkRecord> read_chunk_file(const std::filesystem::path& path);

// Corpus preparation: per-source balanced train/val and pure-AI test sets.

struct SourceSplit {
  std::vector<Chunk> train;
  std::vector<Chunk> val;
  std::vector<Chunk> test;
  std::uint64_t seed = 0;
};

struct PreparedCorpus {
  std::map<std::string, SourceSplit> sources;
  std::size_t human_pool_size = 0;
  std::size_t ai_chunk_count = 0;
};

/// AI chunks of each source are split by `ratios`. As many humans as the
/// source has AI chunks are sampled from the shared pool under a per-source
/// seed and divided between train and val by their relative ratio. Test sets
/// stay pure AI.
PreparedCorpus prepare_corpus(std::span<const TextSample> samples, SplitRatios ratios,
                              std::uint64_t seed);

}  // namespace zzd
