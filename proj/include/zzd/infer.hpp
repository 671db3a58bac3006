#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "zzd/embedding.hpp"
#include "zzd/model.hpp"

namespace zzd {

/// sigmoid(logit_ai - logit_human), evaluated without overflow. Equal to the
/// ai entry of the two-class softmax.
double ai_probability(const LogitPair& logits);

/// Eval-mode logits for a 512 x N input, computed `batch_size` columns at a time.
Mat<float> batched_logits(const Parameters<float>& params, const Mat<float>& inputs, int batch_size);

/// Scaled model input for a list of embedding records (labels ignored).
Mat<float> inputs_from_records(std::span<const EmbeddingRecord> records);

struct ChunkProbability {
  std::string chunk_id;
  double ai_probability = 0.0;
};

struct DetectionResult {
  double overall_ai_probability = 0.0;
  std::vector<ChunkProbability> per_chunk;
  std::size_t chunk_count = 0;
};

struct DetectOptions {
  std::string doc_id = "doc";  // chunk ids are "<doc_id>#<index>"
  int batch_size = 32;
};

/// Whole-document score: sentences -> infer-mode chunks -> encode -> pixels ->
/// eval-mode forward -> per-chunk AI probability -> arithmetic mean.
/// Throws DataError when the text yields no sentence.
DetectionResult detect(std::string_view text, const Parameters<float>& params, const Encoder& encoder,
                       const DetectOptions& options = {});

/// The chunk list detect() scores, for exporting embeddings ahead of time.
std::vector<Chunk> document_chunks(std::string_view text, std::string_view doc_id);

std::string to_json(const DetectionResult& result);

struct BenchRow {
  int num_sentences = 0;
  int batch_size = 0;
  double preprocessing_ms = 0.0;
  double forward_ms = 0.0;
  double output_ms = 0.0;
  double total_ms = 0.0;
  double ms_per_sentence = 0.0;
};

struct BenchReport {
  std::string encoder;
  std::vector<BenchRow> rows;
};

struct BenchOptions {
  std::vector<int> sentence_counts = {10, 100, 1000, 10000};
  std::vector<int> batch_sizes = {1, 32, 128};
  int repetitions = 5;
  std::uint64_t text_seed = 7;
};

/// Deterministic English-like text: `sentences` sentences of 8 to 20 words
/// from a fixed vocabulary, each capitalized and ending in a period.
std::string synthetic_text(std::size_t sentences, std::uint64_t seed);

/// Times the three inference phases for every (sentence count, batch size)
/// cell: preprocessing (split, chunk, encode, scale), forward pass, and
/// output (sigmoid and mean). One warm-up run per cell, then the median of
/// `repetitions` runs on a monotonic clock. Each run's total is the sum of
/// its phases.
BenchReport benchmark(const Parameters<float>& params, const Encoder& encoder, const BenchOptions& options = {});

std::string to_csv(const BenchReport& report);

/// Soft checks: non-increasing forward time in batch size for each sentence
/// count. Returns one message per violation.
std::vector<std::string> bench_warnings(const BenchReport& report);

}  // namespace zzd
