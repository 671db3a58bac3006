#include "zzd/infer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "zzd/random.hpp"

namespace zzd {

double ai_probability(const LogitPair& logits) {
  const double d = logits.logit_ai - logits.logit_human;
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

Mat<float> batched_logits(const Parameters<float>& params, const Mat<float>& inputs, int batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  Mat<float> logits(params.config.num_classes, inputs.cols());
  for (Eigen::Index begin = 0; begin < inputs.cols(); begin += batch_size) {
    const Eigen::Index len = std::min<Eigen::Index>(batch_size, inputs.cols() - begin);
    logits.middleCols(begin, len) = forward(params, Mat<float>(inputs.middleCols(begin, len)));
  }
  return logits;
}

Mat<float> inputs_from_records(std::span<const EmbeddingRecord> records) {
  Mat<float> x(kEmbedDim, static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i)
    x.col(static_cast<Eigen::Index>(i)) = scale_to_pixels(records[i].vector).values;
  return x;
}

std::vector<Chunk> document_chunks(std::string_view text, std::string_view doc_id) {
  const auto sentences = split_sentences(text);
  return make_chunks(sentences, ChunkMode::infer, {std::string(doc_id), std::nullopt, ""});
}

namespace {

struct Prepared {
  std::vector<Chunk> chunks;
  Mat<float> inputs;
};

Prepared preprocess(std::string_view text, const Encoder& encoder, std::string_view doc_id) {
  Prepared p;
  p.chunks = document_chunks(text, doc_id);
  if (p.chunks.empty()) throw DataError("text contains no sentences");
  p.inputs.resize(kEmbedDim, static_cast<Eigen::Index>(p.chunks.size()));
  for (std::size_t i = 0; i < p.chunks.size(); ++i) {
    const auto& c = p.chunks[i];
    p.inputs.col(static_cast<Eigen::Index>(i)) = scale_to_pixels(encoder.encode(c.id, c.text())).values;
  }
  return p;
}

DetectionResult summarize(const std::vector<Chunk>& chunks, const Mat<float>& logits) {
  DetectionResult r;
  r.chunk_count = chunks.size();
  r.per_chunk.reserve(chunks.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const double p = ai_probability(logit_pair(logits, static_cast<Eigen::Index>(i)));
    r.per_chunk.push_back({chunks[i].id, p});
    sum += p;
  }
  r.overall_ai_probability = sum / static_cast<double>(chunks.size());
  return r;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

constexpr std::array<std::string_view, 48> kVocabulary = {
    "model",   "river",    "system",  "light",   "people",  "history", "market", "student", "paper",   "energy",
    "city",    "language", "network", "theory",  "method",  "garden",  "signal", "teacher", "problem", "result",
    "careful", "quick",    "modern",  "simple",  "quiet",   "ancient", "bright", "general", "local",   "strong",
    "builds",  "explains", "follows", "changes", "reaches", "carries", "shows",  "needs",   "within",  "across",
    "through", "under",    "before",  "after",   "often",   "rarely",  "the",    "every"};

}  // namespace

DetectionResult detect(std::string_view text, const Parameters<float>& params, const Encoder& encoder,
                       const DetectOptions& options) {
  const Prepared p = preprocess(text, encoder, options.doc_id);
  return summarize(p.chunks, batched_logits(params, p.inputs, options.batch_size));
}

std::string to_json(const DetectionResult& result) {
  nlohmann::ordered_json j;
  j["overall_ai_probability"] = result.overall_ai_probability;
  j["chunk_count"] = result.chunk_count;
  j["per_chunk"] = nlohmann::ordered_json::array();
  for (const auto& c : result.per_chunk) {
    nlohmann::ordered_json item;
    item["chunk_id"] = c.chunk_id;
    item["ai_probability"] = c.ai_probability;
    j["per_chunk"].push_back(std::move(item));
  }
  return j.dump();
}

std::string synthetic_text(std::size_t sentences, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::string text;
  for (std::size_t s = 0; s < sentences; ++s) {
    const auto words = 8 + rng.below(13);
    for (std::uint64_t w = 0; w < words; ++w) {
      std::string word(kVocabulary[rng.below(kVocabulary.size())]);
      if (w == 0) word[0] = static_cast<char>(word[0] - 'a' + 'A');
      if (!text.empty()) text += ' ';
      text += word;
    }
    text += '.';
  }
  return text;
}

BenchReport benchmark(const Parameters<float>& params, const Encoder& encoder, const BenchOptions& options) {
  if (options.repetitions < 1) throw ConfigError("benchmark repetitions must be at least 1");
  using clock = std::chrono::steady_clock;
  const auto ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };
  BenchReport report;
  report.encoder = encoder.name();
  for (int count : options.sentence_counts) {
    const std::string text = synthetic_text(static_cast<std::size_t>(count), options.text_seed);
    for (int batch : options.batch_sizes) {
      std::vector<double> pre, fwd, out, total;
      for (int rep = 0; rep <= options.repetitions; ++rep) {
        const auto t0 = clock::now();
        const Prepared p = preprocess(text, encoder, "bench");
        const auto t1 = clock::now();
        const Mat<float> logits = batched_logits(params, p.inputs, batch);
        const auto t2 = clock::now();
        const DetectionResult r = summarize(p.chunks, logits);
        const auto t3 = clock::now();
        if (r.chunk_count == 0) throw DataError("benchmark produced no chunks");
        if (rep == 0) continue;  // warm-up
        pre.push_back(ms(t0, t1));
        fwd.push_back(ms(t1, t2));
        out.push_back(ms(t2, t3));
        total.push_back(ms(t0, t1) + ms(t1, t2) + ms(t2, t3));
      }
      BenchRow row{count, batch, median(pre), median(fwd), median(out), median(total), 0.0};
      row.ms_per_sentence = row.total_ms / static_cast<double>(count);
      report.rows.push_back(row);
    }
  }
  return report;
}

std::string to_csv(const BenchReport& report) {
  std::ostringstream os;
  os << "# encoder=" << report.encoder << '\n';
  os << "num_sentences,batch_size,preprocessing_ms,forward_ms,output_ms,total_ms,ms_per_sentence\n";
  os.setf(std::ios::fixed);
  os.precision(4);
  for (const auto& r : report.rows) {
    os << r.num_sentences << ',' << r.batch_size << ',' << r.preprocessing_ms << ',' << r.forward_ms << ','
       << r.output_ms << ',' << r.total_ms << ',' << r.ms_per_sentence << '\n';
  }
  return os.str();
}

std::vector<std::string> bench_warnings(const BenchReport& report) {
  std::vector<std::string> warnings;
  for (const auto& a : report.rows) {
    for (const auto& b : report.rows) {
      if (a.num_sentences == b.num_sentences && a.batch_size < b.batch_size && b.forward_ms > a.forward_ms) {
        std::ostringstream os;
        os << "forward time rose from batch " << a.batch_size << " (" << a.forward_ms << " ms) to batch "
           << b.batch_size << " (" << b.forward_ms << " ms) at " << a.num_sentences << " sentences";
        warnings.push_back(os.str());
      }
    }
  }
  return warnings;
}

}  // namespace zzd
