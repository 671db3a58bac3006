#include "zzd/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "zzd/binary_io.hpp"
#include "zzd/error.hpp"
#include "zzd/random.hpp"

namespace zzd {

EmbeddingVector stub_encode(std::string_view text, std::uint64_t seed) {
  SplitMix64 rng(fnv1a64(text, seed));
  Eigen::Matrix<double, kEmbedDim, 1> v;
  for (int i = 0; i < kEmbedDim; ++i) v[i] = rng.normal();
  v /= v.norm();
  return v.cast<float>();
}

ScaledEmbedding scale_to_pixels(const EmbeddingVector& v) {
  if (!v.allFinite()) throw NumericError("scale_to_pixels: embedding has non-finite components");
  ScaledEmbedding out;
  out.values = ((v.array() + 1.0f) * 127.5f).cwiseMax(0.0f).cwiseMin(255.0f).matrix();
  return out;
}

Eigen::MatrixXf to_input_batch(std::span<const ScaledEmbedding> batch) {
  Eigen::MatrixXf x(kEmbedDim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = batch[i].values;
  return x;
}

EmbeddingVector StubEncoder::encode(std::string_view, std::string_view text) const {
  return stub_encode(text, seed_);
}

std::string StubEncoder::name() const { return "stub:" + std::to_string(seed_); }

FileEncoder::FileEncoder(const std::filesystem::path& path) : path_(path.string()) {
  for (auto& r : read_embeddings(path)) table_.insert_or_assign(r.chunk_id, r.vector);
}

EmbeddingVector FileEncoder::encode(std::string_view chunk_id, std::string_view) const {
  auto it = table_.find(std::string(chunk_id));
  if (it == table_.end()) {
    throw DataError("no embedding for chunk '" + std::string(chunk_id) + "' in '" + path_ + "'");
  }
  return it->second;
}

std::string FileEncoder::name() const { return "file:" + path_; }

std::unique_ptr<Encoder> make_encoder(std::string_view spec) {
  if (spec == "stub") return std::make_unique<StubEncoder>(0);
  if (spec.starts_with("stub:")) {
    const std::string seed(spec.substr(5));
    try {
      std::size_t pos = 0;
      const auto value = std::stoull(seed, &pos);
      if (pos == seed.size()) return std::make_unique<StubEncoder>(value);
    } catch (const std::exception&) {
    }
    throw ConfigError("invalid stub encoder seed '" + seed + "'");
  }
  if (spec.starts_with("file:")) return std::make_unique<FileEncoder>(std::string(spec.substr(5)));
  throw ConfigError("unknown encoder '" + std::string(spec) + "' (expected stub, stub:<seed> or file:<path>)");
}

void write_embeddings(std::span<const EmbeddingRecord> records, const std::filesystem::path& path) {
  for (const auto& r : records) {
    if (r.chunk_id.empty()) throw DataError("embedding record with empty chunk id");
    if (r.chunk_id.size() > std::numeric_limits<std::uint16_t>::max())
      throw DataError("chunk id too long: '" + r.chunk_id.substr(0, 32) + "...'");
    if (!r.vector.allFinite()) throw NumericError("non-finite embedding for chunk '" + r.chunk_id + "'");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write '" + path.string() + "'");
  out.write(kEmbeddingMagic, 4);
  io::write_le<std::uint16_t>(out, kEmbeddingVersion);
  io::write_le<std::uint64_t>(out, records.size());
  io::write_le<std::uint32_t>(out, kEmbedDim);
  for (const auto& r : records) {
    io::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.chunk_id.size()));
    out.write(r.chunk_id.data(), static_cast<std::streamsize>(r.chunk_id.size()));
    io::write_le<std::uint8_t>(out, r.label ? static_cast<std::uint8_t>(*r.label) : kUnlabeled);
    for (int i = 0; i < kEmbedDim; ++i) io::write_le<float>(out, r.vector[i]);
  }
  if (!out) throw FormatError(FormatError::Kind::io, "failed writing '" + path.string() + "'");
}

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open embedding file '" + path.string() + "'");
  const auto where = [&](const std::string& msg) { return path.string() + ": " + msg; };
  try {
    const auto magic = io::read_bytes(in, 4, "magic");
    if (magic != std::string_view(kEmbeddingMagic, 4)) {
      throw FormatError(FormatError::Kind::bad_magic, "bad magic (expected ZZEB)");
    }
    const auto version = io::read_le<std::uint16_t>(in, "version");
    if (version != kEmbeddingVersion) {
      throw FormatError(FormatError::Kind::unsupported_version,
                        "unsupported ZZEB version " + std::to_string(version));
    }
    const auto count = io::read_le<std::uint64_t>(in, "record count");
    const auto dim = io::read_le<std::uint32_t>(in, "dimension");
    if (dim != kEmbedDim) {
      throw FormatError(FormatError::Kind::dimension,
                        "embedding dimension " + std::to_string(dim) + ", expected 512");
    }
    std::vector<EmbeddingRecord> records;
    records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
    for (std::uint64_t k = 0; k < count; ++k) {
      EmbeddingRecord r;
      const auto id_len = io::read_le<std::uint16_t>(in, "chunk id length");
      r.chunk_id = io::read_bytes(in, id_len, "chunk id");
      if (r.chunk_id.empty()) {
        throw FormatError(FormatError::Kind::corrupt, "record " + std::to_string(k) + " has an empty chunk id");
      }
      const auto label = io::read_le<std::uint8_t>(in, "label");
      if (label == 0 || label == 1) {
        r.label = static_cast<Label>(label);
      } else if (label != kUnlabeled) {
        throw FormatError(FormatError::Kind::corrupt, "record '" + r.chunk_id + "' has invalid label byte " +
                                                          std::to_string(label));
      }
      for (int i = 0; i < kEmbedDim; ++i) r.vector[i] = io::read_le<float>(in, "vector");
      records.push_back(std::move(r));
    }
    return records;
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), where(e.what()));
  }
}

std::vector<EmbeddingRecord> encode_records(std::span<const ChunkRecord> chunks, const Encoder& encoder) {
  std::vector<EmbeddingRecord> out;
  out.reserve(chunks.size());
  for (const auto& c : chunks) out.push_back({c.id, c.label, encoder.encode(c.id, c.text)});
  return out;
}

}  // namespace zzd
