#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "zzd/data.hpp"

namespace zzd {

inline constexpr int kEmbedDim = 512;

/// Sentence-encoder output. Finite by contract; roughly unit norm for real
/// encoders and exactly unit norm for the stub.
using EmbeddingVector = Eigen::Matrix<float, kEmbedDim, 1>;

/// An embedding mapped into the pixel range [0, 255].
struct ScaledEmbedding {
  EmbeddingVector values;
};

struct EmbeddingRecord {
  std::string chunk_id;
  std::optional<Label> label;
  EmbeddingVector vector;
};

/// Deterministic offline encoder: FNV-1a of (seed, UTF-8 bytes) seeds a
/// SplitMix64 stream, 512 standard normals are drawn and the result is
/// normalized to unit Euclidean norm.
EmbeddingVector stub_encode(std::string_view text, std::uint64_t seed);

/// Fixed affine map x -> (x + 1) / 2 * 255, clamped to [0, 255].
/// Throws NumericError on non-finite input.
ScaledEmbedding scale_to_pixels(const EmbeddingVector& v);

/// Packs scaled embeddings as the columns of a 512 x N model input.
Eigen::MatrixXf to_input_batch(std::span<const ScaledEmbedding> batch);

/// Source of embeddings for chunks. Implementations must be thread-safe for
/// concurrent encode() calls.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual EmbeddingVector encode(std::string_view chunk_id, std::string_view text) const = 0;
  virtual std::string name() const = 0;
};

class StubEncoder final : public Encoder {
 public:
  explicit StubEncoder(std::uint64_t seed = 0) : seed_(seed) {}
  EmbeddingVector encode(std::string_view chunk_id, std::string_view text) const override;
  std::string name() const override;

 private:
  std::uint64_t seed_;
};

/// Looks embeddings up by chunk id in a precomputed ZZEB file.
class FileEncoder final : public Encoder {
 public:
  explicit FileEncoder(const std::filesystem::path& path);
  EmbeddingVector encode(std::string_view chunk_id, std::string_view text) const override;
  std::string name() const override;

 private:
  std::string path_;
  std::unordered_map<std::string, EmbeddingVector> table_;
};

/// Parses "stub", "stub:<seed>" or "file:<path>".
std::unique_ptr<Encoder> make_encoder(std::string_view spec);

// ZZEB binary format, little-endian throughout:
//   "ZZEB" | u16 version | u64 record count | u32 dimension (512)
//   per record: u16 id length | id bytes | u8 label (0 human, 1 ai, 255 none)
//               | 512 x f32
inline constexpr char kEmbeddingMagic[4] = {'Z', 'Z', 'E', 'B'};
inline constexpr std::uint16_t kEmbeddingVersion = 1;
inline constexpr std::uint8_t kUnlabeled = 255;

void write_embeddings(std::span<const EmbeddingRecord> records, const std::filesystem::path& path);
std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path);

/// Encodes chunk-file records with `encoder`, keeping ids, labels and order.
std::vector<EmbeddingRecord> encode_records(std::span<const ChunkRecord> chunks, const Encoder& encoder);

}  // namespace zzd
