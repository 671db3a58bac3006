#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zzd/data.hpp"
#include "zzd/embedding.hpp"
#include "zzd/layers.hpp"
#include "zzd/loss.hpp"

namespace zzd {

enum class Architecture { zigzag, vanilla };
enum class Mode { train, eval };

std::string_view to_string(Architecture arch);
std::optional<Architecture> parse_architecture(std::string_view text);

struct ImageShape {
  int channels = 3;
  int height = 16;
  int width = 16;

  int size() const { return channels * height * width; }
  bool operator==(const ImageShape&) const = default;
};

inline constexpr int kMinBlockChannels = 64;
inline constexpr int kMaxBlockChannels = 256;

/// Architecture of the embedding classifier: a trainable 512 -> 768 affine
/// layer reshaped to a 3x16x16 image, a 3x3 stem, basic residual blocks with
/// the listed output widths, global average pooling, dropout and a 2-way
/// affine classifier.
struct NetConfig {
  Architecture arch = Architecture::zigzag;
  int embed_dim = kEmbedDim;
  int fc_dim = 768;
  ImageShape image;
  int stem_channels = 64;
  std::vector<int> block_channels = {64, 128, 256, 128, 256, 128, 256, 256};
  std::vector<int> downsample_blocks = {1, 3, 5};  // stride-2 block indices
  double dropout_rate = 0.2;
  int num_classes = 2;
  bool normalize_input = false;  // divide pixel inputs by 255 before the first layer

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  bool downsamples(std::size_t block) const;
  bool operator==(const NetConfig&) const = default;
};

NetConfig zigzag_config();

/// Monotone four-stage ResNet-18-style trunk, two blocks per stage, widths
/// [64, 128, 224, 256], sized to the same parameter budget as the ZigZag net.
NetConfig vanilla_config();

/// True when the width sequence rises at least twice and falls at least twice.
bool is_zigzag(std::span<const int> channels);

template <typename Scalar>
struct Linear {
  Mat<Scalar> weight;  // out x in
  Mat<Scalar> bias;    // out x 1
};

/// Bias-free convolution. A 3x3 weight is out x (9 * in) with columns ordered
/// (ky, kx, in_channel); a 1x1 weight is out x in.
template <typename Scalar>
struct Conv {
  Mat<Scalar> weight;
  int kernel = 3;
  int stride = 1;
};

template <typename Scalar>
struct BatchNorm {
  Mat<Scalar> gamma;
  Mat<Scalar> beta;
  Mat<Scalar> running_mean;  // buffer, not trained
  Mat<Scalar> running_var;   // buffer, not trained
};

template <typename Scalar>
struct Projection {
  Conv<Scalar> conv;
  BatchNorm<Scalar> bn;
};

template <typename Scalar>
struct ResidualBlock {
  Conv<Scalar> conv1;
  BatchNorm<Scalar> bn1;
  Conv<Scalar> conv2;
  BatchNorm<Scalar> bn2;
  std::optional<Projection<Scalar>> projection;  // on channel or stride change
};

template <typename Scalar>
struct Parameters {
  NetConfig config;
  Linear<Scalar> embed;
  Conv<Scalar> stem;
  BatchNorm<Scalar> stem_bn;
  std::vector<ResidualBlock<Scalar>> blocks;
  Linear<Scalar> head;
};

/// Visits every trainable tensor as f(name, matrix) in a fixed order.
template <typename P, typename F>
void for_each_parameter(P& p, F&& f) {
  f(std::string("embed.weight"), p.embed.weight);
  f(std::string("embed.bias"), p.embed.bias);
  f(std::string("stem.conv.weight"), p.stem.weight);
  f(std::string("stem.bn.gamma"), p.stem_bn.gamma);
  f(std::string("stem.bn.beta"), p.stem_bn.beta);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string prefix = "blocks." + std::to_string(i) + ".";
    f(prefix + "conv1.weight", b.conv1.weight);
    f(prefix + "bn1.gamma", b.bn1.gamma);
    f(prefix + "bn1.beta", b.bn1.beta);
    f(prefix + "conv2.weight", b.conv2.weight);
    f(prefix + "bn2.gamma", b.bn2.gamma);
    f(prefix + "bn2.beta", b.bn2.beta);
    if (b.projection) {
      f(prefix + "projection.weight", b.projection->conv.weight);
      f(prefix + "projection_bn.gamma", b.projection->bn.gamma);
      f(prefix + "projection_bn.beta", b.projection->bn.beta);
    }
  }
  f(std::string("head.weight"), p.head.weight);
  f(std::string("head.bias"), p.head.bias);
}

/// Visits the normalization running statistics, in forward order.
template <typename P, typename F>
void for_each_buffer(P& p, F&& f) {
  auto visit_bn = [&f](const std::string& prefix, auto& bn) {
    f(prefix + "running_mean", bn.running_mean);
    f(prefix + "running_var", bn.running_var);
  };
  visit_bn("stem.bn.", p.stem_bn);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string prefix = "blocks." + std::to_string(i) + ".";
    visit_bn(prefix + "bn1.", b.bn1);
    visit_bn(prefix + "bn2.", b.bn2);
    if (b.projection) visit_bn(prefix + "projection_bn.", b.projection->bn);
  }
}

/// Zero weights, identity normalization, and running statistics (0, 1).
template <typename Scalar>
Parameters<Scalar> allocate(const NetConfig& config);

/// allocate() followed by seeded fan-in scaled normal initialization of every
/// weight: std sqrt(2 / fan_in) for convolutions, sqrt(1 / fan_in) for the
/// affine layers. Each tensor draws from its own derived stream.
template <typename Scalar>
Parameters<Scalar> build(const NetConfig& config, std::uint64_t init_seed);

template <typename Scalar>
Parameters<Scalar> build_vanilla(std::uint64_t init_seed) {
  return build<Scalar>(vanilla_config(), init_seed);
}

/// Number of trainable scalars (running statistics excluded).
template <typename Scalar>
std::int64_t param_count(const Parameters<Scalar>& params) {
  std::int64_t total = 0;
  for_each_parameter(params, [&](const std::string&, const auto& m) { total += m.size(); });
  return total;
}

/// Same structure, every tensor (buffers included) zero.
template <typename Scalar>
Parameters<Scalar> zeros_like(const Parameters<Scalar>& params);

template <typename To, typename From>
Parameters<To> cast(const Parameters<From>& params) {
  Parameters<To> out = allocate<To>(params.config);
  std::vector<const Mat<From>*> src;
  for_each_parameter(params, [&](const std::string&, const auto& m) { src.push_back(&m); });
  for_each_buffer(params, [&](const std::string&, const auto& m) { src.push_back(&m); });
  std::size_t k = 0;
  auto copy = [&](const std::string&, auto& m) { m = src[k++]->template cast<To>(); };
  for_each_parameter(out, copy);
  for_each_buffer(out, copy);
  return out;
}

struct ForwardOptions {
  Mode mode = Mode::eval;
  std::uint64_t dropout_seed = 0;
};

/// Batch means and unbiased variances of every normalization layer seen in a
/// train-mode pass, in for_each_buffer order.
template <typename Scalar>
struct BatchStatistics {
  std::vector<Vec<Scalar>> means;
  std::vector<Vec<Scalar>> variances;
};

/// Logits (2 x B) for a 512 x B batch of scaled embeddings. Train mode uses
/// batch statistics and dropout; eval mode is a pure function of its inputs.
/// Throws DataError on a malformed batch and NumericError naming the first
/// layer that produced a non-finite value.
template <typename Scalar>
Mat<Scalar> forward(const Parameters<Scalar>& params, const Mat<Scalar>& batch, ForwardOptions options = {});

/// The 3x16x16 image produced by the embedding layer.
template <typename Scalar>
FeatureMap<Scalar> embed_image(const Parameters<Scalar>& params, const Mat<Scalar>& batch);

template <typename Scalar>
struct GradientResult {
  Scalar loss = 0;
  Mat<Scalar> logits;
  Parameters<Scalar> grads;  // buffers left at zero
  BatchStatistics<Scalar> statistics;
};

/// Mean cross-entropy of the batch and its gradient with respect to every
/// trainable tensor, by reverse-mode differentiation of forward().
template <typename Scalar>
GradientResult<Scalar> gradients(const Parameters<Scalar>& params, const Mat<Scalar>& batch,
                                 std::span<const Label> labels,
                                 ForwardOptions options = {Mode::train, 0});

/// Exponential running-average update: r <- (1 - momentum) r + momentum s.
template <typename Scalar>
void update_running_statistics(Parameters<Scalar>& params, const BatchStatistics<Scalar>& stats,
                               double momentum = layers::kBatchNormMomentum);

extern template Parameters<float> allocate<float>(const NetConfig&);
extern template Parameters<double> allocate<double>(const NetConfig&);
extern template Parameters<float> build<float>(const NetConfig&, std::uint64_t);
extern template Parameters<double> build<double>(const NetConfig&, std::uint64_t);
extern template Parameters<float> zeros_like<float>(const Parameters<float>&);
extern template Parameters<double> zeros_like<double>(const Parameters<double>&);
extern template Mat<float> forward<float>(const Parameters<float>&, const Mat<float>&, ForwardOptions);
extern template Mat<double> forward<double>(const Parameters<double>&, const Mat<double>&, ForwardOptions);
extern template FeatureMap<float> embed_image<float>(const Parameters<float>&, const Mat<float>&);
extern template FeatureMap<double> embed_image<double>(const Parameters<double>&, const Mat<double>&);
extern template GradientResult<float> gradients<float>(const Parameters<float>&, const Mat<float>&,
                                                       std::span<const Label>, ForwardOptions);
extern template GradientResult<double> gradients<double>(const Parameters<double>&, const Mat<double>&,
                                                         std::span<const Label>, ForwardOptions);
extern template void update_running_statistics<float>(Parameters<float>&, const BatchStatistics<float>&, double);
extern template void update_running_statistics<double>(Parameters<double>&, const BatchStatistics<double>&,
                                                       double);

}  // namespace zzd
