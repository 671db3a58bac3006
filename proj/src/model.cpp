#include "zzd/model.hpp"

#include <algorithm>
#include <cmath>

#include "zzd/random.hpp"

namespace zzd {

std::string_view to_string(Architecture arch) { return arch == Architecture::zigzag ? "zigzag" : "vanilla"; }

std::optional<Architecture> parse_architecture(std::string_view text) {
  if (text == "zigzag") return Architecture::zigzag;
  if (text == "vanilla") return Architecture::vanilla;
  return std::nullopt;
}

void NetConfig::validate() const {
  if (embed_dim != kEmbedDim) throw ConfigError("embed_dim must be 512, got " + std::to_string(embed_dim));
  if (image.channels <= 0 || image.height <= 0 || image.width <= 0) throw ConfigError("image shape must be positive");
  if (fc_dim != image.size()) {
    throw ConfigError("fc_dim " + std::to_string(fc_dim) + " does not match image size " +
                      std::to_string(image.size()));
  }
  if (stem_channels < kMinBlockChannels || stem_channels > kMaxBlockChannels) {
    throw ConfigError("stem_channels " + std::to_string(stem_channels) + " outside [64, 256]");
  }
  if (block_channels.empty()) throw ConfigError("block_channels is empty");
  for (int c : block_channels) {
    if (c < kMinBlockChannels || c > kMaxBlockChannels) {
      throw ConfigError("block channel width " + std::to_string(c) + " outside [64, 256]");
    }
  }
  int h = image.height, w = image.width;
  for (int idx : downsample_blocks) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= block_channels.size()) {
      throw ConfigError("downsample block index " + std::to_string(idx) + " out of range");
    }
  }
  for (std::size_t i = 0; i < block_channels.size(); ++i) {
    if (downsamples(i)) {
      h = conv_output_size(h, 2);
      w = conv_output_size(w, 2);
    }
  }
  if (h < 1 || w < 1) throw ConfigError("too many downsampling blocks for the image size");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
  if (num_classes != 2) throw ConfigError("num_classes must be 2");
}

bool NetConfig::downsamples(std::size_t block) const {
  return std::find(downsample_blocks.begin(), downsample_blocks.end(), static_cast<int>(block)) !=
         downsample_blocks.end();
}

NetConfig zigzag_config() { return NetConfig{}; }

NetConfig vanilla_config() {
  NetConfig c;
  c.arch = Architecture::vanilla;
  c.block_channels = {64, 64, 128, 128, 224, 224, 256, 256};
  c.downsample_blocks = {2, 4, 6};
  return c;
}

bool is_zigzag(std::span<const int> channels) {
  int rises = 0, falls = 0;
  for (std::size_t i = 1; i < channels.size(); ++i) {
    if (channels[i] > channels[i - 1]) ++rises;
    if (channels[i] < channels[i - 1]) ++falls;
  }
  return rises >= 2 && falls >= 2;
}

namespace {

template <typename Scalar>
BatchNorm<Scalar> identity_bn(int channels) {
  return {Mat<Scalar>::Ones(channels, 1), Mat<Scalar>::Zero(channels, 1), Mat<Scalar>::Zero(channels, 1),
          Mat<Scalar>::Ones(channels, 1)};
}

template <typename Scalar>
Conv<Scalar> zero_conv(int in, int out, int kernel, int stride) {
  return {Mat<Scalar>::Zero(out, kernel * kernel * in), kernel, stride};
}

// Everything a backward pass needs from the forward pass.
template <typename Scalar>
struct BlockTape {
  FeatureMap<Scalar> input;
  Mat<Scalar> cols1;
  layers::BatchNormCache<Scalar> bn1;
  FeatureMap<Scalar> relu1;
  Mat<Scalar> cols2;
  layers::BatchNormCache<Scalar> bn2;
  Mat<Scalar> projection_in;
  layers::BatchNormCache<Scalar> projection_bn;
  FeatureMap<Scalar> output;
};

template <typename Scalar>
struct Tape {
  Mat<Scalar> input;
  FeatureMap<Scalar> image;
  Mat<Scalar> stem_cols;
  layers::BatchNormCache<Scalar> stem_bn;
  FeatureMap<Scalar> stem_out;
  std::vector<BlockTape<Scalar>> blocks;
  Mat<Scalar> pooled;  // after dropout
  Mat<Scalar> dropout_mask;
};

template <typename Scalar>
class Network {
 public:
  Network(const Parameters<Scalar>& params, ForwardOptions options, Tape<Scalar>* tape,
          BatchStatistics<Scalar>* stats)
      : p_(params), train_(options.mode == Mode::train), dropout_seed_(options.dropout_seed), tape_(tape),
        stats_(stats) {}

  Mat<Scalar> prepare_input(const Mat<Scalar>& batch) const {
    if (batch.rows() != p_.config.embed_dim) {
      throw DataError("input has " + std::to_string(batch.rows()) + " features, expected " +
                      std::to_string(p_.config.embed_dim));
    }
    if (batch.cols() == 0) throw DataError("empty input batch");
    check_finite(batch, "input");
    if (p_.config.normalize_input) return batch / Scalar(255);
    return batch;
  }

  FeatureMap<Scalar> image(const Mat<Scalar>& x) const {
    Mat<Scalar> h = p_.embed.weight * x;
    h.colwise() += p_.embed.bias.col(0);
    check_finite(h, "embed");
    const auto& shape = p_.config.image;
    const int hw = shape.height * shape.width;
    FeatureMap<Scalar> img{Mat<Scalar>(shape.channels, x.cols() * hw), static_cast<int>(x.cols()), shape.height,
                           shape.width};
    for (Eigen::Index b = 0; b < x.cols(); ++b) {
      for (int c = 0; c < shape.channels; ++c) {
        img.data.row(c).segment(b * hw, hw) = h.col(b).segment(c * hw, hw).transpose();
      }
    }
    return img;
  }

  Mat<Scalar> run(const Mat<Scalar>& batch) {
    Mat<Scalar> x = prepare_input(batch);
    FeatureMap<Scalar> img = image(x);

    FeatureMap<Scalar> act{Mat<Scalar>(), img.batch, img.height, img.width};
    Mat<Scalar> cols = layers::im2col3x3(img, 1, img.height, img.width);
    Mat<Scalar> conv;
    conv.noalias() = p_.stem.weight * cols;
    check_finite(conv, "stem.conv");
    act.data = bn(conv, p_.stem_bn, tape_ ? &tape_->stem_bn : nullptr).cwiseMax(Scalar(0));
    check_finite(act.data, "stem.bn");
    if (tape_) {
      tape_->input = std::move(x);
      tape_->image = std::move(img);
      tape_->stem_cols = std::move(cols);
      tape_->stem_out = act;
      tape_->blocks.resize(p_.blocks.size());
    }

    for (std::size_t i = 0; i < p_.blocks.size(); ++i) {
      act = block(i, std::move(act));
    }

    const int hw = act.height * act.width;
    Mat<Scalar> pooled(act.channels(), act.batch);
    for (int b = 0; b < act.batch; ++b) pooled.col(b) = act.data.middleCols(static_cast<Eigen::Index>(b) * hw, hw).rowwise().mean();

    Mat<Scalar> mask;
    const double rate = p_.config.dropout_rate;
    if (train_ && rate > 0.0) {
      SplitMix64 rng(dropout_seed_);
      const auto keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate));
      mask.resize(pooled.rows(), pooled.cols());
      for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = rng.uniform() < rate ? Scalar(0) : keep_scale;
      pooled.array() *= mask.array();
    }

    Mat<Scalar> logits = p_.head.weight * pooled;
    logits.colwise() += p_.head.bias.col(0);
    check_finite(logits, "head");
    if (tape_) {
      tape_->pooled = std::move(pooled);
      tape_->dropout_mask = std::move(mask);
    }
    return logits;
  }

  Parameters<Scalar> backward(const Mat<Scalar>& dlogits) const {
    Parameters<Scalar> g = zeros_like(p_);
    const Tape<Scalar>& t = *tape_;

    g.head.weight.noalias() = dlogits * t.pooled.transpose();
    g.head.bias = dlogits.rowwise().sum();
    Mat<Scalar> dpooled = p_.head.weight.transpose() * dlogits;
    if (t.dropout_mask.size() > 0) dpooled.array() *= t.dropout_mask.array();

    const FeatureMap<Scalar>& last = t.blocks.empty() ? t.stem_out : t.blocks.back().output;
    const int hw = last.height * last.width;
    Mat<Scalar> dact(last.channels(), last.data.cols());
    for (int b = 0; b < last.batch; ++b) {
      dact.middleCols(static_cast<Eigen::Index>(b) * hw, hw) =
          (dpooled.col(b) / static_cast<Scalar>(hw)).replicate(1, hw);
    }

    for (std::size_t i = p_.blocks.size(); i-- > 0;) dact = block_backward(i, dact, g.blocks[i]);

    Mat<Scalar> dconv = (dact.array() * (t.stem_out.data.array() > Scalar(0)).template cast<Scalar>()).matrix();
    dconv = layers::batch_norm_backward(dconv, p_.stem_bn.gamma, t.stem_bn, g.stem_bn.gamma, g.stem_bn.beta);
    g.stem.weight.noalias() = dconv * t.stem_cols.transpose();
    const Mat<Scalar> dcols = p_.stem.weight.transpose() * dconv;
    const Mat<Scalar> dimg = layers::col2im3x3(dcols, t.image, 1, t.image.height, t.image.width);

    const auto& shape = p_.config.image;
    const int img_hw = shape.height * shape.width;
    Mat<Scalar> dh(p_.config.fc_dim, t.image.batch);
    for (int b = 0; b < t.image.batch; ++b) {
      for (int c = 0; c < shape.channels; ++c) {
        dh.col(b).segment(c * img_hw, img_hw) =
            dimg.row(c).segment(static_cast<Eigen::Index>(b) * img_hw, img_hw).transpose();
      }
    }
    g.embed.weight.noalias() = dh * t.input.transpose();
    g.embed.bias = dh.rowwise().sum();
    return g;
  }

 private:
  Mat<Scalar> bn(const Mat<Scalar>& x, const BatchNorm<Scalar>& layer, layers::BatchNormCache<Scalar>* cache) {
    Vec<Scalar> mean, var;
    Mat<Scalar> y = layers::batch_norm(x, layer.gamma, layer.beta, layer.running_mean, layer.running_var, train_,
                                       cache, train_ ? &mean : nullptr, train_ ? &var : nullptr);
    if (train_ && stats_) {
      stats_->means.push_back(std::move(mean));
      stats_->variances.push_back(std::move(var));
    }
    return y;
  }

  FeatureMap<Scalar> block(std::size_t i, FeatureMap<Scalar> in) {
    const auto& blk = p_.blocks[i];
    const std::string name = "blocks." + std::to_string(i);
    const int stride = blk.conv1.stride;
    const int oh = conv_output_size(in.height, stride), ow = conv_output_size(in.width, stride);
    BlockTape<Scalar>* bt = tape_ ? &tape_->blocks[i] : nullptr;

    Mat<Scalar> cols1 = layers::im2col3x3(in, stride, oh, ow);
    Mat<Scalar> c1;
    c1.noalias() = blk.conv1.weight * cols1;
    check_finite(c1, name + ".conv1");
    FeatureMap<Scalar> r1{bn(c1, blk.bn1, bt ? &bt->bn1 : nullptr).cwiseMax(Scalar(0)), in.batch, oh, ow};

    Mat<Scalar> cols2 = layers::im2col3x3(r1, 1, oh, ow);
    Mat<Scalar> c2;
    c2.noalias() = blk.conv2.weight * cols2;
    check_finite(c2, name + ".conv2");
    Mat<Scalar> sum = bn(c2, blk.bn2, bt ? &bt->bn2 : nullptr);

    Mat<Scalar> projection_in;
    if (blk.projection) {
      projection_in = layers::subsample(in, stride, oh, ow);
      Mat<Scalar> s;
      s.noalias() = blk.projection->conv.weight * projection_in;
      check_finite(s, name + ".projection");
      sum += bn(s, blk.projection->bn, bt ? &bt->projection_bn : nullptr);
    } else {
      sum += in.data;
    }
    FeatureMap<Scalar> out{sum.cwiseMax(Scalar(0)), in.batch, oh, ow};
    check_finite(out.data, name);

    if (bt) {
      bt->input = std::move(in);
      bt->cols1 = std::move(cols1);
      bt->relu1 = std::move(r1);
      bt->cols2 = std::move(cols2);
      bt->projection_in = std::move(projection_in);
      bt->output = out;
    }
    return out;
  }

  Mat<Scalar> block_backward(std::size_t i, const Mat<Scalar>& dout, ResidualBlock<Scalar>& g) const {
    const auto& blk = p_.blocks[i];
    const auto& t = tape_->blocks[i];
    const int stride = blk.conv1.stride;
    const int oh = t.output.height, ow = t.output.width;

    const Mat<Scalar> dsum = (dout.array() * (t.output.data.array() > Scalar(0)).template cast<Scalar>()).matrix();

    Mat<Scalar> dc2 = layers::batch_norm_backward(dsum, blk.bn2.gamma, t.bn2, g.bn2.gamma, g.bn2.beta);
    g.conv2.weight.noalias() = dc2 * t.cols2.transpose();
    Mat<Scalar> dr1 = layers::col2im3x3(Mat<Scalar>(blk.conv2.weight.transpose() * dc2), t.relu1, 1, oh, ow);
    dr1.array() *= (t.relu1.data.array() > Scalar(0)).template cast<Scalar>();
    Mat<Scalar> dc1 = layers::batch_norm_backward(dr1, blk.bn1.gamma, t.bn1, g.bn1.gamma, g.bn1.beta);
    g.conv1.weight.noalias() = dc1 * t.cols1.transpose();
    Mat<Scalar> din = layers::col2im3x3(Mat<Scalar>(blk.conv1.weight.transpose() * dc1), t.input, stride, oh, ow);

    if (blk.projection) {
      auto& gp = *g.projection;
      Mat<Scalar> ds = layers::batch_norm_backward(dsum, blk.projection->bn.gamma, t.projection_bn, gp.bn.gamma,
                                                   gp.bn.beta);
      gp.conv.weight.noalias() = ds * t.projection_in.transpose();
      din += layers::subsample_adjoint(Mat<Scalar>(blk.projection->conv.weight.transpose() * ds), t.input, stride,
                                       oh, ow);
    } else {
      din += dsum;
    }
    return din;
  }

  const Parameters<Scalar>& p_;
  bool train_;
  std::uint64_t dropout_seed_;
  Tape<Scalar>* tape_;
  BatchStatistics<Scalar>* stats_;
};

}  // namespace

template <typename Scalar>
Parameters<Scalar> allocate(const NetConfig& config) {
  config.validate();
  Parameters<Scalar> p;
  p.config = config;
  p.embed = {Mat<Scalar>::Zero(config.fc_dim, config.embed_dim), Mat<Scalar>::Zero(config.fc_dim, 1)};
  p.stem = zero_conv<Scalar>(config.image.channels, config.stem_channels, 3, 1);
  p.stem_bn = identity_bn<Scalar>(config.stem_channels);
  int in = config.stem_channels;
  for (std::size_t i = 0; i < config.block_channels.size(); ++i) {
    const int out = config.block_channels[i];
    const int stride = config.downsamples(i) ? 2 : 1;
    ResidualBlock<Scalar> b;
    b.conv1 = zero_conv<Scalar>(in, out, 3, stride);
    b.bn1 = identity_bn<Scalar>(out);
    b.conv2 = zero_conv<Scalar>(out, out, 3, 1);
    b.bn2 = identity_bn<Scalar>(out);
    if (in != out || stride != 1) b.projection = Projection<Scalar>{zero_conv<Scalar>(in, out, 1, stride), identity_bn<Scalar>(out)};
    p.blocks.push_back(std::move(b));
    in = out;
  }
  p.head = {Mat<Scalar>::Zero(config.num_classes, in), Mat<Scalar>::Zero(config.num_classes, 1)};
  return p;
}

template <typename Scalar>
Parameters<Scalar> build(const NetConfig& config, std::uint64_t init_seed) {
  Parameters<Scalar> p = allocate<Scalar>(config);
  std::uint64_t index = 0;
  for_each_parameter(p, [&](const std::string& name, Mat<Scalar>& m) {
    const std::uint64_t stream = index++;
    if (!name.ends_with(".weight")) return;
    const bool affine = name.starts_with("embed.") || name.starts_with("head.");
    const double stddev = std::sqrt((affine ? 1.0 : 2.0) / static_cast<double>(m.cols()));
    SplitMix64 rng(derive_seed(init_seed, stream));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<Scalar>(stddev * rng.normal());
  });
  return p;
}

template <typename Scalar>
Parameters<Scalar> zeros_like(const Parameters<Scalar>& params) {
  Parameters<Scalar> z = params;
  auto zero = [](const std::string&, Mat<Scalar>& m) { m.setZero(); };
  for_each_parameter(z, zero);
  for_each_buffer(z, zero);
  return z;
}

template <typename Scalar>
Mat<Scalar> forward(const Parameters<Scalar>& params, const Mat<Scalar>& batch, ForwardOptions options) {
  Network<Scalar> net(params, options, nullptr, nullptr);
  return net.run(batch);
}

template <typename Scalar>
FeatureMap<Scalar> embed_image(const Parameters<Scalar>& params, const Mat<Scalar>& batch) {
  Network<Scalar> net(params, {}, nullptr, nullptr);
  return net.image(net.prepare_input(batch));
}

template <typename Scalar>
GradientResult<Scalar> gradients(const Parameters<Scalar>& params, const Mat<Scalar>& batch,
                                 std::span<const Label> labels, ForwardOptions options) {
  if (static_cast<std::size_t>(batch.cols()) != labels.size()) {
    throw DataError("gradients: " + std::to_string(labels.size()) + " labels for a batch of " +
                    std::to_string(batch.cols()));
  }
  Tape<Scalar> tape;
  GradientResult<Scalar> result;
  Network<Scalar> net(params, options, &tape, &result.statistics);
  result.logits = net.run(batch);
  Mat<Scalar> dlogits;
  result.loss = cross_entropy(result.logits, labels, &dlogits);
  result.grads = net.backward(dlogits);
  return result;
}

template <typename Scalar>
void update_running_statistics(Parameters<Scalar>& params, const BatchStatistics<Scalar>& stats, double momentum) {
  const auto m = static_cast<Scalar>(momentum);
  std::size_t k = 0;
  bool is_mean = true;
  for_each_buffer(params, [&](const std::string&, Mat<Scalar>& buffer) {
    if (k >= stats.means.size()) throw DataError("batch statistics do not match the model");
    const Vec<Scalar>& s = is_mean ? stats.means[k] : stats.variances[k];
    buffer = (Scalar(1) - m) * buffer + m * s;
    if (!is_mean) ++k;
    is_mean = !is_mean;
  });
}

template Parameters<float> allocate<float>(const NetConfig&);
template Parameters<double> allocate<double>(const NetConfig&);
template Parameters<float> build<float>(const NetConfig&, std::uint64_t);
template Parameters<double> build<double>(const NetConfig&, std::uint64_t);
template Parameters<float> zeros_like<float>(const Parameters<float>&);
template Parameters<double> zeros_like<double>(const Parameters<double>&);
template Mat<float> forward<float>(const Parameters<float>&, const Mat<float>&, ForwardOptions);
template Mat<double> forward<double>(const Parameters<double>&, const Mat<double>&, ForwardOptions);
template FeatureMap<float> embed_image<float>(const Parameters<float>&, const Mat<float>&);
template FeatureMap<double> embed_image<double>(const Parameters<double>&, const Mat<double>&);
template GradientResult<float> gradients<float>(const Parameters<float>&, const Mat<float>&, std::span<const Label>,
                                                ForwardOptions);
template GradientResult<double> gradients<double>(const Parameters<double>&, const Mat<double>&,
                                                  std::span<const Label>, ForwardOptions);
template void update_running_statistics<float>(Parameters<float>&, const BatchStatistics<float>&, double);
template void update_running_statistics<double>(Parameters<double>&, const BatchStatistics<double>&, double);

}  // namespace zzd
