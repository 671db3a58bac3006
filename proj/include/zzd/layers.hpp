#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "zzd/error.hpp"

namespace zzd {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Activations of a convolutional layer: one row per channel, one column per
/// pixel, columns ordered (sample, y, x) with x fastest.
template <typename Scalar>
struct FeatureMap {
  Mat<Scalar> data;
  int batch = 0;
  int height = 0;
  int width = 0;

  int channels() const { return static_cast<int>(data.rows()); }
  Eigen::Index pixel(int b, int y, int x) const {
    return (static_cast<Eigen::Index>(b) * height + y) * width + x;
  }
};

inline int conv_output_size(int in, int stride) { return (in + 2 - 3) / stride + 1; }

template <typename Derived>
void check_finite(const Eigen::MatrixBase<Derived>& m, const std::string& layer) {
  if (!m.allFinite()) throw NumericError("non-finite activation in layer '" + layer + "'");
}

namespace layers {

/// Patch matrix of a 3x3, pad-1 convolution. Row block k = ky * 3 + kx holds
/// the input channels at tap (ky, kx); out-of-image taps are zero.
template <typename Scalar>
Mat<Scalar> im2col3x3(const FeatureMap<Scalar>& in, int stride, int out_h, int out_w) {
  const int c = in.channels();
  Mat<Scalar> cols = Mat<Scalar>::Zero(9 * c, static_cast<Eigen::Index>(in.batch) * out_h * out_w);
  Eigen::Index j = 0;
  for (int b = 0; b < in.batch; ++b) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox, ++j) {
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= in.width) continue;
            cols.block((ky * 3 + kx) * c, j, c, 1) = in.data.col(in.pixel(b, iy, ix));
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col3x3: scatters patch gradients back onto the input grid.
template <typename Scalar>
Mat<Scalar> col2im3x3(const Mat<Scalar>& dcols, const FeatureMap<Scalar>& geometry, int stride,
                      int out_h, int out_w) {
  const int c = geometry.channels();
  Mat<Scalar> din = Mat<Scalar>::Zero(c, geometry.data.cols());
  Eigen::Index j = 0;
  for (int b = 0; b < geometry.batch; ++b) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox, ++j) {
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= geometry.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= geometry.width) continue;
            din.col(geometry.pixel(b, iy, ix)) += dcols.block((ky * 3 + kx) * c, j, c, 1);
          }
        }
      }
    }
  }
  return din;
}

/// Pixels sampled by a 1x1 convolution with the given stride.
template <typename Scalar>
Mat<Scalar> subsample(const FeatureMap<Scalar>& in, int stride, int out_h, int out_w) {
  if (stride == 1) return in.data;
  Mat<Scalar> out(in.channels(), static_cast<Eigen::Index>(in.batch) * out_h * out_w);
  Eigen::Index j = 0;
  for (int b = 0; b < in.batch; ++b)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox, ++j) out.col(j) = in.data.col(in.pixel(b, oy * stride, ox * stride));
  return out;
}

template <typename Scalar>
Mat<Scalar> subsample_adjoint(const Mat<Scalar>& dsub, const FeatureMap<Scalar>& geometry, int stride,
                              int out_h, int out_w) {
  if (stride == 1) return dsub;
  Mat<Scalar> din = Mat<Scalar>::Zero(geometry.channels(), geometry.data.cols());
  Eigen::Index j = 0;
  for (int b = 0; b < geometry.batch; ++b)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox, ++j) din.col(geometry.pixel(b, oy * stride, ox * stride)) = dsub.col(j);
  return din;
}

template <typename Scalar>
struct BatchNormCache {
  Mat<Scalar> xhat;
  Vec<Scalar> inv_std;
  bool batch_statistics = false;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Per-channel (row) normalization. With batch statistics the biased batch
/// variance normalizes and `unbiased_var` receives the unbiased estimate for
/// the running average.
template <typename Scalar>
Mat<Scalar> batch_norm(const Mat<Scalar>& x, const Mat<Scalar>& gamma, const Mat<Scalar>& beta,
                       const Mat<Scalar>& running_mean, const Mat<Scalar>& running_var, bool batch_statistics,
                       BatchNormCache<Scalar>* cache, Vec<Scalar>* batch_mean, Vec<Scalar>* unbiased_var) {
  const auto eps = static_cast<Scalar>(kBatchNormEpsilon);
  Vec<Scalar> mean, inv_std;
  if (batch_statistics) {
    const auto n = static_cast<Scalar>(x.cols());
    mean = x.rowwise().mean();
    const Vec<Scalar> var = (x.colwise() - mean).array().square().rowwise().sum().matrix() / n;
    inv_std = (var.array() + eps).rsqrt().matrix();
    if (batch_mean) *batch_mean = mean;
    if (unbiased_var) *unbiased_var = x.cols() > 1 ? Vec<Scalar>(var * (n / (n - 1))) : var;
  } else {
    mean = running_mean.col(0);
    inv_std = (running_var.col(0).array() + eps).rsqrt().matrix();
  }
  Mat<Scalar> xhat = ((x.colwise() - mean).array().colwise() * inv_std.array()).matrix();
  Mat<Scalar> y = ((xhat.array().colwise() * gamma.col(0).array()).colwise() + beta.col(0).array()).matrix();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->batch_statistics = batch_statistics;
  }
  return y;
}

template <typename Scalar>
Mat<Scalar> batch_norm_backward(const Mat<Scalar>& dy, const Mat<Scalar>& gamma, const BatchNormCache<Scalar>& cache,
                                Mat<Scalar>& dgamma, Mat<Scalar>& dbeta) {
  dgamma = (dy.array() * cache.xhat.array()).rowwise().sum().matrix();
  dbeta = dy.rowwise().sum();
  const auto scale = (gamma.col(0).array() * cache.inv_std.array()).eval();
  if (!cache.batch_statistics) return (dy.array().colwise() * scale).matrix();

  const auto n = static_cast<Scalar>(dy.cols());
  const Vec<Scalar> mean_dy = dbeta / n;
  const Vec<Scalar> mean_dy_xhat = dgamma / n;
  return (((dy.colwise() - mean_dy).array() - cache.xhat.array().colwise() * mean_dy_xhat.array())
              .colwise() *
          scale)
      .matrix();
}

}  // namespace layers
}  // namespace zzd
