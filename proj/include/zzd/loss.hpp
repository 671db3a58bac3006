#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "zzd/data.hpp"
#include "zzd/error.hpp"
#include "zzd/layers.hpp"

namespace zzd {

/// Two raw class scores of one chunk; column 0 is human, column 1 is ai.
struct LogitPair {
  double logit_human = 0.0;
  double logit_ai = 0.0;
};

template <typename Scalar>
LogitPair logit_pair(const Mat<Scalar>& logits, Eigen::Index column) {
  return {static_cast<double>(logits(0, column)), static_cast<double>(logits(1, column))};
}

/// Class decision with the fixed tie-break: exactly equal logits mean human.
inline Label predicted_label(const LogitPair& p) { return p.logit_ai > p.logit_human ? Label::ai : Label::human; }

/// Mean over the batch of -log softmax(logits)[label]; logits is C x B.
/// When `grad` is non-null it receives d(loss)/d(logits).
template <typename Scalar>
Scalar cross_entropy(const Mat<Scalar>& logits, std::span<const Label> labels, Mat<Scalar>* grad = nullptr) {
  const Eigen::Index batch = logits.cols();
  if (batch == 0) throw DataError("cross_entropy: empty batch");
  if (static_cast<std::size_t>(batch) != labels.size()) {
    throw DataError("cross_entropy: " + std::to_string(labels.size()) + " labels for a batch of " +
                    std::to_string(batch));
  }
  Scalar total = 0;
  if (grad) grad->resize(logits.rows(), batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto column = logits.col(b);
    const Scalar peak = column.maxCoeff();
    const auto shifted = (column.array() - peak).eval();
    const Scalar log_norm = std::log(shifted.exp().sum());
    const auto target = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(b)]);
    total += log_norm - shifted(target);
    if (grad) {
      grad->col(b) = (shifted - log_norm).exp().matrix();
      (*grad)(target, b) -= Scalar(1);
    }
  }
  if (grad) *grad /= static_cast<Scalar>(batch);
  return total / static_cast<Scalar>(batch);
}

}  // namespace zzd
