#pragma once

#include "ecglens/nn/tensor.hpp"

namespace ecglens::nn {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // dLoss/dLogits
};

/// Mean categorical cross-entropy of softmax(logits) against one-hot
/// targets; the gradient is (softmax - target) / N.
template <typename T>
LossResult<T> softmax_xent(const Tensor<T>& logits, const Tensor<T>& targets);

/// Row-wise softmax of an N x C tensor (max-subtracted).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

}  // namespace ecglens::nn
