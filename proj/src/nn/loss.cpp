#include "ecglens/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "ecglens/common.hpp"

namespace ecglens::nn {

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw Error(ErrorCode::Data, "softmax: expected N x C logits, got " + shape_string(logits.shape));
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  Tensor<T> p(logits.shape);
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.data.data() + i * c;
    const double peak = static_cast<double>(*std::max_element(z, z + c));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(z[j]) - peak);
    for (std::size_t j = 0; j < c; ++j) p.data[i * c + j] = static_cast<T>(std::exp(static_cast<double>(z[j]) - peak) / sum);
  }
  return p;
}

template <typename T>
LossResult<T> softmax_xent(const Tensor<T>& logits, const Tensor<T>& targets) {
  expect_shape(targets.shape, logits.shape, "softmax_xent targets");
  if (logits.rank() != 2 || logits.dim(0) == 0)
    throw Error(ErrorCode::Data, "softmax_xent: expected non-empty N x C logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  LossResult<T> out{0.0, Tensor<T>(logits.shape)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.data.data() + i * c;
    const T* y = targets.data.data() + i * c;
    const double peak = static_cast<double>(*std::max_element(z, z + c));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(z[j]) - peak);
    const double log_sum = std::log(sum);
    for (std::size_t j = 0; j < c; ++j) {
      const double log_p = static_cast<double>(z[j]) - peak - log_sum;
      out.loss -= static_cast<double>(y[j]) * log_p * inv_n;
      out.grad.data[i * c + j] = static_cast<T>((std::exp(log_p) - static_cast<double>(y[j])) * inv_n);
    }
  }
  return out;
}

template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template LossResult<float> softmax_xent(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> softmax_xent(const Tensor<double>&, const Tensor<double>&);

}  // namespace ecglens::nn
