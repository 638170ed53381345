#include "ecglens/nn/tensor.hpp"

#include <cmath>

#include "ecglens/common.hpp"

namespace ecglens::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape s, const std::vector<T>& values) : shape(std::move(s)), data(values.begin(), values.end()) {
  if (data.size() != shape_size(shape))
    throw Error(ErrorCode::Data, "tensor: " + std::to_string(data.size()) + " values for shape " + shape_string(shape));
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape s) const {
  if (shape_size(s) != data.size())
    throw Error(ErrorCode::Data, "tensor: cannot reshape " + shape_string(shape) + " to " + shape_string(s));
  Tensor out;
  out.shape = std::move(s);
  out.data = data;
  return out;
}

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& what) {
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    if (!std::isfinite(t.data[i]))
      throw Error(ErrorCode::Data, what + ": non-finite value at flat index " + std::to_string(i));
  }
}

void expect_shape(const Shape& actual, const Shape& expected, const std::string& what) {
  if (actual != expected)
    throw Error(ErrorCode::Data, what + ": expected shape " + shape_string(expected) + ", got " + shape_string(actual));
}

template struct Tensor<float>;
template struct Tensor<double>;
template void check_finite(const Tensor<float>&, const std::string&);
template void check_finite(const Tensor<double>&, const std::string&);

}  // namespace ecglens::nn
