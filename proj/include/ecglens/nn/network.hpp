#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ecglens/nn/layers.hpp"

namespace ecglens::nn {

/// Sequential stack of layers.
template <typename T>
class Network {
 public:
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  Shape output_shape(Shape input) const;
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  /// Returns dLoss/dInput; parameter gradients accumulate.
  Tensor<T> backward(const Tensor<T>& grad_out);

  void zero_grad();
  std::vector<Param<T>*> params();
  /// Parameter and buffer names are "<layer index>.<kind>.<name>".
  std::vector<std::pair<std::string, Tensor<T>*>> named_params();
  std::vector<std::pair<std::string, Tensor<T>*>> named_buffers();
  std::size_t parameter_count();

  /// Restarts every dropout mask stream from (seed, layer index).
  void reseed_dropout(std::uint64_t seed);

  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace ecglens::nn
