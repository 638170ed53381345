#include "ecglens/nn/network.hpp"

namespace ecglens::nn {

template <typename T>
Shape Network<T>::output_shape(Shape input) const {
  for (const auto& layer : layers_) input = layer->output_shape(input);
  return input;
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode);
  return h;
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto& layer : layers_) layer->zero_grad();
}

template <typename T>
std::vector<Param<T>*> Network<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& layer : layers_)
    for (auto* p : layer->params()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Network<T>::named_params() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (auto* p : layers_[i]->params())
      out.emplace_back(std::to_string(i) + "." + layers_[i]->kind() + "." + p->name, &p->value);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Network<T>::named_buffers() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (auto& [name, tensor] : layers_[i]->buffers())
      out.emplace_back(std::to_string(i) + "." + layers_[i]->kind() + "." + name, tensor);
  return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : params()) n += p->value.size();
  return n;
}

template <typename T>
void Network<T>::reseed_dropout(std::uint64_t seed) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (auto* d = dynamic_cast<Dropout<T>*>(layers_[i].get())) d->reseed(derive_seed(seed, {i}));
  }
}

template class Network<float>;
template class Network<double>;

}  // namespace ecglens::nn
