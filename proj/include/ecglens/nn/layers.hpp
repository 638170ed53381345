#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ecglens/common.hpp"
#include "ecglens/nn/tensor.hpp"

namespace ecglens::nn {

enum class Mode { Train, Infer };

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// A layer caches what its backward pass needs during forward. backward()
/// takes dLoss/dOutput of the latest forward call, accumulates parameter
/// gradients into Param::grad and returns dLoss/dInput.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;

  virtual std::vector<Param<T>*> params() { return {}; }
  /// Non-trainable state saved with the model (batch-norm running stats).
  virtual std::vector<std::pair<std::string, Tensor<T>*>> buffers() { return {}; }
  virtual void init(Rng&) {}

  void zero_grad() {
    for (auto* p : params()) p->grad.fill(T(0));
  }
};

/// y[n,t,f] = sum_{k,c} x[n, t+k-K/2, c] * kernel[k,c,f] + bias[f], zero
/// padding ("same"), stride 1. Kernel layout K x Cin x Cout.
template <typename T>
class Conv1d final : public Layer<T> {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size);

  std::string kind() const override { return "conv1d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Param<T>*> params() override { return {&kernel_, &bias_}; }
  void init(Rng& rng) override;

  Param<T>& kernel() { return kernel_; }
  Param<T>& bias() { return bias_; }

 private:
  std::size_t cin_, cout_, k_;
  Param<T> kernel_, bias_;
  Shape in_shape_;
  Buffer<T> columns_;  // (N*L) x (K*Cin) unfolded input
};

/// Non-overlapping max pooling. With floor_mode a trailing partial window is
/// dropped; otherwise the length must divide evenly.
template <typename T>
class MaxPool1d final : public Layer<T> {
 public:
  explicit MaxPool1d(std::size_t window = 2, bool floor_mode = false) : window_(window), floor_mode_(floor_mode) {}

  std::string kind() const override { return "maxpool1d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

  std::size_t window() const { return window_; }
  bool floor_mode() const { return floor_mode_; }

 private:
  std::size_t window_;
  bool floor_mode_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

/// Normalizes each channel (last axis) over every other axis.
template <typename T>
class BatchNorm1d final : public Layer<T> {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.9;

  explicit BatchNorm1d(std::size_t channels);

  std::string kind() const override { return "batchnorm1d"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<std::pair<std::string, Tensor<T>*>> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
  }

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }

 private:
  std::size_t channels_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Mode last_mode_ = Mode::Infer;
  std::vector<T> xhat_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  std::string kind() const override { return "relu"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  std::vector<unsigned char> active_;
};

/// y = x W + b with W of shape Din x Dout.
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in_features, std::size_t out_features);

  std::string kind() const override { return "dense"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  void init(Rng& rng) override;

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  std::size_t din_, dout_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

/// Inverted dropout: survivors are scaled by 1/(1-rate) in training,
/// inference is the identity.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(double rate, std::uint64_t seed);

  std::string kind() const override { return "dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

  double rate() const { return rate_; }
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  double rate_;
  Rng rng_;
  std::vector<T> scale_;
};

/// N x L x C -> N x C, mean over L.
template <typename T>
class GlobalAvgPool1d final : public Layer<T> {
 public:
  std::string kind() const override { return "gap"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Shape in_shape_;
};

/// N x ... -> N x prod(...).
template <typename T>
class Flatten final : public Layer<T> {
 public:
  std::string kind() const override { return "flatten"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Shape in_shape_;
};

/// Four-gate LSTM (input, forget, cell candidate, output) with zero initial
/// state. Input N x T x D; output N x T x H, or N x H (last step) when
/// return_sequences is false. Gate pre-activations are
///   z_t = x_t W_x + h_{t-1} W_h + b, laid out [i | f | g | o] along 4H.
template <typename T>
class Lstm final : public Layer<T> {
 public:
  Lstm(std::size_t input_size, std::size_t hidden_size, bool return_sequences);

  std::string kind() const override { return "lstm"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Param<T>*> params() override { return {&w_input_, &w_hidden_, &bias_}; }
  void init(Rng& rng) override;

  std::size_t hidden_size() const { return hidden_; }
  bool return_sequences() const { return return_sequences_; }

 private:
  std::size_t input_size_, hidden_;
  bool return_sequences_;
  Param<T> w_input_, w_hidden_, bias_;
  Tensor<T> input_;
  Buffer<T> gates_;   // N x T x 4H post-activation
  Buffer<T> cells_;   // N x T x H
  Buffer<T> hidden_states_;  // N x T x H
};

}  // namespace ecglens::nn
