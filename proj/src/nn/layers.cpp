#include "ecglens/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace ecglens::nn {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using RowVecMap = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;

template <typename T>
void kaiming_uniform(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : w.data) v = static_cast<T>(dist(rng));
}

void expect_rank(const Shape& shape, std::size_t rank, const char* layer) {
  if (shape.size() != rank)
    throw Error(ErrorCode::Data, std::string(layer) + ": expected rank-" + std::to_string(rank) + " input, got " +
                                     shape_string(shape));
}

}  // namespace

// ---------------------------------------------------------------- Conv1d

template <typename T>
Conv1d<T>::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size)
    : cin_(in_channels), cout_(out_channels), k_(kernel_size) {
  if (k_ % 2 == 0) throw Error(ErrorCode::Config, "conv1d: kernel size must be odd for same padding");
  if (cin_ == 0 || cout_ == 0) throw Error(ErrorCode::Config, "conv1d: channel counts must be positive");
  kernel_ = {"kernel", Tensor<T>({k_, cin_, cout_}), Tensor<T>({k_, cin_, cout_})};
  bias_ = {"bias", Tensor<T>({cout_}), Tensor<T>({cout_})};
}

template <typename T>
Shape Conv1d<T>::output_shape(const Shape& input) const {
  expect_rank(input, 3, "conv1d");
  if (input[2] != cin_)
    throw Error(ErrorCode::Data, "conv1d: expected " + std::to_string(cin_) + " input channels, got " +
                                     shape_string(input));
  return {input[0], input[1], cout_};
}

template <typename T>
void Conv1d<T>::init(Rng& rng) {
  kaiming_uniform(kernel_.value, k_ * cin_, rng);
  bias_.value.fill(T(0));
}

template <typename T>
Tensor<T> Conv1d<T>::forward(const Tensor<T>& x, Mode) {
  const Shape out_shape = output_shape(x.shape);
  in_shape_ = x.shape;
  const std::size_t n = x.dim(0), len = x.dim(1);
  const std::size_t width = k_ * cin_;
  const auto pad = static_cast<std::ptrdiff_t>(k_ / 2);

  columns_.assign(n * len * width, T(0));
  for (std::size_t s = 0; s < n; ++s) {
    const T* xs = x.data.data() + s * len * cin_;
    for (std::size_t t = 0; t < len; ++t) {
      T* row = columns_.data() + (s * len + t) * width;
      for (std::size_t k = 0; k < k_; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        std::copy_n(xs + static_cast<std::size_t>(src) * cin_, cin_, row + k * cin_);
      }
    }
  }

  Tensor<T> y(out_shape);
  ConstMatMap<T> cols(columns_.data(), static_cast<Eigen::Index>(n * len), static_cast<Eigen::Index>(width));
  ConstMatMap<T> w(kernel_.value.data.data(), static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(cout_));
  MatMap<T> out(y.data.data(), static_cast<Eigen::Index>(n * len), static_cast<Eigen::Index>(cout_));
  out.noalias() = cols * w;
  out.rowwise() += RowVecMap<T>(bias_.value.data.data(), static_cast<Eigen::Index>(cout_));
  return y;
}

template <typename T>
Tensor<T> Conv1d<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t n = in_shape_.at(0), len = in_shape_.at(1);
  expect_shape(grad_out.shape, {n, len, cout_}, "conv1d backward");
  const std::size_t width = k_ * cin_;
  const auto rows = static_cast<Eigen::Index>(n * len);
  const auto pad = static_cast<std::ptrdiff_t>(k_ / 2);

  ConstMatMap<T> dy(grad_out.data.data(), rows, static_cast<Eigen::Index>(cout_));
  ConstMatMap<T> cols(columns_.data(), rows, static_cast<Eigen::Index>(width));
  MatMap<T> dw(kernel_.grad.data.data(), static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(cout_));
  dw.noalias() += cols.transpose() * dy;
  RowVecMap<T>(bias_.grad.data.data(), static_cast<Eigen::Index>(cout_)) += dy.colwise().sum();

  ConstMatMap<T> w(kernel_.value.data.data(), static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(cout_));
  RowMatrix<T> dcols = dy * w.transpose();

  Tensor<T> dx(in_shape_);
  for (std::size_t s = 0; s < n; ++s) {
    T* dxs = dx.data.data() + s * len * cin_;
    for (std::size_t t = 0; t < len; ++t) {
      const T* row = dcols.data() + (s * len + t) * width;
      for (std::size_t k = 0; k < k_; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        T* dst = dxs + static_cast<std::size_t>(src) * cin_;
        const T* from = row + k * cin_;
        for (std::size_t c = 0; c < cin_; ++c) dst[c] += from[c];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- MaxPool1d

template <typename T>
Shape MaxPool1d<T>::output_shape(const Shape& input) const {
  expect_rank(input, 3, "maxpool1d");
  if (!floor_mode_ && input[1] % window_ != 0)
    throw Error(ErrorCode::Data, "maxpool1d: length " + std::to_string(input[1]) + " not divisible by " +
                                     std::to_string(window_));
  if (input[1] < window_) throw Error(ErrorCode::Data, "maxpool1d: input shorter than the window");
  return {input[0], input[1] / window_, input[2]};
}

template <typename T>
Tensor<T> MaxPool1d<T>::forward(const Tensor<T>& x, Mode) {
  const Shape out_shape = output_shape(x.shape);
  in_shape_ = x.shape;
  const std::size_t n = x.dim(0), len = x.dim(1), ch = x.dim(2), out_len = out_shape[1];
  Tensor<T> y(out_shape);
  argmax_.assign(y.size(), 0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < out_len; ++t) {
      for (std::size_t c = 0; c < ch; ++c) {
        std::size_t best = (s * len + t * window_) * ch + c;
        for (std::size_t w = 1; w < window_; ++w) {
          const std::size_t idx = (s * len + t * window_ + w) * ch + c;
          if (x.data[idx] > x.data[best]) best = idx;
        }
        const std::size_t out_idx = (s * out_len + t) * ch + c;
        y.data[out_idx] = x.data[best];
        argmax_[out_idx] = best;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool1d<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != argmax_.size()) throw Error(ErrorCode::Data, "maxpool1d backward: gradient size mismatch");
  Tensor<T> dx(in_shape_);
  for (std::size_t i = 0; i < argmax_.size(); ++i) dx.data[argmax_[i]] += grad_out.data[i];
  return dx;
}

// ---------------------------------------------------------------- BatchNorm1d

template <typename T>
BatchNorm1d<T>::BatchNorm1d(std::size_t channels)
    : channels_(channels),
      gamma_{"gamma", Tensor<T>({channels}, T(1)), Tensor<T>({channels})},
      beta_{"beta", Tensor<T>({channels}), Tensor<T>({channels})},
      running_mean_({channels}),
      running_var_({channels}, T(1)) {}

template <typename T>
Tensor<T> BatchNorm1d<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() < 2 || x.shape.back() != channels_)
    throw Error(ErrorCode::Data, "batchnorm1d: expected trailing axis of " + std::to_string(channels_) + ", got " +
                                     shape_string(x.shape));
  const std::size_t c_count = channels_;
  const std::size_t m = x.size() / c_count;
  last_mode_ = mode;
  xhat_.assign(x.size(), T(0));
  inv_std_.assign(c_count, T(0));
  Tensor<T> y(x.shape);

  if (mode == Mode::Train) {
    if (m < 2) throw Error(ErrorCode::Data, "batchnorm1d: training needs at least 2 values per channel");
    std::vector<double> mean(c_count, 0.0), var(c_count, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t c = 0; c < c_count; ++c) mean[c] += static_cast<double>(x.data[i * c_count + c]);
    for (auto& v : mean) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < c_count; ++c) {
        const double d = static_cast<double>(x.data[i * c_count + c]) - mean[c];
        var[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < c_count; ++c) {
      var[c] /= static_cast<double>(m);
      inv_std_[c] = static_cast<T>(1.0 / std::sqrt(var[c] + kEpsilon));
      running_mean_.data[c] =
          static_cast<T>(kMomentum * static_cast<double>(running_mean_.data[c]) + (1.0 - kMomentum) * mean[c]);
      running_var_.data[c] =
          static_cast<T>(kMomentum * static_cast<double>(running_var_.data[c]) + (1.0 - kMomentum) * var[c]);
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < c_count; ++c) {
        const std::size_t idx = i * c_count + c;
        xhat_[idx] = static_cast<T>((static_cast<double>(x.data[idx]) - mean[c]) * static_cast<double>(inv_std_[c]));
        y.data[idx] = gamma_.value.data[c] * xhat_[idx] + beta_.value.data[c];
      }
    }
  } else {
    for (std::size_t c = 0; c < c_count; ++c)
      inv_std_[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_.data[c]) + kEpsilon));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < c_count; ++c) {
        const std::size_t idx = i * c_count + c;
        xhat_[idx] = (x.data[idx] - running_mean_.data[c]) * inv_std_[c];
        y.data[idx] = gamma_.value.data[c] * xhat_[idx] + beta_.value.data[c];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm1d<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != xhat_.size()) throw Error(ErrorCode::Data, "batchnorm1d backward: gradient size mismatch");
  const std::size_t c_count = channels_;
  const std::size_t m = xhat_.size() / c_count;
  std::vector<double> sum_dy(c_count, 0.0), sum_dy_xhat(c_count, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < c_count; ++c) {
      const std::size_t idx = i * c_count + c;
      sum_dy[c] += static_cast<double>(grad_out.data[idx]);
      sum_dy_xhat[c] += static_cast<double>(grad_out.data[idx]) * static_cast<double>(xhat_[idx]);
    }
  }
  for (std::size_t c = 0; c < c_count; ++c) {
    gamma_.grad.data[c] += static_cast<T>(sum_dy_xhat[c]);
    beta_.grad.data[c] += static_cast<T>(sum_dy[c]);
  }

  Tensor<T> dx(grad_out.shape);
  if (last_mode_ == Mode::Infer) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t c = 0; c < c_count; ++c) {
        const std::size_t idx = i * c_count + c;
        dx.data[idx] = grad_out.data[idx] * gamma_.value.data[c] * inv_std_[c];
      }
    return dx;
  }
  // dx = gamma * inv_std / M * (M dy - sum(dy) - xhat * sum(dy * xhat))
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < c_count; ++c) {
      const std::size_t idx = i * c_count + c;
      const double g = static_cast<double>(gamma_.value.data[c]) * static_cast<double>(inv_std_[c]);
      const double v = static_cast<double>(grad_out.data[idx]) - inv_m * sum_dy[c] -
                       static_cast<double>(xhat_[idx]) * inv_m * sum_dy_xhat[c];
      dx.data[idx] = static_cast<T>(g * v);
    }
  }
  return dx;
}

// ---------------------------------------------------------------- ReLU

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> y(x.shape);
  active_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    active_[i] = x.data[i] > T(0);
    y.data[i] = active_[i] ? x.data[i] : T(0);
  }
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != active_.size()) throw Error(ErrorCode::Data, "relu backward: gradient size mismatch");
  Tensor<T> dx(grad_out.shape);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] = active_[i] ? grad_out.data[i] : T(0);
  return dx;
}

// ---------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features) : din_(in_features), dout_(out_features) {
  if (din_ == 0 || dout_ == 0) throw Error(ErrorCode::Config, "dense: sizes must be positive");
  weight_ = {"weight", Tensor<T>({din_, dout_}), Tensor<T>({din_, dout_})};
  bias_ = {"bias", Tensor<T>({dout_}), Tensor<T>({dout_})};
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
  expect_rank(input, 2, "dense");
  if (input[1] != din_)
    throw Error(ErrorCode::Data, "dense: expected " + std::to_string(din_) + " features, got " + shape_string(input));
  return {input[0], dout_};
}

template <typename T>
void Dense<T>::init(Rng& rng) {
  kaiming_uniform(weight_.value, din_, rng);
  bias_.value.fill(T(0));
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> y(output_shape(x.shape));
  input_ = x;
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  ConstMatMap<T> in(x.data.data(), n, static_cast<Eigen::Index>(din_));
  ConstMatMap<T> w(weight_.value.data.data(), static_cast<Eigen::Index>(din_), static_cast<Eigen::Index>(dout_));
  MatMap<T> out(y.data.data(), n, static_cast<Eigen::Index>(dout_));
  out.noalias() = in * w;
  out.rowwise() += RowVecMap<T>(bias_.value.data.data(), static_cast<Eigen::Index>(dout_));
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_out) {
  const auto n = static_cast<Eigen::Index>(input_.dim(0));
  expect_shape(grad_out.shape, {input_.dim(0), dout_}, "dense backward");
  ConstMatMap<T> dy(grad_out.data.data(), n, static_cast<Eigen::Index>(dout_));
  ConstMatMap<T> in(input_.data.data(), n, static_cast<Eigen::Index>(din_));
  MatMap<T> dw(weight_.grad.data.data(), static_cast<Eigen::Index>(din_), static_cast<Eigen::Index>(dout_));
  dw.noalias() += in.transpose() * dy;
  RowVecMap<T>(bias_.grad.data.data(), static_cast<Eigen::Index>(dout_)) += dy.colwise().sum();

  Tensor<T> dx(input_.shape);
  ConstMatMap<T> w(weight_.value.data.data(), static_cast<Eigen::Index>(din_), static_cast<Eigen::Index>(dout_));
  MatMap<T> dxm(dx.data.data(), n, static_cast<Eigen::Index>(din_));
  dxm.noalias() = dy * w.transpose();
  return dx;
}

// ---------------------------------------------------------------- Dropout

template <typename T>
Dropout<T>::Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::Config, "dropout: rate must lie in [0, 1)");
}

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, Mode mode) {
  if (mode == Mode::Infer || rate_ == 0.0) {
    scale_.assign(x.size(), T(1));
    return x;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
  scale_.resize(x.size());
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale_[i] = u(rng_) < rate_ ? T(0) : keep_scale;
    y.data[i] = x.data[i] * scale_[i];
  }
  return y;
}

template <typename T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != scale_.size()) throw Error(ErrorCode::Data, "dropout backward: gradient size mismatch");
  Tensor<T> dx(grad_out.shape);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] = grad_out.data[i] * scale_[i];
  return dx;
}

// ---------------------------------------------------------------- GlobalAvgPool1d

template <typename T>
Shape GlobalAvgPool1d<T>::output_shape(const Shape& input) const {
  expect_rank(input, 3, "gap");
  if (input[1] == 0) throw Error(ErrorCode::Data, "gap: empty time axis");
  return {input[0], input[2]};
}

template <typename T>
Tensor<T> GlobalAvgPool1d<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> y(output_shape(x.shape));
  in_shape_ = x.shape;
  const std::size_t n = x.dim(0), len = x.dim(1), ch = x.dim(2);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < ch; ++c) {
      double sum = 0.0;
      for (std::size_t t = 0; t < len; ++t) sum += static_cast<double>(x.data[(s * len + t) * ch + c]);
      y.data[s * ch + c] = static_cast<T>(sum / static_cast<double>(len));
    }
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool1d<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t n = in_shape_.at(0), len = in_shape_.at(1), ch = in_shape_.at(2);
  expect_shape(grad_out.shape, {n, ch}, "gap backward");
  Tensor<T> dx(in_shape_);
  const T inv_len = static_cast<T>(1.0 / static_cast<double>(len));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t c = 0; c < ch; ++c) dx.data[(s * len + t) * ch + c] = grad_out.data[s * ch + c] * inv_len;
  return dx;
}

// ---------------------------------------------------------------- Flatten

template <typename T>
Shape Flatten<T>::output_shape(const Shape& input) const {
  if (input.empty()) throw Error(ErrorCode::Data, "flatten: scalar input");
  return {input[0], shape_size(input) / std::max<std::size_t>(input[0], 1)};
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x, Mode) {
  in_shape_ = x.shape;
  return x.reshaped(output_shape(x.shape));
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& grad_out) {
  return grad_out.reshaped(in_shape_);
}

#define ECGLENS_INSTANTIATE(T)       \
  template class Conv1d<T>;          \
  template class MaxPool1d<T>;       \
  template class BatchNorm1d<T>;     \
  template class ReLU<T>;            \
  template class Dense<T>;           \
  template class Dropout<T>;         \
  template class GlobalAvgPool1d<T>; \
  template class Flatten<T>;

ECGLENS_INSTANTIATE(float)
ECGLENS_INSTANTIATE(double)

}  // namespace ecglens::nn
