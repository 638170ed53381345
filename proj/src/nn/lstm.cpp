#include <cmath>

#include <Eigen/Core>
#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "ecglens/nn/layers.hpp"

namespace ecglens::nn {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using StridedMap = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

// Gradients fading over long sequences otherwise hit the slow denormal path.
class FlushDenormals {
 public:
#if defined(__SSE__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

template <typename T>
T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

}  // namespace

template <typename T>
Lstm<T>::Lstm(std::size_t input_size, std::size_t hidden_size, bool return_sequences)
    : input_size_(input_size), hidden_(hidden_size), return_sequences_(return_sequences) {
  if (input_size_ == 0 || hidden_ == 0) throw Error(ErrorCode::Config, "lstm: sizes must be positive");
  w_input_ = {"w_input", Tensor<T>({input_size_, 4 * hidden_}), Tensor<T>({input_size_, 4 * hidden_})};
  w_hidden_ = {"w_hidden", Tensor<T>({hidden_, 4 * hidden_}), Tensor<T>({hidden_, 4 * hidden_})};
  bias_ = {"bias", Tensor<T>({4 * hidden_}), Tensor<T>({4 * hidden_})};
}

template <typename T>
Shape Lstm<T>::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[2] != input_size_)
    throw Error(ErrorCode::Data, "lstm: expected input (N,T," + std::to_string(input_size_) + "), got " +
                                     shape_string(input));
  if (input[1] == 0) throw Error(ErrorCode::Data, "lstm: empty sequence");
  if (return_sequences_) return {input[0], input[1], hidden_};
  return {input[0], hidden_};
}

template <typename T>
void Lstm<T>::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto* p : {&w_input_, &w_hidden_, &bias_})
    for (auto& v : p->value.data) v = static_cast<T>(dist(rng));
}

template <typename T>
Tensor<T> Lstm<T>::forward(const Tensor<T>& x, Mode) {
  FlushDenormals ftz;
  const Shape out_shape = output_shape(x.shape);
  input_ = x;
  const std::size_t n = x.dim(0), steps = x.dim(1), h = hidden_, g4 = 4 * hidden_;
  const auto en = static_cast<Eigen::Index>(n);
  const auto eh = static_cast<Eigen::Index>(h);
  const auto eg4 = static_cast<Eigen::Index>(g4);

  // Input projections for every step in one product.
  gates_.assign(n * steps * g4, T(0));
  MatMap<T> pre(gates_.data(), static_cast<Eigen::Index>(n * steps), eg4);
  pre.noalias() = ConstMatMap<T>(x.data.data(), static_cast<Eigen::Index>(n * steps),
                                 static_cast<Eigen::Index>(input_size_)) *
                  ConstMatMap<T>(w_input_.value.data.data(), static_cast<Eigen::Index>(input_size_), eg4);
  pre.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.value.data.data(), eg4);

  cells_.assign(n * steps * h, T(0));
  hidden_states_.assign(n * steps * h, T(0));
  ConstMatMap<T> wh(w_hidden_.value.data.data(), eh, eg4);
  RowMatrix<T> recurrent(en, eg4);

  for (std::size_t t = 0; t < steps; ++t) {
    StridedMap<T> z(gates_.data() + t * g4, en, eg4, Eigen::OuterStride<>(static_cast<Eigen::Index>(steps * g4)));
    if (t > 0) {
      ConstStridedMap<T> h_prev(hidden_states_.data() + (t - 1) * h, en, eh,
                                Eigen::OuterStride<>(static_cast<Eigen::Index>(steps * h)));
      recurrent.noalias() = h_prev * wh;
      z += recurrent;
    }
    for (std::size_t s = 0; s < n; ++s) {
      T* gate = gates_.data() + (s * steps + t) * g4;
      T* cell = cells_.data() + (s * steps + t) * h;
      T* hid = hidden_states_.data() + (s * steps + t) * h;
      const T* cell_prev = t > 0 ? cells_.data() + (s * steps + t - 1) * h : nullptr;
      for (std::size_t j = 0; j < h; ++j) {
        const T i_gate = sigmoid(gate[j]);
        const T f_gate = sigmoid(gate[h + j]);
        const T g_gate = std::tanh(gate[2 * h + j]);
        const T o_gate = sigmoid(gate[3 * h + j]);
        gate[j] = i_gate;
        gate[h + j] = f_gate;
        gate[2 * h + j] = g_gate;
        gate[3 * h + j] = o_gate;
        cell[j] = (cell_prev ? f_gate * cell_prev[j] : T(0)) + i_gate * g_gate;
        hid[j] = o_gate * std::tanh(cell[j]);
      }
    }
  }

  Tensor<T> y(out_shape);
  if (return_sequences_) {
    y.data = hidden_states_;
  } else {
    for (std::size_t s = 0; s < n; ++s)
      std::copy_n(hidden_states_.data() + (s * steps + steps - 1) * h, h, y.data.data() + s * h);
  }
  return y;
}

template <typename T>
Tensor<T> Lstm<T>::backward(const Tensor<T>& grad_out) {
  FlushDenormals ftz;
  const std::size_t n = input_.dim(0), steps = input_.dim(1), h = hidden_, g4 = 4 * hidden_;
  expect_shape(grad_out.shape, output_shape(input_.shape), "lstm backward");
  const auto en = static_cast<Eigen::Index>(n);
  const auto eh = static_cast<Eigen::Index>(h);
  const auto eg4 = static_cast<Eigen::Index>(g4);

  Buffer<T> dz(n * steps * g4, T(0));
  RowMatrix<T> dh_next = RowMatrix<T>::Zero(en, eh);
  RowMatrix<T> dc_next = RowMatrix<T>::Zero(en, eh);
  ConstMatMap<T> wh(w_hidden_.value.data.data(), eh, eg4);
  MatMap<T> dwh(w_hidden_.grad.data.data(), eh, eg4);

  for (std::size_t t = steps; t-- > 0;) {
    for (std::size_t s = 0; s < n; ++s) {
      const T* gate = gates_.data() + (s * steps + t) * g4;
      const T* cell = cells_.data() + (s * steps + t) * h;
      const T* cell_prev = t > 0 ? cells_.data() + (s * steps + t - 1) * h : nullptr;
      T* d = dz.data() + (s * steps + t) * g4;
      for (std::size_t j = 0; j < h; ++j) {
        T dh = dh_next(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
        if (return_sequences_) {
          dh += grad_out.data[(s * steps + t) * h + j];
        } else if (t == steps - 1) {
          dh += grad_out.data[s * h + j];
        }
        const T i_gate = gate[j], f_gate = gate[h + j], g_gate = gate[2 * h + j], o_gate = gate[3 * h + j];
        const T tc = std::tanh(cell[j]);
        const T dc = dh * o_gate * (T(1) - tc * tc) + dc_next(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
        d[j] = dc * g_gate * i_gate * (T(1) - i_gate);
        d[h + j] = cell_prev ? dc * cell_prev[j] * f_gate * (T(1) - f_gate) : T(0);
        d[2 * h + j] = dc * i_gate * (T(1) - g_gate * g_gate);
        d[3 * h + j] = dh * tc * o_gate * (T(1) - o_gate);
        dc_next(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = dc * f_gate;
      }
    }
    ConstStridedMap<T> dz_t(dz.data() + t * g4, en, eg4, Eigen::OuterStride<>(static_cast<Eigen::Index>(steps * g4)));
    dh_next.noalias() = dz_t * wh.transpose();
    if (t > 0) {
      ConstStridedMap<T> h_prev(hidden_states_.data() + (t - 1) * h, en, eh,
                                Eigen::OuterStride<>(static_cast<Eigen::Index>(steps * h)));
      dwh.noalias() += h_prev.transpose() * dz_t;
    }
  }

  const auto rows = static_cast<Eigen::Index>(n * steps);
  const auto ed = static_cast<Eigen::Index>(input_size_);
  ConstMatMap<T> dz_all(dz.data(), rows, eg4);
  ConstMatMap<T> x_all(input_.data.data(), rows, ed);
  MatMap<T>(w_input_.grad.data.data(), ed, eg4).noalias() += x_all.transpose() * dz_all;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.grad.data.data(), eg4) += dz_all.colwise().sum();

  Tensor<T> dx(input_.shape);
  MatMap<T>(dx.data.data(), rows, ed).noalias() =
      dz_all * ConstMatMap<T>(w_input_.value.data.data(), ed, eg4).transpose();
  return dx;
}

template class Lstm<float>;
template class Lstm<double>;

}  // namespace ecglens::nn
