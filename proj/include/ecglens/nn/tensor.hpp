#pragma once

#include <cstddef>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace ecglens::nn {

using Shape = std::vector<std::size_t>;

/// Every buffer starts on a 64-byte boundary, so vectorized kernels peel the
/// same way on each allocation and sums come out bit-identical across runs.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array.
template <typename T>
struct Tensor {
  Shape shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(Shape s, const std::vector<T>& values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  T& operator[](std::size_t i) { return data[i]; }
  T operator[](std::size_t i) const { return data[i]; }

  std::span<T> values() { return data; }
  std::span<const T> values() const { return data; }

  /// Same data, new shape of equal size.
  Tensor reshaped(Shape s) const;

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  bool operator==(const Tensor&) const = default;
};

/// Throws Error(Data) if any value is NaN or infinite; `what` names the
/// tensor in the message.
template <typename T>
void check_finite(const Tensor<T>& t, const std::string& what);

/// Throws Error(Data) naming `what` when the shapes differ.
void expect_shape(const Shape& actual, const Shape& expected, const std::string& what);

extern template struct Tensor<float>;
extern template struct Tensor<double>;

}  // namespace ecglens::nn
