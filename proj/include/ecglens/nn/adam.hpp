#pragma once

#include <cstdint>
#include <vector>

#include "ecglens/nn/layers.hpp"

namespace ecglens::nn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators, one pair per parameter tensor, zero-initialised on
/// first use.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its gradient.
template <typename T>
void adam_step(const std::vector<Param<T>*>& params, AdamState<T>& state, const AdamConfig& config = {});

}  // namespace ecglens::nn
