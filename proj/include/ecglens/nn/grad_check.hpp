#pragma once

#include <functional>
#include <span>
#include <string>

#include "ecglens/nn/layers.hpp"

namespace ecglens::nn {

/// |a - n| / max(|a|, |n|, 1e-12)
double relative_error(double analytic, double numeric);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst;  // "<tensor>[<flat index>]"
};

/// Central differences of f with respect to every entry of `values`,
/// restoring each entry afterwards.
std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> values, double eps);

/// Checks a layer's input and parameter gradients against central finite
/// differences of the scalar L = sum(w * layer(x)), w a fixed random
/// projection. `before_forward` runs ahead of every forward pass (used to
/// replay a dropout mask).
GradCheckResult grad_check(Layer<double>& layer, const Tensor<double>& input, Mode mode = Mode::Train,
                           double eps = 1e-5, const std::function<void()>& before_forward = {});

}  // namespace ecglens::nn
