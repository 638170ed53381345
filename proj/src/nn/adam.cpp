#include "ecglens/nn/adam.hpp"

#include <cmath>

namespace ecglens::nn {

template <typename T>
void adam_step(const std::vector<Param<T>*>& params, AdamState<T>& state, const AdamConfig& config) {
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->value.shape);
      state.second_moment.emplace_back(p->value.shape);
    }
  }
  if (state.first_moment.size() != params.size())
    throw Error(ErrorCode::Training, "adam: optimizer state tracks a different parameter list");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
  const T step_size = static_cast<T>(config.lr / correction1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(correction2));
  const T eps = static_cast<T>(config.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i]->value.data;
    const auto& grad = params[i]->grad.data;
    auto& m = state.first_moment[i].data;
    auto& v = state.second_moment[i].data;
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * grad[j];
      v[j] = b2 * v[j] + (T(1) - b2) * grad[j] * grad[j];
      value[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
    }
  }
}

template void adam_step(const std::vector<Param<float>*>&, AdamState<float>&, const AdamConfig&);
template void adam_step(const std::vector<Param<double>*>&, AdamState<double>&, const AdamConfig&);

}  // namespace ecglens::nn
