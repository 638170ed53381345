#include "ecglens/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ecglens::nn {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / scale;
}

std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> values, double eps) {
  std::vector<double> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = f();
    values[i] = saved - eps;
    const double down = f();
    values[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

GradCheckResult grad_check(Layer<double>& layer, const Tensor<double>& input, Mode mode, double eps,
                           const std::function<void()>& before_forward) {
  const Shape out_shape = layer.output_shape(input.shape);
  Rng rng(0x5eed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor<double> projection(out_shape);
  for (auto& v : projection.data) v = dist(rng);

  Tensor<double> x = input;
  auto objective = [&] {
    if (before_forward) before_forward();
    const Tensor<double> y = layer.forward(x, mode);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += projection.data[i] * y.data[i];
    return s;
  };

  layer.zero_grad();
  if (before_forward) before_forward();
  layer.forward(x, mode);
  const Tensor<double> dx = layer.backward(projection);

  std::vector<std::pair<std::string, Tensor<double>>> analytic = {{"input", dx}};
  for (auto* p : layer.params()) analytic.emplace_back(p->name, p->grad);

  GradCheckResult result;
  auto compare = [&](const std::string& name, const Tensor<double>& a, const std::vector<double>& n) {
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double err = relative_error(a.data[i], n[i]);
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  };

  compare("input", analytic[0].second, numeric_gradient(objective, x.data, eps));
  auto params = layer.params();
  for (std::size_t p = 0; p < params.size(); ++p)
    compare(params[p]->name, analytic[p + 1].second, numeric_gradient(objective, params[p]->value.data, eps));
  return result;
}

}  // namespace ecglens::nn
