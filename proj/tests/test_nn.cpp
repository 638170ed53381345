#include <doctest.h>

#include <cmath>
#include <random>

#include "ecglens/nn/adam.hpp"
#include "ecglens/nn/grad_check.hpp"
#include "ecglens/nn/layers.hpp"
#include "ecglens/nn/loss.hpp"
#include "ecglens/nn/network.hpp"

using namespace ecglens;
using namespace ecglens::nn;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  Rng rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data) v = d(rng);
  return t;
}

void randomize(Layer<double>& layer, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (auto* p : layer.params())
    for (auto& v : p->value.data) v = d(rng);
}

}  // namespace

TEST_CASE("dense gradients") {
  Dense<double> layer(4, 3);
  randomize(layer, 1);
  const auto r = grad_check(layer, random_tensor({5, 4}, 2));
  INFO(r.worst);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("conv1d gradients for odd kernels") {
  for (std::size_t k : {1, 3, 5}) {
    Conv1d<double> layer(2, 3, k);
    randomize(layer, 3 + k);
    const auto r = grad_check(layer, random_tensor({2, 7, 2}, 4));
    INFO("k=" << k << " " << r.worst);
    CHECK(r.max_relative_error < 1e-5);
  }
}

TEST_CASE("conv1d forward with same padding") {
  Conv1d<double> layer(1, 1, 3);
  layer.kernel().value.data = {1.0, 1.0, 1.0};
  layer.bias().value.data = {0.0};
  const Tensor<double> x({1, 4, 1}, {1, 2, 3, 4});
  const auto y = layer.forward(x, Mode::Infer);
  CHECK(y.shape == Shape{1, 4, 1});
  CHECK(y.data == Buffer<double>{3, 6, 9, 7});
}

TEST_CASE("relu gradients away from the kink") {
  ReLU<double> layer;
  auto x = random_tensor({3, 6}, 5);
  for (auto& v : x.data) v = v >= 0 ? v + 0.1 : v - 0.1;
  const auto r = grad_check(layer, x);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("maxpool forward, gradients and shape rules") {
  MaxPool1d<double> pool(2);
  const Tensor<double> x({1, 4, 1}, {1, 3, 2, 4});
  CHECK(pool.forward(x, Mode::Infer).data == Buffer<double>{3, 4});
  const auto r = grad_check(pool, random_tensor({2, 6, 3}, 6));
  CHECK(r.max_relative_error < 1e-4);

  CHECK_THROWS_AS(pool.output_shape({1, 5, 1}), Error);
  MaxPool1d<double> floor_pool(2, true);
  CHECK(floor_pool.output_shape({1, 125, 4}) == Shape{1, 62, 4});
  const Tensor<double> odd({1, 5, 1}, {1, 3, 2, 4, 9});
  CHECK(floor_pool.forward(odd, Mode::Infer).data == Buffer<double>{3, 4});
}

TEST_CASE("batchnorm statistics and gradients") {
  BatchNorm1d<double> bn(3);
  auto x = random_tensor({4, 5, 3}, 7, -3.0, 5.0);
  const auto y = bn.forward(x, Mode::Train);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 20; ++i) mean += y.data[i * 3 + c];
    mean /= 20;
    for (std::size_t i = 0; i < 20; ++i) var += (y.data[i * 3 + c] - mean) * (y.data[i * 3 + c] - mean);
    var /= 20;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }

  // Running statistics after one update from (0, 1).
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 20; ++i) mean += x.data[i * 3 + c];
    mean /= 20;
    for (std::size_t i = 0; i < 20; ++i) var += (x.data[i * 3 + c] - mean) * (x.data[i * 3 + c] - mean);
    var /= 20;
    CHECK(bn.running_mean()[c] == doctest::Approx(0.1 * mean).epsilon(1e-12));
    CHECK(bn.running_var()[c] == doctest::Approx(0.9 + 0.1 * var).epsilon(1e-12));
  }

  randomize(bn, 8);
  const auto r = grad_check(bn, x, Mode::Train);
  INFO(r.worst);
  CHECK(r.max_relative_error < 1e-4);
  const auto ri = grad_check(bn, x, Mode::Infer);
  CHECK(ri.max_relative_error < 1e-4);
}

TEST_CASE("dropout is unbiased, and the identity at inference") {
  Dropout<double> drop(0.4, 11);
  const Tensor<double> ones({1, 100000}, 1.0);
  const auto y = drop.forward(ones, Mode::Train);
  double mean = 0.0;
  std::size_t zeros = 0;
  for (double v : y.data) {
    mean += v;
    zeros += v == 0.0;
    if (v != 0.0) CHECK(v == doctest::Approx(1.0 / 0.6));
  }
  mean /= 100000.0;
  CHECK(std::abs(mean - 1.0) < 0.02);
  CHECK(std::abs(static_cast<double>(zeros) / 100000.0 - 0.4) < 0.01);
  CHECK(drop.forward(ones, Mode::Infer) == ones);

  Dropout<double> replay(0.3, 0);
  const auto r = grad_check(replay, random_tensor({3, 8}, 9), Mode::Train, 1e-5, [&] { replay.reseed(77); });
  CHECK(r.max_relative_error < 1e-4);
  CHECK_THROWS_AS(Dropout<double>(1.0, 0), Error);
}

TEST_CASE("global average pool and flatten") {
  GlobalAvgPool1d<double> gap;
  const Tensor<double> x({1, 3, 1}, {1, 2, 3});
  CHECK(gap.forward(x, Mode::Infer).data == Buffer<double>{2});
  CHECK(grad_check(gap, random_tensor({2, 5, 3}, 10)).max_relative_error < 1e-4);
  Flatten<double> flat;
  CHECK(flat.output_shape({2, 5, 3}) == Shape{2, 15});
  CHECK(grad_check(flat, random_tensor({2, 5, 3}, 12)).max_relative_error < 1e-4);
}

TEST_CASE("softmax cross-entropy") {
  const Tensor<double> zeros({2, 5}, 0.0);
  Tensor<double> target({2, 5}, 0.0);
  target.data[0] = 1.0;
  target.data[5 + 3] = 1.0;
  const auto uniform = softmax_xent(zeros, target);
  CHECK(uniform.loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  Tensor<double> confident({2, 5}, 0.0);
  confident.data[0] = 50.0;
  confident.data[8] = 50.0;
  CHECK(softmax_xent(confident, target).loss < 1e-9);

  Tensor<double> huge({1, 5}, {1000.0, 0.0, -1000.0, 3.0, 999.0});
  const auto p = softmax(huge);
  double sum = 0.0;
  for (double v : p.data) {
    CHECK(std::isfinite(v));
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  auto logits = random_tensor({3, 5}, 13, -2.0, 2.0);
  Tensor<double> t3({3, 5}, 0.0);
  t3.data[1] = t3.data[5 + 4] = t3.data[10 + 0] = 1.0;
  const auto analytic = softmax_xent(logits, t3).grad;
  std::vector<double> flat(logits.data.begin(), logits.data.end());
  const auto numeric = numeric_gradient(
      [&] { return softmax_xent(Tensor<double>({3, 5}, flat), t3).loss; }, flat, 1e-6);
  for (std::size_t i = 0; i < flat.size(); ++i) CHECK(relative_error(analytic.data[i], numeric[i]) < 1e-6);
}

TEST_CASE("lstm with zero parameters outputs zeros") {
  Lstm<double> lstm(2, 3, true);
  for (auto* p : lstm.params()) p->value.fill(0.0);
  const auto y = lstm.forward(random_tensor({2, 4, 2}, 14), Mode::Infer);
  CHECK(y.shape == Shape{2, 4, 3});
  for (double v : y.data) CHECK(v == 0.0);
  Lstm<double> last(2, 3, false);
  CHECK(last.output_shape({2, 4, 2}) == Shape{2, 3});
}

TEST_CASE("lstm gradients through time") {
  for (bool seq : {true, false}) {
    Lstm<double> lstm(2, 3, seq);
    randomize(lstm, 15);
    const auto r = grad_check(lstm, random_tensor({2, 2, 2}, 16));
    INFO(r.worst);
    CHECK(r.max_relative_error < 1e-4);
    Lstm<double> longer(3, 4, seq);
    randomize(longer, 17);
    CHECK(grad_check(longer, random_tensor({2, 6, 3}, 18)).max_relative_error < 1e-4);
  }
}

TEST_CASE("adam step matches a hand-rolled update") {
  Param<double> p{"w", Tensor<double>({3}, {1.0, -2.0, 0.5}), Tensor<double>({3}, 0.0)};
  std::vector<double> ref(p.value.data.begin(), p.value.data.end()), m(3, 0.0), v(3, 0.0);
  AdamState<double> state;
  AdamConfig cfg;
  cfg.lr = 0.01;
  for (int step = 1; step <= 5; ++step) {
    for (std::size_t j = 0; j < 3; ++j) p.grad.data[j] = 2.0 * p.value.data[j] + 0.3 * step;
    for (std::size_t j = 0; j < 3; ++j) {
      const double g = 2.0 * ref[j] + 0.3 * step;
      m[j] = 0.9 * m[j] + 0.1 * g;
      v[j] = 0.999 * v[j] + 0.001 * g * g;
      const double mh = m[j] / (1 - std::pow(0.9, step));
      const double vh = v[j] / (1 - std::pow(0.999, step));
      ref[j] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
    adam_step<double>({&p}, state, cfg);
    for (std::size_t j = 0; j < 3; ++j) CHECK(p.value.data[j] == doctest::Approx(ref[j]).epsilon(1e-10));
  }
  // The first step moves every weight by about lr against its gradient sign.
  Param<double> q{"q", Tensor<double>({2}, {0.0, 0.0}), Tensor<double>({2}, {5.0, -0.001})};
  AdamState<double> fresh;
  adam_step<double>({&q}, fresh, cfg);
  CHECK(q.value.data[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(q.value.data[1] == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("network stacks layers and names parameters") {
  Network<double> net;
  net.add(std::make_unique<Conv1d<double>>(2, 4, 3));
  net.add(std::make_unique<BatchNorm1d<double>>(4));
  net.add(std::make_unique<ReLU<double>>());
  net.add(std::make_unique<GlobalAvgPool1d<double>>());
  net.add(std::make_unique<Dense<double>>(4, 5));
  CHECK(net.output_shape({3, 10, 2}) == Shape{3, 5});
  CHECK(net.parameter_count() == (3 * 2 * 4 + 4) + (4 + 4) + (4 * 5 + 5));
  const auto named = net.named_params();
  REQUIRE(!named.empty());
  CHECK(named.front().first == "0.conv1d.kernel");
  CHECK(net.named_buffers().size() == 2);
  CHECK_THROWS_AS(net.forward(Tensor<double>({3, 10, 3}), Mode::Infer), Error);
}
