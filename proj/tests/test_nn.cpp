#include <doctest.h>

#include <cmath>
#include <functional>

#include "graindeck/error.hpp"
#include "graindeck/fileutil.hpp"
#include "graindeck/nn/layers.hpp"
#include "graindeck/nn/loss.hpp"
#include "graindeck/nn/optim.hpp"
#include "graindeck/nn/weights_io.hpp"
#include "support.hpp"

using namespace graindeck;
using namespace graindeck::nn;

namespace {

using T4 = Tensor<double>;
using Shape = T4::Shape;

constexpr double kGradTolerance = 1e-5;

double dot(const T4& a, const T4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

double max_abs_diff(const T4& a, const T4& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Checks parameter and input gradients of a layer under the loss
// sum(forward(x) * R) for a fixed random R.
void check_layer(std::vector<Parameter<double>*> params, const Shape& in_shape,
                 const std::function<T4(const T4&)>& forward,
                 const std::function<T4(const T4&)>& backward, std::uint64_t seed) {
  Rng rng(seed);
  Parameter<double> input("input", in_shape, false);
  input.value = testing::random_tensor<double>(rng, in_shape);
  zero_grad(params);
  const T4 y = forward(input.value);
  const T4 r = testing::random_tensor<double>(rng, y.shape());
  input.grad = backward(r);
  REQUIRE(input.grad.shape() == in_shape);
  params.push_back(&input);
  const auto result = testing::check_gradients(
      params, [&] { return dot(forward(input.value), r); }, 400, rng);
  INFO("checked ", result.checked, " entries");
  CHECK(result.checked > 0);
  CHECK(result.max_rel_error < kGradTolerance);
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("gradient check: convolutions") {
  Rng init(1);
  struct Case {
    int in, out, k, stride, pad;
    bool bias;
  };
  for (const Case c : {Case{3, 4, 3, 1, 1, true}, Case{2, 3, 3, 2, 1, false},
                       Case{4, 2, 1, 1, 0, true}, Case{3, 2, 1, 2, 0, false}}) {
    Conv2d<double> conv("c", c.in, c.out, c.k, c.stride, c.pad, c.bias, init);
    std::vector<Parameter<double>*> ps;
    conv.collect(ps);
    check_layer(ps, {2, c.in, 7, 6}, [&](const T4& x) { return conv.forward(x); },
                [&](const T4& dy) { return conv.backward(dy); }, 100 + c.k * 10 + c.stride);
  }
}

TEST_CASE("gradient check: batch norm in training mode") {
  BatchNorm2d<double> bn("bn", 3);
  Rng rng(2);
  for (auto& v : bn.gamma().value.values()) v = rng.uniform(0.5, 1.5);
  for (auto& v : bn.beta().value.values()) v = rng.normal();
  std::vector<Parameter<double>*> ps;
  bn.collect(ps);
  check_layer(ps, {3, 3, 4, 5}, [&](const T4& x) { return bn.forward(x, true); },
              [&](const T4& dy) { return bn.backward(dy); }, 200);
}

TEST_CASE("gradient check: activation, pooling and head layers") {
  ReLU<double> relu;
  check_layer({}, {2, 3, 5, 4}, [&](const T4& x) { return relu.forward(x); },
              [&](const T4& dy) { return relu.backward(dy); }, 300);
  MaxPool2<double> pool;
  check_layer({}, {2, 2, 6, 4}, [&](const T4& x) { return pool.forward(x); },
              [&](const T4& dy) { return pool.backward(dy); }, 301);
  GlobalAvgPool<double> gap;
  check_layer({}, {2, 3, 5, 3}, [&](const T4& x) { return gap.forward(x); },
              [&](const T4& dy) { return gap.backward(dy); }, 302);
  Rng init(3);
  Linear<double> fc("fc", 5, 7, init);
  std::vector<Parameter<double>*> ps;
  fc.collect(ps);
  check_layer(ps, {4, 5, 1, 1}, [&](const T4& x) { return fc.forward(x); },
              [&](const T4& dy) { return fc.backward(dy); }, 303);
  ConvTranspose2x2<double> up("up", 3, 2, init);
  std::vector<Parameter<double>*> ups;
  up.collect(ups);
  check_layer(ups, {2, 3, 3, 4}, [&](const T4& x) { return up.forward(x); },
              [&](const T4& dy) { return up.backward(dy); }, 304);
}

TEST_CASE("gradient check: channel concat and split") {
  Rng rng(4);
  Parameter<double> a("a", {2, 2, 3, 3}, false);
  Parameter<double> b("b", {2, 3, 3, 3}, false);
  a.value = testing::random_tensor<double>(rng, a.value.shape());
  b.value = testing::random_tensor<double>(rng, b.value.shape());
  const T4 y = concat_channels(a.value, b.value);
  REQUIRE(y.shape() == Shape{2, 5, 3, 3});
  const T4 r = testing::random_tensor<double>(rng, y.shape());
  split_channels(r, 2, a.grad, b.grad);
  const auto res = testing::check_gradients(
      {&a, &b}, [&] { return dot(concat_channels(a.value, b.value), r); }, 200, rng);
  CHECK(res.max_rel_error < kGradTolerance);
  CHECK(y.at(1, 0, 2, 1) == a.value.at(1, 0, 2, 1));
  CHECK(y.at(1, 4, 0, 2) == b.value.at(1, 2, 0, 2));
}

TEST_CASE("gradient check: losses") {
  Rng rng(5);
  Parameter<double> logits("logits", {5, 7, 1, 1}, false);
  logits.value = testing::random_tensor<double>(rng, logits.value.shape(), 2.0);
  const std::vector<int> labels{0, 3, 6, 2, 3};
  logits.grad = softmax_cross_entropy(logits.value, std::span<const int>(labels)).grad;
  auto res = testing::check_gradients(
      {&logits}, [&] { return softmax_cross_entropy(logits.value, std::span<const int>(labels)).loss; },
      100, rng);
  CHECK(res.max_rel_error < kGradTolerance);

  Parameter<double> seg("seg", {2, 1, 4, 5}, false);
  seg.value = testing::random_tensor<double>(rng, seg.value.shape(), 2.0);
  T4 targets(seg.value.shape());
  for (auto& t : targets.values()) t = rng.bernoulli(0.4) ? 1.0 : 0.0;
  seg.grad = bce_dice_loss(seg.value, targets).grad;
  res = testing::check_gradients({&seg}, [&] { return bce_dice_loss(seg.value, targets).loss; }, 100, rng);
  CHECK(res.max_rel_error < kGradTolerance);
}

TEST_CASE("cross-entropy of uniform logits is log K") {
  T4 logits({3, 7, 1, 1}, 0.25);
  const std::vector<int> labels{0, 1, 6};
  CHECK(softmax_cross_entropy(logits, std::span<const int>(labels)).loss ==
        doctest::Approx(std::log(7.0)).epsilon(1e-12));
  const std::vector<int> bad{0, 1, 7};
  CHECK_THROWS_AS(softmax_cross_entropy(logits, std::span<const int>(bad)), ConfigError);
}

TEST_CASE("softmax lies on the simplex for 1000 random inputs") {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> z(7);
    const double scale = std::pow(10.0, rng.uniform(-2.0, 3.0));
    for (double& v : z) v = rng.normal() * scale;
    const auto p = softmax(z);
    double sum = 0.0;
    for (double v : p) {
      REQUIRE(std::isfinite(v));
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      sum += v;
    }
    REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sigmoid lies in [0, 1] and is monotone for 1000 random inputs") {
  Rng rng(7);
  std::vector<double> xs;
  for (int i = 0; i < 1000; ++i) xs.push_back(rng.normal() * std::pow(10.0, rng.uniform(-2.0, 3.0)));
  std::sort(xs.begin(), xs.end());
  double prev = -1.0;
  for (double x : xs) {
    const double s = sigmoid(x);
    REQUIRE(std::isfinite(s));
    REQUIRE(s >= 0.0);
    REQUIRE(s <= 1.0);
    REQUIRE(s >= prev);
    prev = s;
  }
  CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("dice complement properties") {
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 1 + rng.index(50);
    std::vector<double> t(n);
    std::vector<double> p(n);
    for (auto& v : t) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    for (auto& v : p) v = rng.uniform();
    REQUIRE(dice_complement(t, t) == doctest::Approx(0.0).epsilon(1e-15));
    const double d = dice_complement(p, t);
    REQUIRE(d >= 0.0);
    REQUIRE(d <= 1.0);
    double spt = 0, sp = 0, st = 0;
    for (std::size_t k = 0; k < n; ++k) {
      spt += p[k] * t[k];
      sp += p[k];
      st += t[k];
    }
    REQUIRE(d == doctest::Approx(1.0 - (2.0 * spt + 1.0) / (sp + st + 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("apply matches forward in evaluation mode") {
  Rng rng(9);
  Conv2d<double> conv("c", 3, 4, 3, 2, 1, true, rng);
  BatchNorm2d<double> bn("bn", 4);
  for (auto& v : bn.running_mean().values()) v = rng.normal();
  for (auto& v : bn.running_var().values()) v = rng.uniform(0.5, 2.0);
  Linear<double> fc("fc", 4, 3, rng);
  ConvTranspose2x2<double> up("up", 4, 2, rng);
  ReLU<double> relu;
  MaxPool2<double> pool;
  GlobalAvgPool<double> gap;
  const T4 x = testing::random_tensor<double>(rng, {2, 3, 8, 8});
  const T4 c = conv.forward(x);
  CHECK(max_abs_diff(c, conv.apply(x)) < 1e-12);
  const T4 b = bn.forward(c, false);
  CHECK(max_abs_diff(b, bn.apply(c)) < 1e-12);
  CHECK(relu.forward(b) == relu.apply(b));
  CHECK(pool.forward(b) == pool.apply(b));
  CHECK(max_abs_diff(up.forward(b), up.apply(b)) < 1e-12);
  const T4 g = gap.forward(b);
  CHECK(max_abs_diff(g, gap.apply(b)) < 1e-12);
  CHECK(max_abs_diff(fc.forward(g), fc.apply(g)) < 1e-12);
}

TEST_CASE("batch norm updates running statistics only in training mode") {
  BatchNorm2d<float> bn("bn", 2);
  Rng rng(10);
  const auto x = testing::random_tensor<float>(rng, {4, 2, 3, 3});
  bn.forward(x, false);
  CHECK(bn.running_mean().values()[0] == 0.0f);
  bn.forward(x, true);
  CHECK(bn.running_mean().values()[0] != 0.0f);
}

TEST_CASE("sgd with momentum follows its update rule") {
  Parameter<double> w("w", {1, 2, 1, 1}, true);
  Parameter<double> b("b", {1, 2, 1, 1}, false);
  w.value.values()[0] = 1.0;
  w.value.values()[1] = -2.0;
  b.value.values()[0] = 0.5;
  w.grad.values()[0] = 0.1;
  w.grad.values()[1] = 0.3;
  b.grad.values()[0] = -0.2;
  w.velocity.values()[0] = 0.05;
  SgdMomentum opt{0.9, 0.01};
  opt.step<double>({&w, &b}, 0.1);
  const double v0 = 0.9 * 0.05 + (0.1 + 0.01 * 1.0);
  CHECK(w.velocity.values()[0] == doctest::Approx(v0).epsilon(1e-15));
  CHECK(w.value.values()[0] == doctest::Approx(1.0 - 0.1 * v0).epsilon(1e-15));
  const double v1 = 0.3 + 0.01 * -2.0;
  CHECK(w.value.values()[1] == doctest::Approx(-2.0 - 0.1 * v1).epsilon(1e-15));
  CHECK(b.value.values()[0] == doctest::Approx(0.5 - 0.1 * -0.2).epsilon(1e-15));

  zero_grad<double>({&w, &b});
  CHECK(w.grad.values()[0] == 0.0);
  CHECK(step_decay(0.1, 0, 10, 0.1) == doctest::Approx(0.1));
  CHECK(step_decay(0.1, 9, 10, 0.1) == doctest::Approx(0.1));
  CHECK(step_decay(0.1, 10, 10, 0.1) == doctest::Approx(0.01));
  CHECK(step_decay(0.1, 25, 10, 0.5) == doctest::Approx(0.025));
  CHECK(step_decay(0.1, 25, 0, 0.5) == doctest::Approx(0.1));
}

TEST_CASE("weight files round-trip and reject damage") {
  Rng rng(11);
  std::vector<NamedTensor> ts{{"a.weight", testing::random_tensor<float>(rng, {2, 3, 3, 3})},
                              {"a.bias", testing::random_tensor<float>(rng, {1, 2, 1, 1})}};
  const std::string bytes = encode_weights(ts);
  CHECK(bytes.substr(0, 4) == "GDWT");
  const auto back = decode_weights(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "a.weight");
  CHECK(back[0].tensor == ts[0].tensor);
  CHECK(back[1].tensor == ts[1].tensor);

  CHECK_THROWS_AS(decode_weights("XXXX" + bytes.substr(4)), DataError);
  CHECK_THROWS_AS(decode_weights(bytes.substr(0, bytes.size() - 1)), DataError);
  CHECK_THROWS_AS(decode_weights(bytes + "x"), DataError);
  std::string wrong_version = bytes;
  wrong_version[4] = 9;
  CHECK_THROWS_AS(decode_weights(wrong_version), DataError);

  testing::TempDir dir("weights");
  Tensor<float> w1 = ts[0].tensor;
  Tensor<float> b1 = ts[1].tensor;
  save_weights(dir / "w.bin", {{"a.weight", &w1}, {"a.bias", &b1}});
  Tensor<float> w2({2, 3, 3, 3});
  Tensor<float> b2({1, 2, 1, 1});
  load_weights(dir / "w.bin", {{"a.weight", &w2}, {"a.bias", &b2}});
  CHECK(w2 == w1);
  CHECK(b2 == b1);
  Tensor<float> wrong({2, 3, 1, 1});
  CHECK_THROWS_AS(load_weights(dir / "w.bin", {{"a.weight", &wrong}, {"a.bias", &b2}}), DataError);
  CHECK_THROWS_AS(load_weights(dir / "w.bin", {{"a.other", &w2}, {"a.bias", &b2}}), DataError);
  CHECK_THROWS_AS(load_weights(dir / "w.bin", {{"a.weight", &w2}}), DataError);
  CHECK_THROWS_AS(load_weights(dir / "missing.bin", {{"a.weight", &w2}}), DataError);
}

}
