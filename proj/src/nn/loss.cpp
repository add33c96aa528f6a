#include "graindeck/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "graindeck/error.hpp"

namespace graindeck::nn {

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double s = 0.0;
  for (double& v : out) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : out) v /= s;
  return out;
}

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  const int N = logits.n();
  const int K = static_cast<int>(logits.sample_size());
  if (static_cast<int>(labels.size()) != N) throw ConfigError("label count mismatch");
  LossResult<T> r{0.0, Tensor<T>(logits.shape())};
  std::vector<double> row(static_cast<std::size_t>(K));
  for (int n = 0; n < N; ++n) {
    const T* z = logits.sample(n);
    for (int k = 0; k < K; ++k) row[k] = z[k];
    const int y = labels[n];
    if (y < 0 || y >= K) throw ConfigError("label out of range");
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    const double log_norm = m + std::log(s);
    r.loss += log_norm - row[y];
    T* g = r.grad.sample(n);
    for (int k = 0; k < K; ++k) {
      const double p = std::exp(row[k] - log_norm);
      g[k] = static_cast<T>((p - (k == y ? 1.0 : 0.0)) / N);
    }
  }
  r.loss /= N;
  return r;
}

template <typename T>
LossResult<T> bce_dice_loss(const Tensor<T>& logits, const Tensor<T>& targets) {
  if (logits.shape() != targets.shape()) throw ConfigError("loss shape mismatch");
  const std::size_t M = logits.size();
  LossResult<T> r{0.0, Tensor<T>(logits.shape())};
  std::vector<double> p(M);
  double bce = 0.0;
  double inter = 0.0;
  double sum_p = 0.0;
  double sum_t = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const double z = logits.data()[i];
    const double t = targets.data()[i];
    // log(1 + e^{-|z|}) form keeps BCE finite for large |z|.
    bce += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    p[i] = sigmoid(z);
    inter += p[i] * t;
    sum_p += p[i];
    sum_t += t;
  }
  const double num = 2.0 * inter + 1.0;
  const double den = sum_p + sum_t + 1.0;
  r.loss = bce / static_cast<double>(M) + (1.0 - num / den);
  for (std::size_t i = 0; i < M; ++i) {
    const double t = targets.data()[i];
    const double d_bce = (p[i] - t) / static_cast<double>(M);
    const double d_dice_dp = -(2.0 * t * den - num) / (den * den);
    r.grad.data()[i] = static_cast<T>(d_bce + d_dice_dp * p[i] * (1.0 - p[i]));
  }
  return r;
}

double dice_complement(std::span<const double> probs, std::span<const double> targets) {
  if (probs.size() != targets.size()) throw ConfigError("dice shape mismatch");
  double inter = 0.0, sp = 0.0, st = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    inter += probs[i] * targets[i];
    sp += probs[i];
    st += targets[i];
  }
  return 1.0 - (2.0 * inter + 1.0) / (sp + st + 1.0);
}

template LossResult<float> softmax_cross_entropy(const Tensor<float>&, std::span<const int>);
template LossResult<double> softmax_cross_entropy(const Tensor<double>&, std::span<const int>);
template LossResult<float> bce_dice_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> bce_dice_loss(const Tensor<double>&, const Tensor<double>&);

}  // namespace graindeck::nn
