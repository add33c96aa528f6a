#pragma once

#include <array>
#include <span>
#include <vector>

#include "graindeck/nn/tensor.hpp"

namespace graindeck::nn {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // d loss / d logits
};

/// Numerically stable softmax of one logit row, computed in double.
std::vector<double> softmax(std::span<const double> logits);

/// Mean softmax cross-entropy over the batch. `logits` is (N, K, 1, 1);
/// labels are class indices.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// Mean binary cross-entropy on logits plus the soft Dice complement
/// 1 - (2Σpt + 1) / (Σp + Σt + 1), both over every pixel of the batch and
/// weighted equally. `logits` and `targets` share shape (N, 1, H, W).
template <typename T>
LossResult<T> bce_dice_loss(const Tensor<T>& logits, const Tensor<T>& targets);

/// Soft Dice complement on probabilities, in [0, 1]; 0 iff p equals a
/// binary target exactly.
double dice_complement(std::span<const double> probs, std::span<const double> targets);

double sigmoid(double x) noexcept;

extern template LossResult<float> softmax_cross_entropy(const Tensor<float>&, std::span<const int>);
extern template LossResult<double> softmax_cross_entropy(const Tensor<double>&, std::span<const int>);
extern template LossResult<float> bce_dice_loss(const Tensor<float>&, const Tensor<float>&);
extern template LossResult<double> bce_dice_loss(const Tensor<double>&, const Tensor<double>&);

}  // namespace graindeck::nn
