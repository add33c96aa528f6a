#pragma once

#include <string>
#include <vector>

#include "graindeck/nn/tensor.hpp"
#include "graindeck/rng.hpp"

namespace graindeck::nn {

// forward() caches what the backward pass needs; apply() computes the same
// inference-mode result without touching the layer. backward() accumulates
// into parameter gradients and returns the gradient with respect to the
// layer input; it must follow the forward() call it differentiates.

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding,
         bool bias, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> apply(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& dy);

  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }
  typename Tensor<T>::Shape output_shape(const typename Tensor<T>::Shape& in) const;

  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }
  bool has_bias() const noexcept { return has_bias_; }

  void collect(std::vector<Parameter<T>*>& out);
  void collect_state(std::vector<StateRef<T>>& out);

 private:
  void im2col(const T* src, int h, int w, int oh, int ow, T* col) const;
  void col2im(const T* col, int h, int w, int oh, int ow, T* dst) const;
  bool pointwise() const noexcept { return k_ == 1 && stride_ == 1 && pad_ == 0; }

  int in_ = 0;
  int out_ = 0;
  int k_ = 1;
  int stride_ = 1;
  int pad_ = 0;
  bool has_bias_ = false;
  Parameter<T> weight_;  // (out, in, k, k)
  Parameter<T> bias_;    // (1, out, 1, 1)
  Tensor<T> input_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(std::string name, int channels);

  /// Training mode normalises with batch statistics and updates the running
  /// estimates; evaluation mode uses the running estimates.
  Tensor<T> forward(const Tensor<T>& x, bool training);
  /// Evaluation-mode normalisation without caching.
  Tensor<T> apply(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& dy);

  Parameter<T>& gamma() noexcept { return gamma_; }
  Parameter<T>& beta() noexcept { return beta_; }
  Tensor<T>& running_mean() noexcept { return running_mean_; }
  Tensor<T>& running_var() noexcept { return running_var_; }

  void collect(std::vector<Parameter<T>*>& out);
  void collect_state(std::vector<StateRef<T>>& out);

  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  int channels_ = 0;
  std::string name_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  bool training_ = false;
};

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> apply(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  std::vector<unsigned char> active_;
};

/// 2x2 max pooling with stride 2. Input height and width must be even.
template <typename T>
class MaxPool2 {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> apply(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  typename Tensor<T>::Shape in_shape_{};
  std::vector<std::uint32_t> argmax_;
};

/// 2x2 transposed convolution with stride 2 (exact 2x upsampling).
template <typename T>
class ConvTranspose2x2 {
 public:
  ConvTranspose2x2() = default;
  ConvTranspose2x2(std::string name, int in_channels, int out_channels, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> apply(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& dy);

  void collect(std::vector<Parameter<T>*>& out);
  void collect_state(std::vector<StateRef<T>>& out);

 private:
  int in_ = 0;
  int out_ = 0;
  Parameter<T> weight_;  // (in, out, 2, 2)
  Parameter<T> bias_;    // (1, out, 1, 1)
  Tensor<T> input_;
};

/// (N, C, H, W) -> (N, C, 1, 1).
template <typename T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> apply(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  typename Tensor<T>::Shape in_shape_{};
};

/// (N, in, 1, 1) -> (N, out, 1, 1).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in_features, int out_features, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> apply(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& dy);

  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }

  void collect(std::vector<Parameter<T>*>& out);
  void collect_state(std::vector<StateRef<T>>& out);

 private:
  int in_ = 0;
  int out_ = 0;
  Parameter<T> weight_;  // (out, in, 1, 1)
  Parameter<T> bias_;    // (1, out, 1, 1)
  Tensor<T> input_;
};

/// Channel concatenation of two tensors with equal N, H, W.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Inverse of concat_channels for gradients: splits off the first
/// `channels_a` channels.
template <typename T>
void split_channels(const Tensor<T>& x, int channels_a, Tensor<T>& a, Tensor<T>& b);

}  // namespace graindeck::nn
