#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "graindeck/corpus.hpp"
#include "graindeck/image.hpp"
#include "graindeck/nn/layers.hpp"
#include "graindeck/training.hpp"

namespace graindeck::segmenter {

struct SegmenterConfig {
  int input_size = 256;
  int depth = 4;
  int base_channels = 16;
  double threshold = 0.5;

  /// Throws ConfigError, e.g. when input_size is not divisible by 2^depth.
  void validate() const;

  /// 128 px, depth 3, 8 base channels: trains on one CPU core in minutes.
  static SegmenterConfig desk_scale();
};

/// conv3x3 - BN - ReLU, twice.
template <typename T>
class DoubleConv {
 public:
  DoubleConv() = default;
  DoubleConv(const std::string& name, int in_channels, int out_channels, Rng& rng);

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training);
  nn::Tensor<T> apply(const nn::Tensor<T>& x) const;
  nn::Tensor<T> backward(const nn::Tensor<T>& dy);

  void collect(std::vector<nn::Parameter<T>*>& out);
  void collect_state(std::vector<nn::StateRef<T>>& out);

 private:
  nn::Conv2d<T> conv_a_;
  nn::BatchNorm2d<T> bn_a_;
  nn::ReLU<T> relu_a_;
  nn::Conv2d<T> conv_b_;
  nn::BatchNorm2d<T> bn_b_;
  nn::ReLU<T> relu_b_;
};

/// Spatial shapes meeting at one skip connection.
struct SkipShapes {
  int level = 0;
  std::array<int, 4> skip{};
  std::array<int, 4> upsampled{};
};

/// Encoder levels of DoubleConv + 2x2 max pooling with channels
/// base * 2^level, a DoubleConv bottleneck, mirrored decoder levels of 2x2
/// transposed convolution + skip concatenation + DoubleConv, and a 1x1
/// convolution to one logit channel.
template <typename T>
class UNet {
 public:
  UNet(const SegmenterConfig& config, std::uint64_t seed);

  /// (N, 3, S, S) -> (N, 1, S, S) logits.
  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training);
  nn::Tensor<T> apply(const nn::Tensor<T>& x, std::vector<SkipShapes>* trace = nullptr) const;
  void backward(const nn::Tensor<T>& dlogits);

  const SegmenterConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::vector<nn::Parameter<T>*> parameters();
  std::vector<nn::StateRef<T>> state();

 private:
  SegmenterConfig config_;
  std::uint64_t seed_;
  std::vector<DoubleConv<T>> encoders_;
  std::vector<nn::MaxPool2<T>> pools_;
  DoubleConv<T> bottleneck_;
  std::vector<nn::ConvTranspose2x2<T>> ups_;
  std::vector<DoubleConv<T>> decoders_;
  nn::Conv2d<T> out_conv_;
  std::vector<int> skip_channels_;
};

using Segmenter = UNet<float>;

Segmenter build_unet(const SegmenterConfig& config, std::uint64_t seed);

/// Probability map at the image's own resolution.
using ProbMask = FloatMap;

/// The image is padded to a square (border-median fill), resized to
/// input_size, segmented, and the probabilities are resized back and
/// cropped to the original frame.
ProbMask predict_mask(const Segmenter& model, const Image& image);

/// value > threshold -> 1, else 0. Throws ConfigError unless 0 < t < 1.
Mask binarize(const ProbMask& prob, double threshold);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minimises BCE + (1 - Dice) on `train` with random dihedral flips and
/// quarter turns applied jointly to image and mask; keeps the epoch with the
/// best aggregate validation IoU (earliest on ties).
TrainHistory train_segmenter(Segmenter& model, const std::vector<BulkSample>& train,
                             const std::vector<BulkSample>& validation, const TrainHyper& hyper,
                             const EpochCallback& on_epoch = {});

/// Holds out round(n * validation_fraction) seeded-random pairs for
/// validation (at least one when n >= 2; with a single pair it validates on
/// the training pair) and trains on the rest.
TrainHistory train_segmenter(Segmenter& model, const std::vector<BulkSample>& pairs,
                             const TrainHyper& hyper, double validation_fraction = 0.2,
                             const EpochCallback& on_epoch = {});

}  // namespace graindeck::segmenter
