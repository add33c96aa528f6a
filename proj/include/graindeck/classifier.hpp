#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graindeck/augment.hpp"
#include "graindeck/corpus.hpp"
#include "graindeck/image.hpp"
#include "graindeck/nn/layers.hpp"
#include "graindeck/training.hpp"
#include "graindeck/variety.hpp"

namespace graindeck::classifier {

struct ClassifierConfig {
  int input_size = 96;
  std::vector<int> stage_widths{16, 32, 64};
  std::vector<int> blocks_per_stage{2, 2, 2};
  int num_classes = kNumVarieties;
  int head_only_epochs = 1;
  /// Stride of the 3x3 stem convolution.
  int stem_stride = 2;

  /// Throws ConfigError.
  void validate() const;

  /// 50-layer-sized layout (3-4-6-3 blocks, widths 256..2048, 224 px input)
  /// for machines that can afford it.
  static ClassifierConfig paper_scale();
};

/// Pre-activation residual block:
///   pre = relu(bn1(x))
///   y   = conv2(relu(bn2(conv1(pre)))) + shortcut
/// The shortcut is x itself, or a strided 1x1 projection of `pre` when the
/// channel count or resolution changes. Convolutions carry no bias, so a
/// zeroed conv2 makes the block exactly its shortcut.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock(const std::string& name, int in_channels, int out_channels, int stride, Rng& rng);

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training);
  nn::Tensor<T> apply(const nn::Tensor<T>& x) const;
  nn::Tensor<T> backward(const nn::Tensor<T>& dy);

  bool has_projection() const noexcept { return projection_.has_value(); }
  nn::Conv2d<T>& conv1() noexcept { return conv1_; }
  nn::Conv2d<T>& conv2() noexcept { return conv2_; }
  nn::Conv2d<T>* projection() noexcept { return projection_ ? &*projection_ : nullptr; }
  typename nn::Tensor<T>::Shape output_shape(const typename nn::Tensor<T>::Shape& in) const;

  void collect(std::vector<nn::Parameter<T>*>& out);
  void collect_state(std::vector<nn::StateRef<T>>& out);

 private:
  nn::BatchNorm2d<T> bn1_;
  nn::ReLU<T> relu1_;
  nn::Conv2d<T> conv1_;
  nn::BatchNorm2d<T> bn2_;
  nn::ReLU<T> relu2_;
  nn::Conv2d<T> conv2_;
  std::optional<nn::Conv2d<T>> projection_;
};

/// Stem conv, residual stages, final BN + ReLU, global average pooling and
/// a linear head producing (N, 7, 1, 1) logits.
template <typename T>
class ResNet {
 public:
  ResNet(const ClassifierConfig& config, std::uint64_t seed);

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training);
  nn::Tensor<T> apply(const nn::Tensor<T>& x) const;
  /// With head_only set, only the linear head is differentiated.
  void backward(const nn::Tensor<T>& dlogits, bool head_only = false);

  const ClassifierConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::vector<ResidualBlock<T>>& blocks() noexcept { return blocks_; }
  nn::Linear<T>& head() noexcept { return head_; }

  std::vector<nn::Parameter<T>*> parameters();
  std::vector<nn::Parameter<T>*> head_parameters();
  /// Parameters and running statistics, in a fixed order.
  std::vector<nn::StateRef<T>> state();

 private:
  ClassifierConfig config_;
  std::uint64_t seed_;
  nn::Conv2d<T> stem_;
  std::vector<ResidualBlock<T>> blocks_;
  nn::BatchNorm2d<T> final_bn_;
  nn::ReLU<T> final_relu_;
  nn::GlobalAvgPool<T> pool_;
  nn::Linear<T> head_;
};

using Classifier = ResNet<float>;

Classifier build_classifier(const ClassifierConfig& config, std::uint64_t seed);

struct ClassProbabilities {
  std::array<double, kNumVarieties> probs{};
};

/// Argmax; ties go to the lowest canonical index.
RiceVariety predict_label(const ClassProbabilities& p);

/// Pads to a square with the border median, resizes to input_size and
/// normalises each channel as (v/255 - 0.5)/0.25 into CHW order.
void preprocess_into(const Image& image, int input_size, float* dst);
nn::Tensor<float> preprocess(const Image& image, int input_size);

ClassProbabilities predict(const Classifier& model, const Image& image);
RiceVariety predict_label(const Classifier& model, const Image& image);
/// Same results as calling predict per image, evaluated in batches.
std::vector<ClassProbabilities> predict_batch(const Classifier& model,
                                              std::span<const Image* const> images);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on split.train, selects the epoch with the best validation
/// accuracy (earliest on ties) and leaves the model holding its weights.
/// The first config.head_only_epochs epochs update only the head.
TrainHistory train_classifier(Classifier& model, const std::vector<LabeledImage>& samples,
                              const corpus::DatasetSplit& split, const TrainHyper& hyper,
                              const augment::AugmentConfig& augment,
                              const EpochCallback& on_epoch = {});

}  // namespace graindeck::classifier
