#include "graindeck/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graindeck/error.hpp"
#include "graindeck/nn/loss.hpp"
#include "graindeck/nn/optim.hpp"

namespace graindeck::classifier {

using nn::Tensor;

void ClassifierConfig::validate() const {
  if (input_size < 8) throw ConfigError("input_size must be at least 8");
  if (stage_widths.empty()) throw ConfigError("at least one stage is required");
  if (stage_widths.size() != blocks_per_stage.size()) {
    throw ConfigError("stage_widths and blocks_per_stage differ in length (" +
                      std::to_string(stage_widths.size()) + " vs " +
                      std::to_string(blocks_per_stage.size()) + ")");
  }
  for (int w : stage_widths) {
    if (w <= 0) throw ConfigError("stage widths must be positive");
  }
  for (int b : blocks_per_stage) {
    if (b <= 0) throw ConfigError("every stage needs at least one block");
  }
  if (num_classes != kNumVarieties) {
    throw ConfigError("num_classes is fixed at " + std::to_string(kNumVarieties));
  }
  if (head_only_epochs < 0) throw ConfigError("head_only_epochs must be non-negative");
  if (stem_stride < 1 || stem_stride > 2) throw ConfigError("stem_stride must be 1 or 2");
  int side = (input_size - 1) / stem_stride + 1;
  for (std::size_t s = 1; s < stage_widths.size(); ++s) side = (side - 1) / 2 + 1;
  if (side < 1) throw ConfigError("input_size too small for the number of stages");
}

ClassifierConfig ClassifierConfig::paper_scale() {
  ClassifierConfig c;
  c.input_size = 224;
  c.stage_widths = {256, 512, 1024, 2048};
  c.blocks_per_stage = {3, 4, 6, 3};
  return c;
}

// ---------------------------------------------------------------------------

template <typename T>
ResidualBlock<T>::ResidualBlock(const std::string& name, int in_channels, int out_channels,
                                int stride, Rng& rng)
    : bn1_(name + ".bn1", in_channels),
      conv1_(name + ".conv1", in_channels, out_channels, 3, stride, 1, false, rng),
      bn2_(name + ".bn2", out_channels),
      conv2_(name + ".conv2", out_channels, out_channels, 3, 1, 1, false, rng) {
  if (stride != 1 || in_channels != out_channels) {
    projection_.emplace(name + ".proj", in_channels, out_channels, 1, stride, 0, false, rng);
  }
}

template <typename T>
typename Tensor<T>::Shape ResidualBlock<T>::output_shape(const typename Tensor<T>::Shape& in) const {
  return conv1_.output_shape(in);
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, bool training) {
  Tensor<T> pre = relu1_.forward(bn1_.forward(x, training));
  Tensor<T> y = conv2_.forward(relu2_.forward(bn2_.forward(conv1_.forward(pre), training)));
  if (projection_) {
    y += projection_->forward(pre);
  } else {
    y += x;
  }
  return y;
}

template <typename T>
Tensor<T> ResidualBlock<T>::apply(const Tensor<T>& x) const {
  Tensor<T> pre = relu1_.apply(bn1_.apply(x));
  Tensor<T> y = conv2_.apply(relu2_.apply(bn2_.apply(conv1_.apply(pre))));
  if (projection_) {
    y += projection_->apply(pre);
  } else {
    y += x;
  }
  return y;
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dpre = conv1_.backward(bn2_.backward(relu2_.backward(conv2_.backward(dy))));
  if (projection_) dpre += projection_->backward(dy);
  Tensor<T> dx = bn1_.backward(relu1_.backward(dpre));
  if (!projection_) dx += dy;
  return dx;
}

template <typename T>
void ResidualBlock<T>::collect(std::vector<nn::Parameter<T>*>& out) {
  bn1_.collect(out);
  conv1_.collect(out);
  bn2_.collect(out);
  conv2_.collect(out);
  if (projection_) projection_->collect(out);
}

template <typename T>
void ResidualBlock<T>::collect_state(std::vector<nn::StateRef<T>>& out) {
  bn1_.collect_state(out);
  conv1_.collect_state(out);
  bn2_.collect_state(out);
  conv2_.collect_state(out);
  if (projection_) projection_->collect_state(out);
}

// ---------------------------------------------------------------------------

template <typename T>
ResNet<T>::ResNet(const ClassifierConfig& config, std::uint64_t seed)
    : config_((config.validate(), config)), seed_(seed) {
  Rng rng(mix_seed(seed, 0xC1A5));
  stem_ = nn::Conv2d<T>("stem", 3, config_.stage_widths[0], 3, config_.stem_stride, 1, false, rng);
  int channels = config_.stage_widths[0];
  for (std::size_t s = 0; s < config_.stage_widths.size(); ++s) {
    for (int b = 0; b < config_.blocks_per_stage[s]; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      const std::string name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
      blocks_.emplace_back(name, channels, config_.stage_widths[s], stride, rng);
      channels = config_.stage_widths[s];
    }
  }
  final_bn_ = nn::BatchNorm2d<T>("final_bn", channels);
  head_ = nn::Linear<T>("head", channels, config_.num_classes, rng);
}

template <typename T>
Tensor<T> ResNet<T>::forward(const Tensor<T>& x, bool training) {
  Tensor<T> h = stem_.forward(x);
  for (auto& block : blocks_) h = block.forward(h, training);
  return head_.forward(pool_.forward(final_relu_.forward(final_bn_.forward(h, training))));
}

template <typename T>
Tensor<T> ResNet<T>::apply(const Tensor<T>& x) const {
  Tensor<T> h = stem_.apply(x);
  for (const auto& block : blocks_) h = block.apply(h);
  return head_.apply(pool_.apply(final_relu_.apply(final_bn_.apply(h))));
}

template <typename T>
void ResNet<T>::backward(const Tensor<T>& dlogits, bool head_only) {
  Tensor<T> g = head_.backward(dlogits);
  if (head_only) return;
  g = final_bn_.backward(final_relu_.backward(pool_.backward(g)));
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g);
  stem_.backward(g);
}

template <typename T>
std::vector<nn::Parameter<T>*> ResNet<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  stem_.collect(out);
  for (auto& block : blocks_) block.collect(out);
  final_bn_.collect(out);
  head_.collect(out);
  return out;
}

template <typename T>
std::vector<nn::Parameter<T>*> ResNet<T>::head_parameters() {
  std::vector<nn::Parameter<T>*> out;
  head_.collect(out);
  return out;
}

template <typename T>
std::vector<nn::StateRef<T>> ResNet<T>::state() {
  std::vector<nn::StateRef<T>> out;
  stem_.collect_state(out);
  for (auto& block : blocks_) block.collect_state(out);
  final_bn_.collect_state(out);
  head_.collect_state(out);
  return out;
}

template class ResidualBlock<float>;
template class ResidualBlock<double>;
template class ResNet<float>;
template class ResNet<double>;

Classifier build_classifier(const ClassifierConfig& config, std::uint64_t seed) {
  return Classifier(config, seed);
}

// ---------------------------------------------------------------------------
// Inference

RiceVariety predict_label(const ClassProbabilities& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.probs.size(); ++i) {
    if (p.probs[i] > p.probs[best]) best = i;
  }
  return variety_from_index(static_cast<int>(best));
}

void preprocess_into(const Image& image, int input_size, float* dst) {
  if (image.empty()) throw DataError("cannot classify an empty image");
  const Image square = resize_bilinear(pad_to_square(image, border_median(image)), input_size,
                                       input_size);
  const std::size_t plane = static_cast<std::size_t>(input_size) * input_size;
  const auto px = square.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      dst[plane * ch + i] = (static_cast<float>(px[i * 3 + ch]) / 255.0f - 0.5f) / 0.25f;
    }
  }
}

Tensor<float> preprocess(const Image& image, int input_size) {
  Tensor<float> t({1, 3, input_size, input_size});
  preprocess_into(image, input_size, t.data());
  return t;
}

namespace {

ClassProbabilities probabilities_from(const Tensor<float>& logits, int n) {
  std::array<double, kNumVarieties> row{};
  for (std::size_t k = 0; k < kNumVarieties; ++k) row[k] = logits.at(n, static_cast<int>(k), 0, 0);
  const auto p = nn::softmax(row);
  ClassProbabilities out;
  std::copy(p.begin(), p.end(), out.probs.begin());
  return out;
}

constexpr int kInferenceBatch = 32;

double cross_entropy_of(const ClassProbabilities& p, int label) {
  return -std::log(std::max(p.probs[static_cast<std::size_t>(label)], 1e-300));
}

}  // namespace

std::vector<ClassProbabilities> predict_batch(const Classifier& model,
                                              std::span<const Image* const> images) {
  const int S = model.config().input_size;
  std::vector<ClassProbabilities> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kInferenceBatch) {
    const int n = static_cast<int>(std::min<std::size_t>(kInferenceBatch, images.size() - start));
    Tensor<float> x({n, 3, S, S});
    for (int i = 0; i < n; ++i) preprocess_into(*images[start + i], S, x.sample(i));
    const Tensor<float> logits = model.apply(x);
    for (int i = 0; i < n; ++i) out.push_back(probabilities_from(logits, i));
  }
  return out;
}

ClassProbabilities predict(const Classifier& model, const Image& image) {
  const Tensor<float> logits = model.apply(preprocess(image, model.config().input_size));
  return probabilities_from(logits, 0);
}

RiceVariety predict_label(const Classifier& model, const Image& image) {
  return predict_label(predict(model, image));
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<Tensor<float>> snapshot(Classifier& model) {
  std::vector<Tensor<float>> out;
  for (const auto& s : model.state()) out.push_back(*s.tensor);
  return out;
}

void restore(Classifier& model, std::vector<Tensor<float>>& saved) {
  auto refs = model.state();
  for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].tensor = std::move(saved[i]);
}

}  // namespace

TrainHistory train_classifier(Classifier& model, const std::vector<LabeledImage>& samples,
                              const corpus::DatasetSplit& split, const TrainHyper& hyper,
                              const augment::AugmentConfig& augment,
                              const EpochCallback& on_epoch) {
  hyper.validate();
  augment.validate();
  if (split.train.empty()) throw InsufficientDataError("training set is empty");
  if (split.validation.empty()) throw InsufficientDataError("validation set is empty");
  for (std::size_t idx : split.train) {
    if (idx >= samples.size()) throw ConfigError("split references a missing sample");
  }
  for (std::size_t idx : split.validation) {
    if (idx >= samples.size()) throw ConfigError("split references a missing sample");
  }

  const int S = model.config().input_size;
  const nn::SgdMomentum sgd{hyper.momentum, hyper.weight_decay};
  const auto all_params = model.parameters();
  const auto head_params = model.head_parameters();
  for (auto* p : all_params) p->velocity.fill(0.0f);

  std::vector<const Image*> val_images;
  for (std::size_t idx : split.validation) val_images.push_back(&samples[idx].pixels);

  TrainHistory history;
  history.hyper = hyper;
  history.metric_name = "val_accuracy";
  std::vector<Tensor<float>> best_state;
  double best_acc = -1.0;

  std::vector<std::size_t> order = split.train;
  const std::uint64_t aug_seed = mix_seed(augment.seed, hyper.seed);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const double lr = nn::step_decay(hyper.learning_rate, epoch, hyper.lr_step, hyper.lr_gamma);
    const bool head_only = epoch < model.config().head_only_epochs;
    Rng order_rng(mix_seed(hyper.seed, 0x0DE0 + static_cast<std::uint64_t>(epoch)));
    order = split.train;
    order_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size, ++batch_index) {
      const int n = static_cast<int>(
          std::min<std::size_t>(static_cast<std::size_t>(hyper.batch_size), order.size() - start));
      Tensor<float> x({n, 3, S, S});
      std::vector<int> labels(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const std::size_t idx = order[start + i];
        Rng aug_rng(mix_seed(aug_seed, (static_cast<std::uint64_t>(epoch) << 32) | idx));
        const LabeledImage sample = augment::random_augment(samples[idx], augment, aug_rng);
        preprocess_into(sample.pixels, S, x.sample(i));
        labels[static_cast<std::size_t>(i)] = index_of(sample.label);
      }
      const Tensor<float> logits = model.forward(x, true);
      const auto loss = nn::softmax_cross_entropy(logits, std::span<const int>(labels));
      if (!std::isfinite(loss.loss)) throw DivergenceError(epoch + 1, batch_index + 1);
      nn::zero_grad(all_params);
      model.backward(loss.grad, head_only);
      sgd.step(head_only ? head_params : all_params, lr);
      loss_sum += loss.loss * n;
    }

    const auto probs = predict_batch(model, val_images);
    double val_loss = 0.0;
    int correct = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const RiceVariety truth = samples[split.validation[i]].label;
      val_loss += cross_entropy_of(probs[i], index_of(truth));
      if (predict_label(probs[i]) == truth) ++correct;
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.learning_rate = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = val_loss / static_cast<double>(probs.size());
    rec.val_metric = static_cast<double>(correct) / static_cast<double>(probs.size());
    history.records.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_metric > best_acc) {
      best_acc = rec.val_metric;
      history.best_epoch = rec.epoch;
      history.best_metric = rec.val_metric;
      best_state = snapshot(model);
    }
  }
  restore(model, best_state);
  return history;
}

}  // namespace graindeck::classifier
