#include "graindeck/segmenter.hpp"

#include <algorithm>
#include <cmath>

#include "graindeck/error.hpp"
#include "graindeck/metrics.hpp"
#include "graindeck/nn/loss.hpp"
#include "graindeck/nn/optim.hpp"

namespace graindeck::segmenter {

using nn::Tensor;

void SegmenterConfig::validate() const {
  if (depth < 1 || depth > 8) throw ConfigError("depth must lie in [1, 8]");
  if (base_channels < 1) throw ConfigError("base_channels must be positive");
  if (input_size < 2) throw ConfigError("input_size must be at least 2");
  const int factor = 1 << depth;
  if (input_size % factor != 0) {
    throw ConfigError("input_size " + std::to_string(input_size) + " is not divisible by 2^" +
                      std::to_string(depth) + " = " + std::to_string(factor));
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
}

SegmenterConfig SegmenterConfig::desk_scale() {
  SegmenterConfig c;
  c.input_size = 128;
  c.depth = 3;
  c.base_channels = 8;
  return c;
}

// ---------------------------------------------------------------------------

template <typename T>
DoubleConv<T>::DoubleConv(const std::string& name, int in_channels, int out_channels, Rng& rng)
    : conv_a_(name + ".conv_a", in_channels, out_channels, 3, 1, 1, false, rng),
      bn_a_(name + ".bn_a", out_channels),
      conv_b_(name + ".conv_b", out_channels, out_channels, 3, 1, 1, false, rng),
      bn_b_(name + ".bn_b", out_channels) {}

template <typename T>
Tensor<T> DoubleConv<T>::forward(const Tensor<T>& x, bool training) {
  Tensor<T> h = relu_a_.forward(bn_a_.forward(conv_a_.forward(x), training));
  return relu_b_.forward(bn_b_.forward(conv_b_.forward(h), training));
}

template <typename T>
Tensor<T> DoubleConv<T>::apply(const Tensor<T>& x) const {
  return relu_b_.apply(bn_b_.apply(conv_b_.apply(relu_a_.apply(bn_a_.apply(conv_a_.apply(x))))));
}

template <typename T>
Tensor<T> DoubleConv<T>::backward(const Tensor<T>& dy) {
  Tensor<T> g = conv_b_.backward(bn_b_.backward(relu_b_.backward(dy)));
  return conv_a_.backward(bn_a_.backward(relu_a_.backward(g)));
}

template <typename T>
void DoubleConv<T>::collect(std::vector<nn::Parameter<T>*>& out) {
  conv_a_.collect(out);
  bn_a_.collect(out);
  conv_b_.collect(out);
  bn_b_.collect(out);
}

template <typename T>
void DoubleConv<T>::collect_state(std::vector<nn::StateRef<T>>& out) {
  conv_a_.collect_state(out);
  bn_a_.collect_state(out);
  conv_b_.collect_state(out);
  bn_b_.collect_state(out);
}

// ---------------------------------------------------------------------------

template <typename T>
UNet<T>::UNet(const SegmenterConfig& config, std::uint64_t seed)
    : config_((config.validate(), config)), seed_(seed) {
  Rng rng(mix_seed(seed, 0x5E6));
  int in = 3;
  for (int l = 0; l < config_.depth; ++l) {
    const int ch = config_.base_channels << l;
    encoders_.emplace_back("enc" + std::to_string(l + 1), in, ch, rng);
    pools_.emplace_back();
    skip_channels_.push_back(ch);
    in = ch;
  }
  const int bottom = config_.base_channels << config_.depth;
  bottleneck_ = DoubleConv<T>("bottleneck", in, bottom, rng);
  in = bottom;
  for (int l = config_.depth - 1; l >= 0; --l) {
    const int ch = config_.base_channels << l;
    ups_.emplace_back("up" + std::to_string(l + 1), in, ch, rng);
    decoders_.emplace_back("dec" + std::to_string(l + 1), 2 * ch, ch, rng);
    in = ch;
  }
  out_conv_ = nn::Conv2d<T>("out", in, 1, 1, 1, 0, true, rng);
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& x, bool training) {
  std::vector<Tensor<T>> skips(static_cast<std::size_t>(config_.depth));
  Tensor<T> h = x;
  for (int l = 0; l < config_.depth; ++l) {
    skips[l] = encoders_[l].forward(h, training);
    h = pools_[l].forward(skips[l]);
  }
  h = bottleneck_.forward(h, training);
  for (int i = 0; i < config_.depth; ++i) {
    const int l = config_.depth - 1 - i;
    h = decoders_[i].forward(nn::concat_channels(skips[l], ups_[i].forward(h)), training);
  }
  return out_conv_.forward(h);
}

template <typename T>
Tensor<T> UNet<T>::apply(const Tensor<T>& x, std::vector<SkipShapes>* trace) const {
  if (x.c() != 3 || x.h() != config_.input_size || x.w() != config_.input_size) {
    throw ShapeError("segmenter expects (N, 3, " + std::to_string(config_.input_size) + ", " +
                     std::to_string(config_.input_size) + "), got " + nn::shape_string(x.shape()));
  }
  std::vector<Tensor<T>> skips(static_cast<std::size_t>(config_.depth));
  Tensor<T> h = x;
  for (int l = 0; l < config_.depth; ++l) {
    skips[l] = encoders_[l].apply(h);
    h = pools_[l].apply(skips[l]);
  }
  h = bottleneck_.apply(h);
  for (int i = 0; i < config_.depth; ++i) {
    const int l = config_.depth - 1 - i;
    Tensor<T> up = ups_[i].apply(h);
    if (trace) trace->push_back({l, skips[l].shape(), up.shape()});
    h = decoders_[i].apply(nn::concat_channels(skips[l], up));
  }
  return out_conv_.apply(h);
}

template <typename T>
void UNet<T>::backward(const Tensor<T>& dlogits) {
  std::vector<Tensor<T>> dskips(static_cast<std::size_t>(config_.depth));
  Tensor<T> g = out_conv_.backward(dlogits);
  for (int i = config_.depth - 1; i >= 0; --i) {
    const int l = config_.depth - 1 - i;
    Tensor<T> gcat = decoders_[i].backward(g);
    Tensor<T> dup;
    nn::split_channels(gcat, skip_channels_[l], dskips[l], dup);
    g = ups_[i].backward(dup);
  }
  g = bottleneck_.backward(g);
  for (int l = config_.depth - 1; l >= 0; --l) {
    g = pools_[l].backward(g);
    g += dskips[l];
    g = encoders_[l].backward(g);
  }
}

template <typename T>
std::vector<nn::Parameter<T>*> UNet<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  for (auto& e : encoders_) e.collect(out);
  bottleneck_.collect(out);
  for (std::size_t i = 0; i < ups_.size(); ++i) {
    ups_[i].collect(out);
    decoders_[i].collect(out);
  }
  out_conv_.collect(out);
  return out;
}

template <typename T>
std::vector<nn::StateRef<T>> UNet<T>::state() {
  std::vector<nn::StateRef<T>> out;
  for (auto& e : encoders_) e.collect_state(out);
  bottleneck_.collect_state(out);
  for (std::size_t i = 0; i < ups_.size(); ++i) {
    ups_[i].collect_state(out);
    decoders_[i].collect_state(out);
  }
  out_conv_.collect_state(out);
  return out;
}

template class DoubleConv<float>;
template class DoubleConv<double>;
template class UNet<float>;
template class UNet<double>;

Segmenter build_unet(const SegmenterConfig& config, std::uint64_t seed) {
  return Segmenter(config, seed);
}

// ---------------------------------------------------------------------------
// Geometry between an image and the square model input

namespace {

struct Frame {
  int height = 0;
  int width = 0;
  int side = 0;
  int row0 = 0;
  int col0 = 0;
};

Frame frame_of(const Image& image) {
  Frame f;
  f.height = image.height();
  f.width = image.width();
  f.side = std::max(f.height, f.width);
  f.row0 = (f.side - f.height) / 2;
  f.col0 = (f.side - f.width) / 2;
  return f;
}

void image_to_input(const Image& image, int size, float* dst) {
  if (image.empty()) throw DataError("cannot segment an empty image");
  const Image square = resize_bilinear(pad_to_square(image, border_median(image)), size, size);
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  const auto px = square.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      dst[plane * ch + i] = (static_cast<float>(px[i * 3 + ch]) / 255.0f - 0.5f) / 0.25f;
    }
  }
}

void mask_to_target(const Mask& mask, const Frame& f, int size, float* dst) {
  FloatMap square(f.side, f.side, 0.0f);
  for (int r = 0; r < f.height; ++r) {
    for (int c = 0; c < f.width; ++c) square.at(r + f.row0, c + f.col0) = mask.at(r, c) ? 1.0f : 0.0f;
  }
  const FloatMap resized = resize_bilinear(square, size, size);
  for (std::size_t i = 0; i < resized.values.size(); ++i) dst[i] = resized.values[i] > 0.5f ? 1.0f : 0.0f;
}

ProbMask logits_to_prob(const Tensor<float>& logits, int n, const Frame& f) {
  const int S = logits.h();
  FloatMap square(S, S);
  const float* src = logits.sample(n);
  for (std::size_t i = 0; i < square.values.size(); ++i) {
    square.values[i] = static_cast<float>(nn::sigmoid(src[i]));
  }
  const FloatMap full = resize_bilinear(square, f.side, f.side);
  ProbMask out(f.height, f.width);
  for (int r = 0; r < f.height; ++r) {
    for (int c = 0; c < f.width; ++c) {
      out.at(r, c) = std::clamp(full.at(r + f.row0, c + f.col0), 0.0f, 1.0f);
    }
  }
  return out;
}

/// Applies dihedral element `d` (bit 0: mirror columns, bit 1: mirror rows,
/// bit 2: transpose) to `channels` square planes.
void dihedral(const float* src, float* dst, int channels, int side, int d) {
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  for (int ch = 0; ch < channels; ++ch) {
    const float* s = src + plane * ch;
    float* o = dst + plane * ch;
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        int sy = (d & 4) ? x : y;
        int sx = (d & 4) ? y : x;
        if (d & 1) sx = side - 1 - sx;
        if (d & 2) sy = side - 1 - sy;
        o[static_cast<std::size_t>(y) * side + x] = s[static_cast<std::size_t>(sy) * side + sx];
      }
    }
  }
}

constexpr int kInferenceBatch = 8;

}  // namespace

ProbMask predict_mask(const Segmenter& model, const Image& image) {
  const int S = model.config().input_size;
  Tensor<float> x({1, 3, S, S});
  image_to_input(image, S, x.data());
  return logits_to_prob(model.apply(x), 0, frame_of(image));
}

Mask binarize(const ProbMask& prob, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  Mask out(prob.height, prob.width);
  for (std::size_t i = 0; i < prob.values.size(); ++i) {
    out.data()[i] = prob.values[i] > threshold ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

void check_pair(const BulkSample& s) {
  if (s.pixels.height() != s.mask.height() || s.pixels.width() != s.mask.width()) {
    throw ShapeError(s.source_id + ": image " + shape_string(s.pixels.height(), s.pixels.width()) +
                     " vs mask " + shape_string(s.mask.height(), s.mask.width()));
  }
  for (std::uint8_t v : s.mask.data()) {
    if (v > 1) throw DataError(s.source_id + ": mask is not binary");
  }
}

}  // namespace

TrainHistory train_segmenter(Segmenter& model, const std::vector<BulkSample>& train,
                             const std::vector<BulkSample>& validation, const TrainHyper& hyper,
                             const EpochCallback& on_epoch) {
  hyper.validate();
  if (train.empty()) throw InsufficientDataError("segmenter needs at least one training pair");
  if (validation.empty()) throw InsufficientDataError("segmenter needs validation pairs");
  for (const auto& s : train) check_pair(s);
  for (const auto& s : validation) check_pair(s);

  const int S = model.config().input_size;
  const std::size_t in_size = 3 * static_cast<std::size_t>(S) * S;
  const std::size_t tgt_size = static_cast<std::size_t>(S) * S;

  std::vector<float> inputs(in_size * train.size());
  std::vector<float> targets(tgt_size * train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    image_to_input(train[i].pixels, S, inputs.data() + in_size * i);
    mask_to_target(train[i].mask, frame_of(train[i].pixels), S, targets.data() + tgt_size * i);
  }
  Tensor<float> val_x({static_cast<int>(validation.size()), 3, S, S});
  Tensor<float> val_t({static_cast<int>(validation.size()), 1, S, S});
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const int n = static_cast<int>(i);
    image_to_input(validation[i].pixels, S, val_x.sample(n));
    mask_to_target(validation[i].mask, frame_of(validation[i].pixels), S, val_t.sample(n));
  }

  const nn::SgdMomentum sgd{hyper.momentum, hyper.weight_decay};
  const auto params = model.parameters();
  for (auto* p : params) p->velocity.fill(0.0f);

  TrainHistory history;
  history.hyper = hyper;
  history.metric_name = "val_iou";
  std::vector<Tensor<float>> best_state;
  double best_iou = -1.0;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const double lr = nn::step_decay(hyper.learning_rate, epoch, hyper.lr_step, hyper.lr_gamma);
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(hyper.seed, 0x5E60 + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size, ++batch_index) {
      const int n = static_cast<int>(
          std::min<std::size_t>(static_cast<std::size_t>(hyper.batch_size), order.size() - start));
      Tensor<float> x({n, 3, S, S});
      Tensor<float> t({n, 1, S, S});
      for (int i = 0; i < n; ++i) {
        const std::size_t idx = order[start + i];
        const int d = static_cast<int>(rng.index(8));
        dihedral(inputs.data() + in_size * idx, x.sample(i), 3, S, d);
        dihedral(targets.data() + tgt_size * idx, t.sample(i), 1, S, d);
      }
      const Tensor<float> logits = model.forward(x, true);
      const auto loss = nn::bce_dice_loss(logits, t);
      if (!std::isfinite(loss.loss)) throw DivergenceError(epoch + 1, batch_index + 1);
      nn::zero_grad(params);
      model.backward(loss.grad);
      sgd.step(params, lr);
      loss_sum += loss.loss * n;
    }

    double val_loss = 0.0;
    std::vector<std::pair<Mask, Mask>> pairs;
    for (int start = 0; start < val_x.n(); start += kInferenceBatch) {
      const int n = std::min(kInferenceBatch, val_x.n() - start);
      Tensor<float> xb({n, 3, S, S});
      Tensor<float> tb({n, 1, S, S});
      std::copy_n(val_x.sample(start), xb.size(), xb.data());
      std::copy_n(val_t.sample(start), tb.size(), tb.data());
      const Tensor<float> logits = model.apply(xb);
      for (int i = 0; i < n; ++i) {
        Tensor<float> li({1, 1, S, S});
        Tensor<float> ti({1, 1, S, S});
        std::copy_n(logits.sample(i), li.size(), li.data());
        std::copy_n(tb.sample(i), ti.size(), ti.data());
        val_loss += nn::bce_dice_loss(li, ti).loss;
        const BulkSample& s = validation[static_cast<std::size_t>(start + i)];
        pairs.emplace_back(binarize(logits_to_prob(logits, i, frame_of(s.pixels)),
                                    model.config().threshold),
                           s.mask);
      }
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.learning_rate = lr;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.val_loss = val_loss / static_cast<double>(validation.size());
    rec.val_metric = metrics::dataset_iou(pairs).aggregate;
    history.records.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_metric > best_iou) {
      best_iou = rec.val_metric;
      history.best_epoch = rec.epoch;
      history.best_metric = rec.val_metric;
      best_state.clear();
      for (const auto& s : model.state()) best_state.push_back(*s.tensor);
    }
  }
  auto refs = model.state();
  for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].tensor = std::move(best_state[i]);
  return history;
}

TrainHistory train_segmenter(Segmenter& model, const std::vector<BulkSample>& pairs,
                             const TrainHyper& hyper, double validation_fraction,
                             const EpochCallback& on_epoch) {
  if (pairs.empty()) throw InsufficientDataError("segmenter needs at least one training pair");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
  if (pairs.size() == 1) return train_segmenter(model, pairs, pairs, hyper, on_epoch);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(hyper.seed, 0x5A11));
  rng.shuffle(std::span<std::size_t>(order));
  auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(pairs.size()) * validation_fraction));
  n_val = std::clamp<std::size_t>(n_val, 1, pairs.size() - 1);
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::vector<BulkSample> val;
  std::vector<BulkSample> train;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val : train).push_back(pairs[order[i]]);
  }
  return train_segmenter(model, train, val, hyper, on_epoch);
}

}  // namespace graindeck::segmenter
