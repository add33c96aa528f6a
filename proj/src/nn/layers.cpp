#include "graindeck/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "graindeck/error.hpp"

namespace graindeck::nn {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using MapConstMat = Eigen::Map<const Mat<T>>;
template <typename T>
using MapVec = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using MapConstVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
void init_normal(Tensor<T>& t, double stddev, Rng& rng) {
  for (T& v : t.values()) v = static_cast<T>(rng.normal() * stddev);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
                  int padding, bool bias, Rng& rng)
    : in_(in_channels),
      out_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding),
      has_bias_(bias),
      weight_(name + ".weight", {out_channels, in_channels, kernel, kernel}, true),
      bias_(name + ".bias", {1, bias ? out_channels : 0, 1, 1}, false) {
  require(in_channels > 0 && out_channels > 0 && kernel > 0 && stride > 0 && padding >= 0,
          "invalid convolution geometry for " + name);
  init_normal(weight_.value, std::sqrt(2.0 / (in_channels * kernel * kernel)), rng);
}

template <typename T>
typename Tensor<T>::Shape Conv2d<T>::output_shape(const typename Tensor<T>::Shape& in) const {
  const int oh = (in[2] + 2 * pad_ - k_) / stride_ + 1;
  const int ow = (in[3] + 2 * pad_ - k_) / stride_ + 1;
  return {in[0], out_, oh, ow};
}

template <typename T>
void Conv2d<T>::im2col(const T* src, int h, int w, int oh, int ow, T* col) const {
  for (int c = 0; c < in_; ++c) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        T* row = col + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          T* dst = row + static_cast<std::size_t>(oy) * ow;
          const int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* line = src + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            dst[ox] = (ix >= 0 && ix < w) ? line[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void Conv2d<T>::col2im(const T* col, int h, int w, int oh, int ow, T* dst) const {
  for (int c = 0; c < in_; ++c) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * ow;
          T* line = dst + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            if (ix >= 0 && ix < w) line[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  Tensor<T> y = apply(x);
  input_ = x;
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::apply(const Tensor<T>& x) const {
  require(x.c() == in_, weight_.name + ": expected " + std::to_string(in_) + " input channels, got " +
                            std::to_string(x.c()));
  const auto os = output_shape(x.shape());
  require(os[2] > 0 && os[3] > 0, weight_.name + ": input too small");
  Tensor<T> y(os);
  const int K = in_ * k_ * k_;
  const int P = os[2] * os[3];
  MapConstMat<T> W(weight_.value.data(), out_, K);
  AlignedVector<T> col;
  if (!pointwise()) col.resize(static_cast<std::size_t>(K) * P);
  for (int n = 0; n < x.n(); ++n) {
    const T* colp = x.sample(n);
    if (!pointwise()) {
      im2col(x.sample(n), x.h(), x.w(), os[2], os[3], col.data());
      colp = col.data();
    }
    MapConstMat<T> C(colp, K, P);
    MapMat<T> Y(y.sample(n), out_, P);
    Y.noalias() = W * C;
    if (has_bias_) Y.colwise() += MapConstVec<T>(bias_.value.data(), out_);
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy) {
  const auto& x = input_;
  const auto os = output_shape(x.shape());
  require(dy.shape() == os, weight_.name + ": gradient shape mismatch");
  const int K = in_ * k_ * k_;
  const int P = os[2] * os[3];
  Tensor<T> dx(x.shape());
  MapConstMat<T> W(weight_.value.data(), out_, K);
  MapMat<T> dW(weight_.grad.data(), out_, K);
  AlignedVector<T> col;
  AlignedVector<T> dcol;
  if (!pointwise()) {
    col.resize(static_cast<std::size_t>(K) * P);
    dcol.resize(static_cast<std::size_t>(K) * P);
  }
  for (int n = 0; n < x.n(); ++n) {
    MapConstMat<T> dY(dy.sample(n), out_, P);
    const T* colp = x.sample(n);
    if (!pointwise()) {
      im2col(x.sample(n), x.h(), x.w(), os[2], os[3], col.data());
      colp = col.data();
    }
    MapConstMat<T> C(colp, K, P);
    dW.noalias() += dY * C.transpose();
    if (has_bias_) MapVec<T>(bias_.grad.data(), out_) += dY.rowwise().sum();
    if (pointwise()) {
      MapMat<T>(dx.sample(n), in_, P).noalias() = W.transpose() * dY;
    } else {
      MapMat<T>(dcol.data(), K, P).noalias() = W.transpose() * dY;
      col2im(dcol.data(), x.h(), x.w(), os[2], os[3], dx.sample(n));
    }
  }
  return dx;
}

template <typename T>
void Conv2d<T>::collect(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

template <typename T>
void Conv2d<T>::collect_state(std::vector<StateRef<T>>& out) {
  out.push_back({weight_.name, &weight_.value});
  if (has_bias_) out.push_back({bias_.name, &bias_.value});
}

// ---------------------------------------------------------------------------
// BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name, int channels)
    : channels_(channels),
      name_(name),
      gamma_(name + ".gamma", {1, channels, 1, 1}, false),
      beta_(name + ".beta", {1, channels, 1, 1}, false),
      running_mean_({1, channels, 1, 1}, T(0)),
      running_var_({1, channels, 1, 1}, T(1)) {
  require(channels > 0, "batch norm needs channels");
  gamma_.value.fill(T(1));
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, bool training) {
  require(x.c() == channels_, name_ + ": channel mismatch");
  training_ = training;
  const int N = x.n();
  const std::size_t plane = x.plane();
  const double M = static_cast<double>(N) * static_cast<double>(plane);
  Tensor<T> y(x.shape());
  xhat_ = Tensor<T>(x.shape());
  inv_std_.assign(static_cast<std::size_t>(channels_), T(0));
  for (int c = 0; c < channels_; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (training) {
      for (int n = 0; n < N; ++n) {
        const T* p = x.sample(n) + plane * c;
        for (std::size_t i = 0; i < plane; ++i) mean += p[i];
      }
      mean /= M;
      for (int n = 0; n < N; ++n) {
        const T* p = x.sample(n) + plane * c;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mean;
          var += d * d;
        }
      }
      var /= M;
      T* rm = running_mean_.data() + c;
      T* rv = running_var_.data() + c;
      const double unbiased = M > 1 ? var * M / (M - 1) : var;
      *rm = static_cast<T>((1 - kMomentum) * *rm + kMomentum * mean);
      *rv = static_cast<T>((1 - kMomentum) * *rv + kMomentum * unbiased);
    } else {
      mean = running_mean_.data()[c];
      var = running_var_.data()[c];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + kEpsilon));
    inv_std_[static_cast<std::size_t>(c)] = inv;
    const T g = gamma_.value.data()[c];
    const T b = beta_.value.data()[c];
    const T m = static_cast<T>(mean);
    for (int n = 0; n < N; ++n) {
      const T* p = x.sample(n) + plane * c;
      T* xh = xhat_.sample(n) + plane * c;
      T* q = y.sample(n) + plane * c;
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (p[i] - m) * inv;
        q[i] = g * xh[i] + b;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::apply(const Tensor<T>& x) const {
  require(x.c() == channels_, name_ + ": channel mismatch");
  Tensor<T> y(x.shape());
  const std::size_t plane = x.plane();
  for (int c = 0; c < channels_; ++c) {
    const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_.data()[c]) + kEpsilon));
    const T scale = gamma_.value.data()[c] * inv;
    const T shift = beta_.value.data()[c] - running_mean_.data()[c] * scale;
    for (int n = 0; n < x.n(); ++n) {
      const T* p = x.sample(n) + plane * c;
      T* q = y.sample(n) + plane * c;
      for (std::size_t i = 0; i < plane; ++i) q[i] = p[i] * scale + shift;
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& dy) {
  require(dy.shape() == xhat_.shape(), name_ + ": gradient shape mismatch");
  const int N = dy.n();
  const std::size_t plane = dy.plane();
  const double M = static_cast<double>(N) * static_cast<double>(plane);
  Tensor<T> dx(dy.shape());
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < N; ++n) {
      const T* g = dy.sample(n) + plane * c;
      const T* xh = xhat_.sample(n) + plane * c;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += static_cast<double>(g[i]) * xh[i];
      }
    }
    gamma_.grad.data()[c] += static_cast<T>(sum_dy_xhat);
    beta_.grad.data()[c] += static_cast<T>(sum_dy);
    const T gamma = gamma_.value.data()[c];
    const T inv = inv_std_[static_cast<std::size_t>(c)];
    for (int n = 0; n < N; ++n) {
      const T* g = dy.sample(n) + plane * c;
      const T* xh = xhat_.sample(n) + plane * c;
      T* d = dx.sample(n) + plane * c;
      if (training_) {
        const T scale = static_cast<T>(gamma * inv / M);
        const T mdy = static_cast<T>(sum_dy);
        const T mdx = static_cast<T>(sum_dy_xhat);
        for (std::size_t i = 0; i < plane; ++i) {
          d[i] = scale * (static_cast<T>(M) * g[i] - mdy - xh[i] * mdx);
        }
      } else {
        for (std::size_t i = 0; i < plane; ++i) d[i] = g[i] * gamma * inv;
      }
    }
  }
  return dx;
}

template <typename T>
void BatchNorm2d<T>::collect(std::vector<Parameter<T>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

template <typename T>
void BatchNorm2d<T>::collect_state(std::vector<StateRef<T>>& out) {
  out.push_back({gamma_.name, &gamma_.value});
  out.push_back({beta_.name, &beta_.value});
  out.push_back({name_ + ".running_mean", &running_mean_});
  out.push_back({name_ + ".running_var", &running_var_});
}

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  active_.resize(x.size());
  const T* src = x.data();
  T* dst = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool on = src[i] > T(0);
    active_[i] = on;
    dst[i] = on ? src[i] : T(0);
  }
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::apply(const Tensor<T>& x) const {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = std::max(x.data()[i], T(0));
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& dy) {
  require(dy.size() == active_.size(), "relu: gradient shape mismatch");
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data()[i] = active_[i] ? dy.data()[i] : T(0);
  return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x) {
  require(x.h() % 2 == 0 && x.w() % 2 == 0, "max pool needs even spatial dimensions");
  in_shape_ = x.shape();
  const int oh = x.h() / 2;
  const int ow = x.w() / 2;
  Tensor<T> y({x.n(), x.c(), oh, ow});
  argmax_.resize(y.size());
  std::size_t k = 0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * x.c() + c) * x.plane();
      const T* p = x.data() + base;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++k) {
          std::uint32_t best = static_cast<std::uint32_t>((2 * oy) * x.w() + 2 * ox);
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const auto idx = static_cast<std::uint32_t>((2 * oy + dy) * x.w() + 2 * ox + dx);
              if (p[idx] > p[best]) best = idx;
            }
          }
          argmax_[k] = best;
          y.data()[k] = p[best];
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::apply(const Tensor<T>& x) const {
  require(x.h() % 2 == 0 && x.w() % 2 == 0, "max pool needs even spatial dimensions");
  const int oh = x.h() / 2;
  const int ow = x.w() / 2;
  Tensor<T> y({x.n(), x.c(), oh, ow});
  std::size_t k = 0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const T* p = x.data() + (static_cast<std::size_t>(n) * x.c() + c) * x.plane();
      for (int oy = 0; oy < oh; ++oy) {
        const T* r0 = p + static_cast<std::size_t>(2 * oy) * x.w();
        const T* r1 = r0 + x.w();
        for (int ox = 0; ox < ow; ++ox, ++k) {
          y.data()[k] = std::max(std::max(r0[2 * ox], r0[2 * ox + 1]),
                                 std::max(r1[2 * ox], r1[2 * ox + 1]));
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& dy) {
  require(dy.size() == argmax_.size(), "max pool: gradient shape mismatch");
  Tensor<T> dx(in_shape_);
  const std::size_t in_plane = static_cast<std::size_t>(in_shape_[2]) * in_shape_[3];
  const std::size_t out_plane = dy.plane();
  for (std::size_t k = 0; k < dy.size(); ++k) {
    const std::size_t map = k / out_plane;
    dx.data()[map * in_plane + argmax_[k]] += dy.data()[k];
  }
  return dx;
}

// ---------------------------------------------------------------------------
// ConvTranspose2x2

template <typename T>
ConvTranspose2x2<T>::ConvTranspose2x2(std::string name, int in_channels, int out_channels, Rng& rng)
    : in_(in_channels),
      out_(out_channels),
      weight_(name + ".weight", {in_channels, out_channels, 2, 2}, true),
      bias_(name + ".bias", {1, out_channels, 1, 1}, false) {
  require(in_channels > 0 && out_channels > 0, "invalid transposed convolution " + name);
  init_normal(weight_.value, std::sqrt(1.0 / in_channels), rng);
}

template <typename T>
Tensor<T> ConvTranspose2x2<T>::forward(const Tensor<T>& x) {
  Tensor<T> y = apply(x);
  input_ = x;
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2x2<T>::apply(const Tensor<T>& x) const {
  require(x.c() == in_, weight_.name + ": channel mismatch");
  const int h = x.h();
  const int w = x.w();
  const int P = h * w;
  Tensor<T> y({x.n(), out_, 2 * h, 2 * w});
  MapConstMat<T> W(weight_.value.data(), in_, out_ * 4);
  Mat<T> cols(out_ * 4, P);
  for (int n = 0; n < x.n(); ++n) {
    MapConstMat<T> X(x.sample(n), in_, P);
    cols.noalias() = W.transpose() * X;
    for (int o = 0; o < out_; ++o) {
      const T b = bias_.value.data()[o];
      for (int ky = 0; ky < 2; ++ky) {
        for (int kx = 0; kx < 2; ++kx) {
          const auto* row = cols.data() + static_cast<std::size_t>((o * 2 + ky) * 2 + kx) * P;
          for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) y.at(n, o, 2 * i + ky, 2 * j + kx) = row[i * w + j] + b;
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2x2<T>::backward(const Tensor<T>& dy) {
  const auto& x = input_;
  const int h = x.h();
  const int w = x.w();
  const int P = h * w;
  require(dy.c() == out_ && dy.h() == 2 * h && dy.w() == 2 * w && dy.n() == x.n(),
          weight_.name + ": gradient shape mismatch");
  Tensor<T> dx(x.shape());
  MapConstMat<T> W(weight_.value.data(), in_, out_ * 4);
  MapMat<T> dW(weight_.grad.data(), in_, out_ * 4);
  Mat<T> cols(out_ * 4, P);
  for (int n = 0; n < x.n(); ++n) {
    for (int o = 0; o < out_; ++o) {
      T bsum = 0;
      for (int ky = 0; ky < 2; ++ky) {
        for (int kx = 0; kx < 2; ++kx) {
          auto* row = cols.data() + static_cast<std::size_t>((o * 2 + ky) * 2 + kx) * P;
          for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
              const T g = dy.at(n, o, 2 * i + ky, 2 * j + kx);
              row[i * w + j] = g;
              bsum += g;
            }
          }
        }
      }
      bias_.grad.data()[o] += bsum;
    }
    MapConstMat<T> X(x.sample(n), in_, P);
    dW.noalias() += X * cols.transpose();
    MapMat<T>(dx.sample(n), in_, P).noalias() = W * cols;
  }
  return dx;
}

template <typename T>
void ConvTranspose2x2<T>::collect(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
void ConvTranspose2x2<T>::collect_state(std::vector<StateRef<T>>& out) {
  out.push_back({weight_.name, &weight_.value});
  out.push_back({bias_.name, &bias_.value});
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x) {
  in_shape_ = x.shape();
  return apply(x);
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::apply(const Tensor<T>& x) const {
  Tensor<T> y({x.n(), x.c(), 1, 1});
  const std::size_t plane = x.plane();
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const T* p = x.sample(n) + plane * c;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      y.at(n, c, 0, 0) = static_cast<T>(s / static_cast<double>(plane));
    }
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx(in_shape_);
  const std::size_t plane = dx.plane();
  const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
  for (int n = 0; n < dx.n(); ++n) {
    for (int c = 0; c < dx.c(); ++c) {
      const T g = dy.at(n, c, 0, 0) * inv;
      T* p = dx.sample(n) + plane * c;
      std::fill(p, p + plane, g);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(std::string name, int in_features, int out_features, Rng& rng)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", {out_features, in_features, 1, 1}, true),
      bias_(name + ".bias", {1, out_features, 1, 1}, false) {
  require(in_features > 0 && out_features > 0, "invalid linear layer " + name);
  init_normal(weight_.value, std::sqrt(1.0 / in_features), rng);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  Tensor<T> y = apply(x);
  input_ = x;
  return y;
}

template <typename T>
Tensor<T> Linear<T>::apply(const Tensor<T>& x) const {
  require(static_cast<int>(x.sample_size()) == in_, weight_.name + ": feature mismatch");
  Tensor<T> y({x.n(), out_, 1, 1});
  MapConstMat<T> X(x.data(), x.n(), in_);
  MapConstMat<T> W(weight_.value.data(), out_, in_);
  MapMat<T> Y(y.data(), x.n(), out_);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += MapConstVec<T>(bias_.value.data(), out_).transpose();
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& dy) {
  const int N = input_.n();
  require(dy.n() == N && static_cast<int>(dy.sample_size()) == out_,
          weight_.name + ": gradient shape mismatch");
  Tensor<T> dx(input_.shape());
  MapConstMat<T> X(input_.data(), N, in_);
  MapConstMat<T> dY(dy.data(), N, out_);
  MapConstMat<T> W(weight_.value.data(), out_, in_);
  MapMat<T>(weight_.grad.data(), out_, in_).noalias() += dY.transpose() * X;
  MapVec<T>(bias_.grad.data(), out_) += dY.colwise().sum().transpose();
  MapMat<T>(dx.data(), N, in_).noalias() = dY * W;
  return dx;
}

template <typename T>
void Linear<T>::collect(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
void Linear<T>::collect_state(std::vector<StateRef<T>>& out) {
  out.push_back({weight_.name, &weight_.value});
  out.push_back({bias_.name, &bias_.value});
}

// ---------------------------------------------------------------------------
// Channel concat

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
          "concat shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor<T> y({a.n(), a.c() + b.c(), a.h(), a.w()});
  for (int n = 0; n < a.n(); ++n) {
    std::copy(a.sample(n), a.sample(n) + a.sample_size(), y.sample(n));
    std::copy(b.sample(n), b.sample(n) + b.sample_size(), y.sample(n) + a.sample_size());
  }
  return y;
}

template <typename T>
void split_channels(const Tensor<T>& x, int channels_a, Tensor<T>& a, Tensor<T>& b) {
  require(channels_a > 0 && channels_a < x.c(), "split channel count out of range");
  a = Tensor<T>({x.n(), channels_a, x.h(), x.w()});
  b = Tensor<T>({x.n(), x.c() - channels_a, x.h(), x.w()});
  for (int n = 0; n < x.n(); ++n) {
    const T* src = x.sample(n);
    std::copy(src, src + a.sample_size(), a.sample(n));
    std::copy(src + a.sample_size(), src + x.sample_size(), b.sample(n));
  }
}

#define GRAINDECK_INSTANTIATE(T)                                                          \
  template class Conv2d<T>;                                                               \
  template class BatchNorm2d<T>;                                                          \
  template class ReLU<T>;                                                                 \
  template class MaxPool2<T>;                                                             \
  template class ConvTranspose2x2<T>;                                                     \
  template class GlobalAvgPool<T>;                                                        \
  template class Linear<T>;                                                               \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);              \
  template void split_channels<T>(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);

GRAINDECK_INSTANTIATE(float)
GRAINDECK_INSTANTIATE(double)

#undef GRAINDECK_INSTANTIATE

}  // namespace graindeck::nn
