#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>
#include <vector>

#include "graindeck/image.hpp"
#include "graindeck/nn/tensor.hpp"
#include "graindeck/rng.hpp"

namespace graindeck::testing {

/// Directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("graindeck-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Image random_image(Rng& rng, int h, int w) {
  Image img(h, w);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.index(256));
  return img;
}

inline Mask random_mask(Rng& rng, int h, int w, double density) {
  Mask m(h, w);
  for (auto& v : m.data()) v = rng.bernoulli(density) ? 1 : 0;
  return m;
}

template <typename T>
nn::Tensor<T> random_tensor(Rng& rng, const typename nn::Tensor<T>::Shape& shape, double scale = 1.0) {
  nn::Tensor<T> t(shape);
  for (T& v : t.values()) v = static_cast<T>(rng.normal() * scale);
  return t;
}

struct GradCheck {
  int checked = 0;
  double max_rel_error = 0.0;
};

/// Compares analytic gradients (already accumulated into each parameter's
/// grad by the caller) with central differences of `loss`.
/// Relative error = |a - n| / max(|a|, |n|, floor).
inline GradCheck check_gradients(const std::vector<nn::Parameter<double>*>& params,
                                 const std::function<double()>& loss, int max_checks, Rng& rng,
                                 double step = 1e-6, double floor = 1e-6) {
  std::vector<std::pair<nn::Parameter<double>*, std::size_t>> all;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) all.emplace_back(p, i);
  }
  rng.shuffle(std::span(all));
  if (static_cast<int>(all.size()) > max_checks) all.resize(static_cast<std::size_t>(max_checks));
  GradCheck out;
  for (auto& [p, i] : all) {
    double& w = p->value.data()[i];
    const double saved = w;
    w = saved + step;
    const double up = loss();
    w = saved - step;
    const double down = loss();
    w = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = p->grad.data()[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
    ++out.checked;
  }
  return out;
}

}  // namespace graindeck::testing
