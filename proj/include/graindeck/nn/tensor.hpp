#pragma once

#include <array>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace graindeck::nn {

// Vectorised kernels pick their code path from the address alignment, which
// changes the summation order. Fixed 64-byte alignment keeps results
// independent of where the allocator happens to place a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense NCHW tensor. Vectors use shape (N, C, 1, 1).
template <typename T>
class Tensor {
 public:
  using Shape = std::array<int, 4>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));

  const Shape& shape() const noexcept { return shape_; }
  int n() const noexcept { return shape_[0]; }
  int c() const noexcept { return shape_[1]; }
  int h() const noexcept { return shape_[2]; }
  int w() const noexcept { return shape_[3]; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(shape_[2]) * shape_[3]; }
  std::size_t sample_size() const noexcept { return plane() * static_cast<std::size_t>(shape_[1]); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T* sample(int i) noexcept { return data_.data() + sample_size() * static_cast<std::size_t>(i); }
  const T* sample(int i) const noexcept {
    return data_.data() + sample_size() * static_cast<std::size_t>(i);
  }

  T& at(int n, int c, int y, int x) noexcept { return data_[index(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const noexcept { return data_[index(n, c, y, x)]; }

  void fill(T value);
  /// Same element count required.
  void reshape(Shape shape);

  Tensor& operator+=(const Tensor& other);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t index(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  Shape shape_{0, 0, 0, 0};
  AlignedVector<T> data_;
};

std::string shape_string(const std::array<int, 4>& shape);

/// A learnable array with its gradient and optimizer state.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> velocity;
  bool weight_decay = true;

  Parameter() = default;
  Parameter(std::string n, typename Tensor<T>::Shape shape, bool decay)
      : name(std::move(n)), value(shape), grad(shape), velocity(shape), weight_decay(decay) {}
};

/// Named reference to persistent state (parameters and running statistics).
template <typename T>
struct StateRef {
  std::string name;
  Tensor<T>* tensor;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace graindeck::nn
