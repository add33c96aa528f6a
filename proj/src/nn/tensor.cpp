#include "graindeck/nn/tensor.hpp"

#include <algorithm>

#include "graindeck/error.hpp"

namespace graindeck::nn {

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape) {
  std::size_t count = 1;
  for (int d : shape) {
    if (d < 0) throw ConfigError("negative tensor dimension");
    count *= static_cast<std::size_t>(d);
  }
  data_.assign(count, fill);
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
void Tensor<T>::reshape(Shape shape) {
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  if (count != data_.size()) {
    throw ConfigError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = shape;
}

template <typename T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ConfigError("tensor add shape mismatch " + shape_string(shape_) + " vs " +
                      shape_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

std::string shape_string(const std::array<int, 4>& shape) {
  return "(" + std::to_string(shape[0]) + "," + std::to_string(shape[1]) + "," +
         std::to_string(shape[2]) + "," + std::to_string(shape[3]) + ")";
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace graindeck::nn
