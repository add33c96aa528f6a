#pragma once

#include <vector>

#include "graindeck/nn/tensor.hpp"

namespace graindeck::nn {

/// Momentum SGD: v <- mu*v + (g + wd*w); w <- w - lr*v. Weight decay is
/// applied only to parameters flagged for it.
struct SgdMomentum {
  double momentum = 0.9;
  double weight_decay = 5e-4;

  template <typename T>
  void step(const std::vector<Parameter<T>*>& params, double learning_rate) const;
};

/// lr * gamma^floor(epoch / step) (epochs counted from 0); step <= 0
/// disables decay.
double step_decay(double base_lr, int epoch, int step, double gamma);

template <typename T>
void zero_grad(const std::vector<Parameter<T>*>& params);

}  // namespace graindeck::nn
