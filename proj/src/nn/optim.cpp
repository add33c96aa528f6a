#include "graindeck/nn/optim.hpp"

#include <cmath>

namespace graindeck::nn {

template <typename T>
void SgdMomentum::step(const std::vector<Parameter<T>*>& params, double learning_rate) const {
  const T mu = static_cast<T>(momentum);
  const T lr = static_cast<T>(learning_rate);
  for (Parameter<T>* p : params) {
    const T wd = p->weight_decay ? static_cast<T>(weight_decay) : T(0);
    T* w = p->value.data();
    T* v = p->velocity.data();
    const T* g = p->grad.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      v[i] = mu * v[i] + (g[i] + wd * w[i]);
      w[i] -= lr * v[i];
    }
  }
}

double step_decay(double base_lr, int epoch, int step, double gamma) {
  if (step <= 0) return base_lr;
  return base_lr * std::pow(gamma, epoch / step);
}

template <typename T>
void zero_grad(const std::vector<Parameter<T>*>& params) {
  for (Parameter<T>* p : params) p->grad.fill(T(0));
}

template void SgdMomentum::step<float>(const std::vector<Parameter<float>*>&, double) const;
template void SgdMomentum::step<double>(const std::vector<Parameter<double>*>&, double) const;
template void zero_grad<float>(const std::vector<Parameter<float>*>&);
template void zero_grad<double>(const std::vector<Parameter<double>*>&);

}  // namespace graindeck::nn
