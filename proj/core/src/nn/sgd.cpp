#include "roiloc/nn/sgd.hpp"

#include <cmath>

namespace roiloc::nn {

template <typename T>
void SgdMomentum<T>::step(Params<T>& params, const Gradients<T>& grads) {
  if (grads.layers.size() != params.layers.size()) throw Error("gradient/parameter layer count mismatch");
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    if (grads.layers[i].weight.size() != params.layers[i].weight.size() ||
        grads.layers[i].bias.size() != params.layers[i].bias.size()) {
      throw Error("gradient shape mismatch at layer " + std::to_string(i));
    }
    for (const auto* v : {&grads.layers[i].weight, &grads.layers[i].bias}) {
      for (T g : *v) {
        if (!std::isfinite(static_cast<double>(g))) {
          throw Error("non-finite gradient at layer " + std::to_string(i));
        }
      }
    }
  }
  if (velocity_.layers.size() != params.layers.size()) {
    velocity_.layers.assign(params.layers.size(), {});
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
      velocity_.layers[i].weight.assign(params.layers[i].weight.size(), T(0));
      velocity_.layers[i].bias.assign(params.layers[i].bias.size(), T(0));
    }
  }
  const T lr = static_cast<T>(lr_);
  const T mu = static_cast<T>(momentum_);
  auto update = [lr, mu](std::vector<T>& p, std::vector<T>& v, const std::vector<T>& g) {
    for (std::size_t n = 0; n < p.size(); ++n) {
      v[n] = mu * v[n] + g[n];
      p[n] -= lr * v[n];
    }
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, velocity_.layers[i].weight, grads.layers[i].weight);
    update(params.layers[i].bias, velocity_.layers[i].bias, grads.layers[i].bias);
  }
}

template class SgdMomentum<float>;
template class SgdMomentum<double>;

}  // namespace roiloc::nn
