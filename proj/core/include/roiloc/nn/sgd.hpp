#pragma once

#include "roiloc/nn/network.hpp"

namespace roiloc::nn {

/// Classic momentum: v <- momentum * v + g; p <- p - lr * v.
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}

  /// Throws roiloc::Error on non-finite gradients; parameters are then untouched.
  void step(Params<T>& params, const Gradients<T>& grads);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_;
  double momentum_;
  Gradients<T> velocity_;
};

extern template class SgdMomentum<float>;
extern template class SgdMomentum<double>;

}  // namespace roiloc::nn
