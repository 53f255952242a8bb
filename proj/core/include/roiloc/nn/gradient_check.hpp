#pragma once

#include <cstdint>
#include <string>

#include "roiloc/nn/network.hpp"

namespace roiloc::nn {

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Compares backward() against central finite differences of the MSE loss in
/// train mode (batch statistics, running statistics untouched). At most
/// `samples_per_tensor` randomly chosen entries of each trainable tensor are
/// perturbed; 0 checks every entry.
GradientCheckReport check_gradients(const Network<double>& network, const Tensor<double>& input,
                                    const Tensor<double>& target, double step = 1e-4,
                                    std::size_t samples_per_tensor = 0, std::uint64_t seed = 7);

}  // namespace roiloc::nn
