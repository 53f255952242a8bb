#include "roiloc/nn/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace roiloc::nn {

GradientCheckReport check_gradients(const Network<double>& network, const Tensor<double>& input,
                                    const Tensor<double>& target, double step,
                                    std::size_t samples_per_tensor, std::uint64_t seed) {
  ForwardCache<double> cache;
  Tensor<double> grad;
  mse_loss(network.forward_train_frozen(input, cache), target, &grad);
  const Gradients<double> analytic = network.backward(cache, grad);

  Network<double> probe = network;
  auto loss_at = [&]() {
    ForwardCache<double> scratch;
    return mse_loss<double>(probe.forward_train_frozen(input, scratch), target, nullptr);
  };

  std::mt19937_64 rng(seed);
  GradientCheckReport report;
  for (std::size_t li = 0; li < probe.params().layers.size(); ++li) {
    for (int which = 0; which < 2; ++which) {
      auto& values = which == 0 ? probe.params().layers[li].weight : probe.params().layers[li].bias;
      const auto& exact = which == 0 ? analytic.layers[li].weight : analytic.layers[li].bias;
      if (values.empty()) continue;
      std::vector<std::size_t> picks(values.size());
      std::iota(picks.begin(), picks.end(), 0);
      if (samples_per_tensor > 0 && picks.size() > samples_per_tensor) {
        std::shuffle(picks.begin(), picks.end(), rng);
        picks.resize(samples_per_tensor);
      }
      for (std::size_t n : picks) {
        const double saved = values[n];
        values[n] = saved + step;
        const double up = loss_at();
        values[n] = saved - step;
        const double down = loss_at();
        values[n] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(numeric), std::abs(exact[n]), 1e-6});
        const double rel = std::abs(numeric - exact[n]) / denom;
        ++report.checked;
        if (rel > report.max_relative_error) {
          report.max_relative_error = rel;
          report.worst_parameter = "L" + std::to_string(li) + (which == 0 ? ".weight[" : ".bias[") +
                                   std::to_string(n) + "]";
        }
      }
    }
  }
  return report;
}

}  // namespace roiloc::nn
