#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "roiloc/box.hpp"
#include "roiloc/nn/tensor.hpp"

namespace roiloc::nn {

enum class LayerKind { Conv3d, BatchNorm, Relu, MaxPool3d, Dense, Softmax };
std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view text);

/// `in`/`out` are channel counts for conv, the channel count (in) for
/// batchnorm, and feature counts for dense. Convs use stride 1 and zero
/// "same" padding; pooling is 2x2x2 with stride 2.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int kernel = 0;
  int in = 0;
  int out = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class Head { Navigation, BBox };
std::string_view to_string(Head head);
Head head_from_string(std::string_view text);

inline constexpr int kNavigationOutputs = 19;
/// Three normalized sizes followed by the predicted IOU.
inline constexpr int kBBoxOutputs = 4;

struct NetworkSpec {
  int arch_id = 1;
  Head head = Head::Navigation;
  Index3 input_shape{12, 12, 12};  // x, y, z
  std::array<int, 3> channel_widths{16, 32, 32};
  std::vector<LayerSpec> layers;
  int output_size = kNavigationOutputs;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Layer stacks:
///   arch 1: conv7 bn relu, conv5 bn relu, conv3 bn relu, dense, head
///   arch 2: conv7 x2, pool, conv5 x2, pool, conv3 x2 (each conv + bn relu), dense, head
///   arch 3: conv9 bn, then the arch 1 stack
/// Navigation heads end in a 19-way softmax, bbox heads in a relu over 4 outputs.
NetworkSpec make_network_spec(int arch_id, Head head, const Index3& input_shape,
                              const std::array<int, 3>& channel_widths = {16, 32, 32});

template <typename T>
struct LayerParams {
  std::vector<T> weight;  // conv [kz][ky][kx][in][out], dense [in][out], batchnorm gamma
  std::vector<T> bias;    // conv/dense bias, batchnorm beta
  std::vector<T> running_mean;
  std::vector<T> running_var;
};

/// One entry per layer; parameter-free layers hold empty vectors.
template <typename T>
struct Params {
  std::vector<LayerParams<T>> layers;

  /// Calls fn(name, span) for every trainable tensor, in a fixed order.
  template <typename Fn>
  void for_each_trainable(Fn&& fn) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (!layers[i].weight.empty()) fn("L" + std::to_string(i) + ".weight", std::span<T>(layers[i].weight));
      if (!layers[i].bias.empty()) fn("L" + std::to_string(i) + ".bias", std::span<T>(layers[i].bias));
    }
  }
  template <typename Fn>
  void for_each_trainable(Fn&& fn) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (!layers[i].weight.empty()) fn("L" + std::to_string(i) + ".weight", std::span<const T>(layers[i].weight));
      if (!layers[i].bias.empty()) fn("L" + std::to_string(i) + ".bias", std::span<const T>(layers[i].bias));
    }
  }
};

/// Gradients mirror the trainable part of Params one-to-one.
template <typename T>
using Gradients = Params<T>;

enum class Mode { Train, Infer };

template <typename T>
struct ForwardCache {
  std::vector<Tensor<T>> activations;              // activations[i] is the input of layer i
  std::vector<std::vector<T>> norm_stats;          // batchnorm: mean then inverse std per channel
  std::vector<std::vector<std::int32_t>> argmax;   // maxpool: input offset per output element
  bool valid() const { return !activations.empty(); }
};

template <typename T>
class Network {
 public:
  Network() = default;
  Network(NetworkSpec spec, Params<T> params);

  /// Fan-in scaled normal initialization from a seeded generator.
  static Network build(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  Params<T>& params() { return params_; }
  const Params<T>& params() const { return params_; }

  /// Infer mode: batchnorm uses running statistics; per-sample results do not
  /// depend on the batch.
  Tensor<T> infer(const Tensor<T>& input) const;

  /// Train mode: batch statistics, running statistics updated, activations cached.
  Tensor<T> forward_train(const Tensor<T>& input, ForwardCache<T>& cache);

  /// Same as forward_train but leaves running statistics untouched.
  Tensor<T> forward_train_frozen(const Tensor<T>& input, ForwardCache<T>& cache) const;

  Gradients<T> backward(const ForwardCache<T>& cache, const Tensor<T>& output_grad) const;

  Gradients<T> zero_gradients() const;

  template <typename U>
  Network<U> cast() const {
    Params<U> out;
    out.layers.resize(params_.layers.size());
    auto conv = [](const std::vector<T>& v) { return std::vector<U>(v.begin(), v.end()); };
    for (std::size_t i = 0; i < params_.layers.size(); ++i) {
      out.layers[i].weight = conv(params_.layers[i].weight);
      out.layers[i].bias = conv(params_.layers[i].bias);
      out.layers[i].running_mean = conv(params_.layers[i].running_mean);
      out.layers[i].running_var = conv(params_.layers[i].running_var);
    }
    return Network<U>(spec_, std::move(out));
  }

  static constexpr double kBatchNormEps = 1e-5;
  static constexpr double kBatchNormMomentum = 0.1;

 private:
  Tensor<T> run(const Tensor<T>& input, Mode mode, ForwardCache<T>* cache, Params<T>* running_update) const;
  void check_input(const Tensor<T>& input) const;

  NetworkSpec spec_;
  Params<T> params_;
};

/// Mean squared error over every element; writes d(loss)/d(output) into `grad`.
template <typename T>
T mse_loss(const Tensor<T>& output, const Tensor<T>& target, Tensor<T>* grad);

extern template class Network<float>;
extern template class Network<double>;
extern template float mse_loss<float>(const Tensor<float>&, const Tensor<float>&, Tensor<float>*);
extern template double mse_loss<double>(const Tensor<double>&, const Tensor<double>&, Tensor<double>*);

}  // namespace roiloc::nn
