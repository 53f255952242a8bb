#include "roiloc/nn/network.hpp"

#include <cmath>
#include <random>

#include "kernels.hpp"

namespace roiloc::nn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv3d: return "conv3d";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool3d: return "maxpool3d";
    case LayerKind::Dense: return "dense";
    case LayerKind::Softmax: return "softmax";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view text) {
  for (LayerKind k : {LayerKind::Conv3d, LayerKind::BatchNorm, LayerKind::Relu, LayerKind::MaxPool3d,
                      LayerKind::Dense, LayerKind::Softmax}) {
    if (to_string(k) == text) return k;
  }
  throw Error("unknown layer kind '" + std::string(text) + "'");
}

std::string_view to_string(Head head) { return head == Head::Navigation ? "navigation" : "bbox"; }

Head head_from_string(std::string_view text) {
  if (text == "navigation") return Head::Navigation;
  if (text == "bbox") return Head::BBox;
  throw Error("unknown network head '" + std::string(text) + "'");
}

NetworkSpec make_network_spec(int arch_id, Head head, const Index3& input_shape,
                              const std::array<int, 3>& widths) {
  if (arch_id < 1 || arch_id > 3) throw Error("architecture id must be 1, 2 or 3");
  for (int w : widths) {
    if (w < 1) throw Error("channel widths must be >= 1");
  }
  for (int a = 0; a < 3; ++a) {
    if (input_shape[a] < 2) throw Error("network input shape components must be >= 2");
    if (arch_id == 2 && input_shape[a] < 4) {
      throw Error("input shape too small for the pooling stack of architecture 2");
    }
  }

  NetworkSpec spec;
  spec.arch_id = arch_id;
  spec.head = head;
  spec.input_shape = input_shape;
  spec.channel_widths = widths;
  spec.output_size = head == Head::Navigation ? kNavigationOutputs : kBBoxOutputs;

  auto& L = spec.layers;
  auto conv_block = [&L](int k, int in, int out) {
    L.push_back({LayerKind::Conv3d, k, in, out});
    L.push_back({LayerKind::BatchNorm, 0, out, out});
    L.push_back({LayerKind::Relu});
  };
  auto pool = [&L] { L.push_back({LayerKind::MaxPool3d}); };

  Index3 spatial = input_shape;
  int channels = 1;
  switch (arch_id) {
    case 1:
      conv_block(7, 1, widths[0]);
      conv_block(5, widths[0], widths[1]);
      conv_block(3, widths[1], widths[2]);
      break;
    case 2:
      conv_block(7, 1, widths[0]);
      conv_block(7, widths[0], widths[0]);
      pool();
      conv_block(5, widths[0], widths[1]);
      conv_block(5, widths[1], widths[1]);
      pool();
      conv_block(3, widths[1], widths[2]);
      conv_block(3, widths[2], widths[2]);
      for (int& s : spatial) s = s / 2 / 2;
      break;
    case 3:
      L.push_back({LayerKind::Conv3d, 9, 1, widths[0]});
      L.push_back({LayerKind::BatchNorm, 0, widths[0], widths[0]});
      conv_block(7, widths[0], widths[0]);
      conv_block(5, widths[0], widths[1]);
      conv_block(3, widths[1], widths[2]);
      break;
  }
  channels = widths[2];
  const int features = spatial[0] * spatial[1] * spatial[2] * channels;
  L.push_back({LayerKind::Dense, 0, features, spec.output_size});
  L.push_back({head == Head::Navigation ? LayerKind::Softmax : LayerKind::Relu});
  return spec;
}

template <typename T>
Network<T>::Network(NetworkSpec spec, Params<T> params) : spec_(std::move(spec)), params_(std::move(params)) {
  if (params_.layers.size() != spec_.layers.size()) throw Error("parameter/layer count mismatch");
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const auto& p = params_.layers[i];
    std::size_t w = 0, b = 0, r = 0;
    switch (l.kind) {
      case LayerKind::Conv3d:
        w = static_cast<std::size_t>(l.kernel) * l.kernel * l.kernel * l.in * l.out;
        b = l.out;
        break;
      case LayerKind::BatchNorm:
        w = b = r = l.in;
        break;
      case LayerKind::Dense:
        w = static_cast<std::size_t>(l.in) * l.out;
        b = l.out;
        break;
      default:
        break;
    }
    if (p.weight.size() != w || p.bias.size() != b || p.running_mean.size() != r || p.running_var.size() != r) {
      throw Error("parameter shape mismatch at layer " + std::to_string(i));
    }
  }
}

template <typename T>
Network<T> Network<T>::build(const NetworkSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Params<T> params;
  params.layers.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    auto& p = params.layers[i];
    switch (l.kind) {
      case LayerKind::Conv3d: {
        const std::size_t fan_in = static_cast<std::size_t>(l.kernel) * l.kernel * l.kernel * l.in;
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
        p.weight.resize(fan_in * l.out);
        for (T& v : p.weight) v = static_cast<T>(sd * normal(rng));
        p.bias.assign(l.out, T(0));
        break;
      }
      case LayerKind::BatchNorm:
        p.weight.assign(l.in, T(1));
        p.bias.assign(l.in, T(0));
        p.running_mean.assign(l.in, T(0));
        p.running_var.assign(l.in, T(1));
        break;
      case LayerKind::Dense: {
        // The bbox regression starts near its bias instead of +-0.7 around it.
        const double gain = spec.head == Head::BBox ? 0.1 : 1.0;
        const double sd = gain * std::sqrt(1.0 / static_cast<double>(l.in));
        p.weight.resize(static_cast<std::size_t>(l.in) * l.out);
        for (T& v : p.weight) v = static_cast<T>(sd * normal(rng));
        // Bbox outputs pass through a relu; a positive bias keeps them alive at start.
        p.bias.assign(l.out, spec.head == Head::BBox ? T(0.3) : T(0));
        break;
      }
      default:
        break;
    }
  }
  return Network<T>(spec, std::move(params));
}

template <typename T>
void Network<T>::check_input(const Tensor<T>& input) const {
  const auto& s = spec_.input_shape;
  if (input.shape.size() != 5 || input.shape[1] != s[2] || input.shape[2] != s[1] || input.shape[3] != s[0] ||
      input.shape[4] != 1 || input.shape[0] < 1) {
    throw Error("network input shape mismatch");
  }
}

namespace {

kernels::Shape5 shape5(const std::vector<int>& s) { return {s[0], s[1], s[2], s[3], s[4]}; }

}  // namespace

template <typename T>
Tensor<T> Network<T>::run(const Tensor<T>& input, Mode mode, ForwardCache<T>* cache,
                          Params<T>* running_update) const {
  check_input(input);
  const int B = input.batch();
  if (cache != nullptr) {
    cache->activations.clear();
    cache->activations.reserve(spec_.layers.size() + 1);
    cache->activations.push_back(input);
    cache->norm_stats.assign(spec_.layers.size(), {});
    cache->argmax.assign(spec_.layers.size(), {});
  }
  Tensor<T> cur = input;
  std::vector<double> batch_var;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const auto& p = params_.layers[i];
    Tensor<T> next;
    switch (l.kind) {
      case LayerKind::Conv3d: {
        const auto s = shape5(cur.shape);
        next = Tensor<T>({s.b, s.d, s.h, s.w, l.out});
        kernels::conv3d_forward(cur.data.data(), s, p.weight.data(), p.bias.data(), l.kernel, l.out,
                                next.data.data());
        break;
      }
      case LayerKind::BatchNorm: {
        next = Tensor<T>(cur.shape);
        const std::size_t rows = cur.data.size() / l.in;
        if (mode == Mode::Train) {
          std::vector<T> stats(2 * static_cast<std::size_t>(l.in));
          kernels::batchnorm_train_forward(cur.data.data(), rows, l.in, p.weight.data(), p.bias.data(),
                                           kBatchNormEps, next.data.data(), stats.data(), batch_var);
          if (running_update != nullptr) {
            auto& r = running_update->layers[i];
            const double m = kBatchNormMomentum;
            for (int c = 0; c < l.in; ++c) {
              r.running_mean[c] = static_cast<T>((1 - m) * r.running_mean[c] + m * stats[c]);
              r.running_var[c] = static_cast<T>((1 - m) * r.running_var[c] + m * batch_var[c]);
            }
          }
          if (cache != nullptr) cache->norm_stats[i] = std::move(stats);
        } else {
          kernels::batchnorm_infer_forward(cur.data.data(), rows, l.in, p.weight.data(), p.bias.data(),
                                           p.running_mean.data(), p.running_var.data(), kBatchNormEps,
                                           next.data.data());
        }
        break;
      }
      case LayerKind::Relu:
        next = cur;
        for (T& v : next.data) v = v > T(0) ? v : T(0);
        break;
      case LayerKind::MaxPool3d: {
        const auto s = shape5(cur.shape);
        next = Tensor<T>({s.b, s.d / 2, s.h / 2, s.w / 2, s.c});
        std::int32_t* arg = nullptr;
        if (cache != nullptr) {
          cache->argmax[i].resize(next.data.size());
          arg = cache->argmax[i].data();
        }
        kernels::maxpool2_forward(cur.data.data(), s, next.data.data(), arg);
        break;
      }
      case LayerKind::Dense:
        if (static_cast<int>(cur.sample_size()) != l.in) throw Error("dense input size mismatch");
        next = Tensor<T>({B, l.out});
        kernels::dense_forward(cur.data.data(), B, l.in, l.out, p.weight.data(), p.bias.data(), next.data.data());
        break;
      case LayerKind::Softmax: {
        const int n = static_cast<int>(cur.sample_size());
        next = Tensor<T>({B, n});
        kernels::softmax_forward(cur.data.data(), B, n, next.data.data());
        break;
      }
    }
    if (cache != nullptr) cache->activations.push_back(next);
    cur = std::move(next);
  }
  return cur;
}

template <typename T>
Tensor<T> Network<T>::infer(const Tensor<T>& input) const {
  return run(input, Mode::Infer, nullptr, nullptr);
}

template <typename T>
Tensor<T> Network<T>::forward_train(const Tensor<T>& input, ForwardCache<T>& cache) {
  return run(input, Mode::Train, &cache, &params_);
}

template <typename T>
Tensor<T> Network<T>::forward_train_frozen(const Tensor<T>& input, ForwardCache<T>& cache) const {
  return run(input, Mode::Train, &cache, nullptr);
}

template <typename T>
Gradients<T> Network<T>::zero_gradients() const {
  Gradients<T> g;
  g.layers.resize(params_.layers.size());
  for (std::size_t i = 0; i < params_.layers.size(); ++i) {
    g.layers[i].weight.assign(params_.layers[i].weight.size(), T(0));
    g.layers[i].bias.assign(params_.layers[i].bias.size(), T(0));
  }
  return g;
}

template <typename T>
Gradients<T> Network<T>::backward(const ForwardCache<T>& cache, const Tensor<T>& output_grad) const {
  if (!cache.valid() || cache.activations.size() != spec_.layers.size() + 1) {
    throw Error("backward requires the cache of a train-mode forward");
  }
  if (output_grad.data.size() != cache.activations.back().data.size()) {
    throw Error("output gradient shape mismatch");
  }
  Gradients<T> grads = zero_gradients();
  Tensor<T> grad = output_grad;
  for (std::size_t li = spec_.layers.size(); li-- > 0;) {
    const LayerSpec& l = spec_.layers[li];
    const auto& p = params_.layers[li];
    auto& g = grads.layers[li];
    const Tensor<T>& in = cache.activations[li];
    const Tensor<T>& out = cache.activations[li + 1];
    const bool need_input_grad = li > 0;
    Tensor<T> gin(in.shape);
    T* gx = need_input_grad ? gin.data.data() : nullptr;
    const int B = in.batch();
    switch (l.kind) {
      case LayerKind::Conv3d:
        kernels::conv3d_backward(in.data.data(), shape5(in.shape), p.weight.data(), l.kernel, l.out,
                                 grad.data.data(), gx, g.weight.data(), g.bias.data());
        break;
      case LayerKind::BatchNorm:
        if (cache.norm_stats[li].empty()) throw Error("batchnorm statistics missing from cache");
        kernels::batchnorm_backward(in.data.data(), in.data.size() / l.in, l.in, p.weight.data(),
                                    cache.norm_stats[li].data(), grad.data.data(), gx, g.weight.data(),
                                    g.bias.data());
        break;
      case LayerKind::Relu:
        if (gx != nullptr)
          for (std::size_t n = 0; n < in.data.size(); ++n) gx[n] = in.data[n] > T(0) ? grad.data[n] : T(0);
        break;
      case LayerKind::MaxPool3d:
        if (gx != nullptr) {
          const auto& arg = cache.argmax[li];
          for (std::size_t n = 0; n < arg.size(); ++n) gx[arg[n]] += grad.data[n];
        }
        break;
      case LayerKind::Dense:
        kernels::dense_backward(in.data.data(), B, l.in, l.out, p.weight.data(), grad.data.data(), gx,
                                g.weight.data(), g.bias.data());
        break;
      case LayerKind::Softmax:
        if (gx != nullptr) {
          kernels::softmax_backward(out.data.data(), B, static_cast<int>(out.sample_size()), grad.data.data(), gx);
        }
        break;
    }
    if (!need_input_grad) break;
    grad = std::move(gin);
  }
  return grads;
}

template <typename T>
T mse_loss(const Tensor<T>& output, const Tensor<T>& target, Tensor<T>* grad) {
  if (output.data.size() != target.data.size()) throw Error("loss target shape mismatch");
  const double n = static_cast<double>(output.data.size());
  double sum = 0.0;
  if (grad != nullptr) *grad = Tensor<T>(output.shape);
  for (std::size_t i = 0; i < output.data.size(); ++i) {
    const double d = static_cast<double>(output.data[i]) - target.data[i];
    sum += d * d;
    if (grad != nullptr) grad->data[i] = static_cast<T>(2.0 * d / n);
  }
  return static_cast<T>(sum / n);
}

template class Network<float>;
template class Network<double>;
template float mse_loss<float>(const Tensor<float>&, const Tensor<float>&, Tensor<float>*);
template double mse_loss<double>(const Tensor<double>&, const Tensor<double>&, Tensor<double>*);

}  // namespace roiloc::nn
