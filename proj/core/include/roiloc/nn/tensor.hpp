#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "roiloc/error.hpp"
#include "roiloc/volume.hpp"

namespace roiloc::nn {

/// Dense row-major buffer. Spatial activations use [batch, z, y, x, channel].
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, T fill = T(0))
      : shape(std::move(dims)),
        data(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), fill) {}

  int batch() const { return shape.empty() ? 0 : shape.front(); }
  std::size_t sample_size() const { return shape.empty() ? 0 : data.size() / shape.front(); }

  std::span<T> sample(int b) { return {data.data() + b * sample_size(), sample_size()}; }
  std::span<const T> sample(int b) const { return {data.data() + b * sample_size(), sample_size()}; }
};

/// Stacks patches into a [batch, z, y, x, 1] tensor.
template <typename T>
Tensor<T> stack_patches(std::span<const Patch* const> patches) {
  if (patches.empty()) throw Error("cannot stack an empty patch list");
  const Index3 shape = patches.front()->shape;
  Tensor<T> out({static_cast<int>(patches.size()), shape[2], shape[1], shape[0], 1});
  T* dst = out.data.data();
  for (const Patch* p : patches) {
    if (p->shape != shape) throw Error("patch shape mismatch within a batch");
    for (float v : p->values) *dst++ = static_cast<T>(v);
  }
  return out;
}

template <typename T>
Tensor<T> stack_patches(std::initializer_list<const Patch*> patches) {
  return stack_patches<T>(std::span<const Patch* const>(patches.begin(), patches.size()));
}

}  // namespace roiloc::nn
