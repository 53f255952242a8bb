#pragma once

// Layer kernels over channels-last tensors [batch, z, y, x, channel].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace roiloc::nn::kernels {

struct Shape5 {
  int b, d, h, w, c;
  std::size_t spatial() const { return static_cast<std::size_t>(d) * h * w; }
};

// Taps along one axis for output coordinate `pos`: [lo, hi) kernel offsets
// whose input coordinate lies inside [0, extent).
inline void tap_range(int pos, int extent, int k, int& lo, int& hi) {
  const int pad = k / 2;
  lo = std::max(0, pad - pos);
  hi = std::min(k, extent + pad - pos);
}

// Accumulates one output voxel over every in-bounds tap. kOut > 0 fixes the
// output channel count at compile time so the channel loop vectorizes; `acc`
// then holds 4 x kOut partial sums, otherwise O plain sums.
template <typename T, int kOut>
inline void conv3d_accumulate(const T* x, Shape5 s, const T* w, int k, int O, int b, int z, int yy, int xx,
                              T* acc) {
  const int C = s.c;
  const int pad = k / 2;
  int kz0, kz1, ky0, ky1, kx0, kx1;
  tap_range(z, s.d, k, kz0, kz1);
  tap_range(yy, s.h, k, ky0, ky1);
  tap_range(xx, s.w, k, kx0, kx1);
  const int run = (kx1 - kx0) * C;
  for (int kz = kz0; kz < kz1; ++kz) {
    const int iz = z + kz - pad;
    for (int ky = ky0; ky < ky1; ++ky) {
      const int iy = yy + ky - pad;
      const T* xs = x + ((((static_cast<std::size_t>(b) * s.d + iz) * s.h + iy) * s.w) + (xx + kx0 - pad)) * C;
      const T* ws = w + ((static_cast<std::size_t>(kz * k + ky) * k + kx0) * C) * O;
      if constexpr (kOut > 0) {
        // Four independent partial sums hide the FMA latency chain.
        T (&part)[4][kOut] = *reinterpret_cast<T(*)[4][kOut]>(acc);
        int j = 0;
        for (; j + 4 <= run; j += 4) {
          for (int u = 0; u < 4; ++u) {
            const T v = xs[j + u];
            const T* wj = ws + static_cast<std::size_t>(j + u) * kOut;
            for (int o = 0; o < kOut; ++o) part[u][o] += v * wj[o];
          }
        }
        for (; j < run; ++j) {
          const T v = xs[j];
          const T* wj = ws + static_cast<std::size_t>(j) * kOut;
          for (int o = 0; o < kOut; ++o) part[0][o] += v * wj[o];
        }
      } else {
        for (int j = 0; j < run; ++j) {
          const T v = xs[j];
          const T* wj = ws + static_cast<std::size_t>(j) * O;
          for (int o = 0; o < O; ++o) acc[o] += v * wj[o];
        }
      }
    }
  }
}

template <typename T, int kOut>
void conv3d_forward_fixed(const T* x, Shape5 s, const T* w, const T* bias, int k, int out_dyn, T* y) {
  const int O = kOut > 0 ? kOut : out_dyn;
  std::vector<T> dyn(kOut > 0 ? 0 : O);
  for (int b = 0; b < s.b; ++b) {
    for (int z = 0; z < s.d; ++z) {
      for (int yy = 0; yy < s.h; ++yy) {
        for (int xx = 0; xx < s.w; ++xx) {
          T* out = y + ((((static_cast<std::size_t>(b) * s.d + z) * s.h + yy) * s.w) + xx) * O;
          if constexpr (kOut > 0) {
            T part[4][kOut] = {};
            conv3d_accumulate<T, kOut>(x, s, w, k, kOut, b, z, yy, xx, &part[0][0]);
            for (int o = 0; o < kOut; ++o) out[o] = bias[o] + (part[0][o] + part[1][o]) + (part[2][o] + part[3][o]);
          } else {
            std::copy(bias, bias + O, dyn.begin());
            conv3d_accumulate<T, 0>(x, s, w, k, O, b, z, yy, xx, dyn.data());
            std::copy(dyn.begin(), dyn.end(), out);
          }
        }
      }
    }
  }
}

// Weight and bias gradients only; the input gradient is a separate
// transposed convolution (see conv3d_backward).
template <typename T, int kOut>
void conv3d_weight_grad_fixed(const T* x, Shape5 s, int k, int out_dyn, const T* gy, T* gw, T* gb) {
  const int O = kOut > 0 ? kOut : out_dyn;
  const int C = s.c;
  const int pad = k / 2;
  for (int b = 0; b < s.b; ++b) {
    for (int z = 0; z < s.d; ++z) {
      int kz0, kz1;
      tap_range(z, s.d, k, kz0, kz1);
      for (int yy = 0; yy < s.h; ++yy) {
        int ky0, ky1;
        tap_range(yy, s.h, k, ky0, ky1);
        for (int xx = 0; xx < s.w; ++xx) {
          int kx0, kx1;
          tap_range(xx, s.w, k, kx0, kx1);
          const T* g = gy + ((((static_cast<std::size_t>(b) * s.d + z) * s.h + yy) * s.w) + xx) * O;
          for (int o = 0; o < O; ++o) gb[o] += g[o];
          const int run = (kx1 - kx0) * C;
          for (int kz = kz0; kz < kz1; ++kz) {
            const int iz = z + kz - pad;
            for (int ky = ky0; ky < ky1; ++ky) {
              const int iy = yy + ky - pad;
              const T* xs =
                  x + ((((static_cast<std::size_t>(b) * s.d + iz) * s.h + iy) * s.w) + (xx + kx0 - pad)) * C;
              T* gws = gw + ((static_cast<std::size_t>(kz * k + ky) * k + kx0) * C) * O;
              if constexpr (kOut > 0) {
                T grow[kOut];
                for (int o = 0; o < kOut; ++o) grow[o] = g[o];
                for (int j = 0; j < run; ++j) {
                  const T v = xs[j];
                  T* gwj = gws + static_cast<std::size_t>(j) * kOut;
                  for (int o = 0; o < kOut; ++o) gwj[o] += v * grow[o];
                }
              } else {
                for (int j = 0; j < run; ++j) {
                  const T v = xs[j];
                  T* gwj = gws + static_cast<std::size_t>(j) * O;
                  for (int o = 0; o < O; ++o) gwj[o] += v * g[o];
                }
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3d_forward(const T* x, Shape5 s, const T* w, const T* bias, int k, int out, T* y) {
  switch (out) {
    case 4: return conv3d_forward_fixed<T, 4>(x, s, w, bias, k, out, y);
    case 8: return conv3d_forward_fixed<T, 8>(x, s, w, bias, k, out, y);
    case 16: return conv3d_forward_fixed<T, 16>(x, s, w, bias, k, out, y);
    case 32: return conv3d_forward_fixed<T, 32>(x, s, w, bias, k, out, y);
    default: return conv3d_forward_fixed<T, 0>(x, s, w, bias, k, out, y);
  }
}

template <typename T>
void conv3d_weight_grad(const T* x, Shape5 s, int k, int out, const T* gy, T* gw, T* gb) {
  switch (out) {
    case 4: return conv3d_weight_grad_fixed<T, 4>(x, s, k, out, gy, gw, gb);
    case 8: return conv3d_weight_grad_fixed<T, 8>(x, s, k, out, gy, gw, gb);
    case 16: return conv3d_weight_grad_fixed<T, 16>(x, s, k, out, gy, gw, gb);
    case 32: return conv3d_weight_grad_fixed<T, 32>(x, s, k, out, gy, gw, gb);
    default: return conv3d_weight_grad_fixed<T, 0>(x, s, k, out, gy, gw, gb);
  }
}

// With odd kernels and symmetric "same" padding, the input gradient is a
// forward convolution of the output gradient with the spatially flipped,
// channel-transposed kernel.
template <typename T>
void conv3d_input_grad(Shape5 s, const T* w, int k, int out, const T* gy, T* gx) {
  const int C = s.c;
  const std::size_t taps = static_cast<std::size_t>(k) * k * k;
  std::vector<T> flipped(taps * C * out);
  for (std::size_t t = 0; t < taps; ++t) {
    const std::size_t src = taps - 1 - t;
    for (int c = 0; c < C; ++c)
      for (int o = 0; o < out; ++o) flipped[(t * out + o) * C + c] = w[(src * C + c) * out + o];
  }
  const std::vector<T> zero(C, T(0));
  conv3d_forward(gy, Shape5{s.b, s.d, s.h, s.w, out}, flipped.data(), zero.data(), k, C, gx);
}

template <typename T>
void conv3d_backward(const T* x, Shape5 s, const T* w, int k, int out, const T* gy, T* gx, T* gw, T* gb) {
  conv3d_weight_grad(x, s, k, out, gy, gw, gb);
  if (gx != nullptr) conv3d_input_grad(s, w, k, out, gy, gx);
}

// Batch statistics over (batch x spatial) per channel. Writes mean then
// inverse std into `stats` (2 * C values) and the biased variance into `var`.
template <typename T>
void batchnorm_train_forward(const T* x, std::size_t rows, int C, const T* gamma, const T* beta,
                             double eps, T* y, T* stats, std::vector<double>& var) {
  std::vector<double> mean(C, 0.0);
  var.assign(C, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c) mean[c] += x[r * C + c];
  for (int c = 0; c < C; ++c) mean[c] /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c) {
      const double d = x[r * C + c] - mean[c];
      var[c] += d * d;
    }
  for (int c = 0; c < C; ++c) {
    var[c] /= static_cast<double>(rows);
    stats[c] = static_cast<T>(mean[c]);
    stats[C + c] = static_cast<T>(1.0 / std::sqrt(var[c] + eps));
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c)
      y[r * C + c] = gamma[c] * (x[r * C + c] - stats[c]) * stats[C + c] + beta[c];
}

template <typename T>
void batchnorm_infer_forward(const T* x, std::size_t rows, int C, const T* gamma, const T* beta,
                             const T* running_mean, const T* running_var, double eps, T* y) {
  std::vector<T> scale(C), shift(C);
  for (int c = 0; c < C; ++c) {
    const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps));
    scale[c] = gamma[c] * inv;
    shift[c] = beta[c] - running_mean[c] * scale[c];
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c) y[r * C + c] = x[r * C + c] * scale[c] + shift[c];
}

template <typename T>
void batchnorm_backward(const T* x, std::size_t rows, int C, const T* gamma, const T* stats, const T* gy,
                        T* gx, T* ggamma, T* gbeta) {
  std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c) {
      const double xhat = (x[r * C + c] - stats[c]) * stats[C + c];
      sum_g[c] += gy[r * C + c];
      sum_gx[c] += gy[r * C + c] * xhat;
    }
  for (int c = 0; c < C; ++c) {
    ggamma[c] += static_cast<T>(sum_gx[c]);
    gbeta[c] += static_cast<T>(sum_g[c]);
  }
  if (gx == nullptr) return;
  const double n = static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c) {
      const double xhat = (x[r * C + c] - stats[c]) * stats[C + c];
      const double dxhat_sum = n * gy[r * C + c] - sum_g[c] - xhat * sum_gx[c];
      gx[r * C + c] = static_cast<T>(gamma[c] * stats[C + c] / n * dxhat_sum);
    }
}

template <typename T>
void maxpool2_forward(const T* x, Shape5 s, T* y, std::int32_t* argmax) {
  const int od = s.d / 2, oh = s.h / 2, ow = s.w / 2;
  std::size_t n = 0;
  for (int b = 0; b < s.b; ++b)
    for (int z = 0; z < od; ++z)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx)
          for (int c = 0; c < s.c; ++c, ++n) {
            T best = -std::numeric_limits<T>::infinity();
            std::int32_t best_at = -1;
            for (int dz = 0; dz < 2; ++dz)
              for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                  const auto at = static_cast<std::int32_t>(
                      ((((static_cast<std::size_t>(b) * s.d + 2 * z + dz) * s.h + 2 * yy + dy) * s.w) +
                       2 * xx + dx) * s.c + c);
                  if (x[at] > best || best_at < 0) {
                    best = x[at];
                    best_at = at;
                  }
                }
            y[n] = best;
            if (argmax != nullptr) argmax[n] = best_at;
          }
}

template <typename T>
void dense_forward(const T* x, int batch, int in, int out, const T* w, const T* bias, T* y) {
  std::vector<T> acc(out);
  for (int b = 0; b < batch; ++b) {
    std::copy(bias, bias + out, acc.begin());
    const T* xs = x + static_cast<std::size_t>(b) * in;
    for (int i = 0; i < in; ++i) {
      const T v = xs[i];
      const T* wi = w + static_cast<std::size_t>(i) * out;
      for (int o = 0; o < out; ++o) acc[o] += v * wi[o];
    }
    std::copy(acc.begin(), acc.end(), y + static_cast<std::size_t>(b) * out);
  }
}

template <typename T>
void dense_backward(const T* x, int batch, int in, int out, const T* w, const T* gy, T* gx, T* gw, T* gb) {
  for (int b = 0; b < batch; ++b) {
    const T* xs = x + static_cast<std::size_t>(b) * in;
    const T* g = gy + static_cast<std::size_t>(b) * out;
    for (int o = 0; o < out; ++o) gb[o] += g[o];
    for (int i = 0; i < in; ++i) {
      const T v = xs[i];
      const T* wi = w + static_cast<std::size_t>(i) * out;
      T* gwi = gw + static_cast<std::size_t>(i) * out;
      T sum = T(0);
      for (int o = 0; o < out; ++o) {
        gwi[o] += v * g[o];
        sum += wi[o] * g[o];
      }
      if (gx != nullptr) gx[static_cast<std::size_t>(b) * in + i] = sum;
    }
  }
}

template <typename T>
void softmax_forward(const T* x, int batch, int n, T* y) {
  for (int b = 0; b < batch; ++b) {
    const T* xs = x + static_cast<std::size_t>(b) * n;
    T* ys = y + static_cast<std::size_t>(b) * n;
    const T mx = *std::max_element(xs, xs + n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      ys[i] = static_cast<T>(std::exp(static_cast<double>(xs[i] - mx)));
      sum += ys[i];
    }
    for (int i = 0; i < n; ++i) ys[i] = static_cast<T>(ys[i] / sum);
  }
}

template <typename T>
void softmax_backward(const T* y, int batch, int n, const T* gy, T* gx) {
  for (int b = 0; b < batch; ++b) {
    const T* ys = y + static_cast<std::size_t>(b) * n;
    const T* g = gy + static_cast<std::size_t>(b) * n;
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += static_cast<double>(ys[i]) * g[i];
    for (int i = 0; i < n; ++i) gx[static_cast<std::size_t>(b) * n + i] = static_cast<T>(ys[i] * (g[i] - dot));
  }
}

}  // namespace roiloc::nn::kernels
