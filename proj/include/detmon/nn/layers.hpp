#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "detmon/tensor.hpp"

// Forward and backward passes of the layers the monitor uses. Backward
// functions accumulate into the supplied gradient buffers.
namespace detmon::nn {

struct ConvGeometry {
  std::int64_t in_channels = 1;
  std::int64_t out_channels = 1;
  std::int64_t kernel = 3;
  std::int64_t stride_h = 1;
  std::int64_t stride_w = 1;
  std::int64_t padding = 0;

  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(out_channels * in_channels * kernel * kernel);
  }

  Shape3 output_shape(const Shape3& in) const {
    const auto oh = (in.height + 2 * padding - kernel);
    const auto ow = (in.width + 2 * padding - kernel);
    if (in.channels != in_channels || oh < 0 || ow < 0 || stride_h < 1 || stride_w < 1)
      throw ShapeError("conv2d: input " + in.str() + " incompatible with " + std::to_string(in_channels) +
                       "-channel kernel " + std::to_string(kernel) + " (padding " + std::to_string(padding) + ")");
    return {out_channels, oh / stride_h + 1, ow / stride_w + 1};
  }
};

// Cross-correlation. weights laid out (out, in, k, k), bias (out).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, std::span<const T> weights, std::span<const T> bias,
                         const ConvGeometry& g) {
  const Shape3 os = g.output_shape(x.shape());
  if (weights.size() != g.weight_count() || bias.size() != static_cast<std::size_t>(g.out_channels))
    throw ShapeError("conv2d: parameter sizes do not match geometry");
  const auto H = x.height(), W = x.width(), K = g.kernel, P = g.padding;
  Tensor<T> out(os);
  for (std::int64_t oc = 0; oc < g.out_channels; ++oc) {
    auto dst = out.channel(oc);
    std::fill(dst.begin(), dst.end(), bias[static_cast<std::size_t>(oc)]);
    for (std::int64_t ic = 0; ic < g.in_channels; ++ic) {
      const auto src = x.channel(ic);
      for (std::int64_t ky = 0; ky < K; ++ky) {
        for (std::int64_t kx = 0; kx < K; ++kx) {
          const T wv = weights[static_cast<std::size_t>(((oc * g.in_channels + ic) * K + ky) * K + kx)];
          for (std::int64_t oy = 0; oy < os.height; ++oy) {
            const auto iy = oy * g.stride_h + ky - P;
            if (iy < 0 || iy >= H) continue;
            T* drow = dst.data() + oy * os.width;
            const T* srow = src.data() + iy * W;
            for (std::int64_t ox = 0; ox < os.width; ++ox) {
              const auto ix = ox * g.stride_w + kx - P;
              if (ix < 0 || ix >= W) continue;
              drow[ox] += wv * srow[ix];
            }
          }
        }
      }
    }
  }
  return out;
}

// grad_x may be null when the input gradient is not needed.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& grad_out, std::span<const T> weights,
                     const ConvGeometry& g, std::span<T> grad_weights, std::span<T> grad_bias,
                     Tensor<T>* grad_x) {
  const Shape3 os = g.output_shape(x.shape());
  if (grad_out.shape() != os) throw ShapeError("conv2d_backward: gradient shape mismatch");
  const auto H = x.height(), W = x.width(), K = g.kernel, P = g.padding;
  if (grad_x && grad_x->shape() != x.shape()) *grad_x = Tensor<T>(x.shape());
  for (std::int64_t oc = 0; oc < g.out_channels; ++oc) {
    const auto go = grad_out.channel(oc);
    T bsum{0};
    for (T v : go) bsum += v;
    grad_bias[static_cast<std::size_t>(oc)] += bsum;
    for (std::int64_t ic = 0; ic < g.in_channels; ++ic) {
      const auto src = x.channel(ic);
      T* gsrc = grad_x ? grad_x->channel(ic).data() : nullptr;
      for (std::int64_t ky = 0; ky < K; ++ky) {
        for (std::int64_t kx = 0; kx < K; ++kx) {
          const auto widx = static_cast<std::size_t>(((oc * g.in_channels + ic) * K + ky) * K + kx);
          const T wv = weights[widx];
          T wsum{0};
          for (std::int64_t oy = 0; oy < os.height; ++oy) {
            const auto iy = oy * g.stride_h + ky - P;
            if (iy < 0 || iy >= H) continue;
            const T* grow = go.data() + oy * os.width;
            const T* srow = src.data() + iy * W;
            T* gxrow = gsrc ? gsrc + iy * W : nullptr;
            for (std::int64_t ox = 0; ox < os.width; ++ox) {
              const auto ix = ox * g.stride_w + kx - P;
              if (ix < 0 || ix >= W) continue;
              wsum += grow[ox] * srow[ix];
              if (gxrow) gxrow[ix] += wv * grow[ox];
            }
          }
          grad_weights[widx] += wsum;
        }
      }
    }
  }
}

template <typename T>
void relu_in_place(std::span<T> v) {
  for (T& x : v) x = x > T{0} ? x : T{0};
}

// Multiplies grad by the ReLU derivative evaluated at the pre-activation.
template <typename T>
void relu_backward(std::span<const T> pre_activation, std::span<T> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(pre_activation[i] > T{0})) grad[i] = T{0};
}

// Global average pool to 1x1, flattened to length c.
template <typename T>
std::vector<T> adaptive_avg_pool(const Tensor<T>& x) {
  std::vector<T> out(static_cast<std::size_t>(x.channels()));
  const T inv = T{1} / static_cast<T>(x.shape().plane());
  for (std::int64_t c = 0; c < x.channels(); ++c) {
    T sum{0};
    for (T v : x.channel(c)) sum += v;
    out[static_cast<std::size_t>(c)] = sum * inv;
  }
  return out;
}

template <typename T>
Tensor<T> adaptive_avg_pool_backward(const Shape3& in_shape, std::span<const T> grad) {
  Tensor<T> gx(in_shape);
  const T inv = T{1} / static_cast<T>(in_shape.plane());
  for (std::int64_t c = 0; c < in_shape.channels; ++c) {
    const T v = grad[static_cast<std::size_t>(c)] * inv;
    for (T& g : gx.channel(c)) g = v;
  }
  return gx;
}

// Channel concatenation a ⊕ b; spatial dims must agree.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw ShapeError("concat: spatial shapes " + a.shape().str() + " and " + b.shape().str() + " differ");
  std::vector<T> data;
  data.reserve(a.size() + b.size());
  data.insert(data.end(), a.values().begin(), a.values().end());
  data.insert(data.end(), b.values().begin(), b.values().end());
  return Tensor<T>(Shape3{a.channels() + b.channels(), a.height(), a.width()}, std::move(data));
}

// y = W x + b with W laid out (out, in).
template <typename T>
std::vector<T> dense_forward(std::span<const T> x, std::span<const T> weights, std::span<const T> bias) {
  const std::size_t out = bias.size(), in = x.size();
  if (weights.size() != out * in) throw ShapeError("dense: weight size does not match input/output widths");
  std::vector<T> y(out);
  for (std::size_t o = 0; o < out; ++o) {
    T acc = bias[o];
    const T* row = weights.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
  return y;
}

// Returns the input gradient.
template <typename T>
std::vector<T> dense_backward(std::span<const T> x, std::span<const T> grad_out, std::span<const T> weights,
                              std::span<T> grad_weights, std::span<T> grad_bias) {
  const std::size_t out = grad_out.size(), in = x.size();
  std::vector<T> gx(in, T{0});
  for (std::size_t o = 0; o < out; ++o) {
    const T g = grad_out[o];
    grad_bias[o] += g;
    const T* row = weights.data() + o * in;
    T* grow = grad_weights.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      grow[i] += g * x[i];
      gx[i] += g * row[i];
    }
  }
  return gx;
}

template <typename T>
T sigmoid(T z) {
  // Single formula so the map is monotone in z under rounding.
  return T{1} / (T{1} + std::exp(-z));
}

// log(1 + exp(z)) without overflow.
template <typename T>
T softplus(T z) {
  return z > T{0} ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace detmon::nn
