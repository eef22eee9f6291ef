/*
 * Copyright 2026 The lmask Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "lmask/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include "lmask/error.hpp"

namespace lmask {

namespace {

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " +
                     std::to_string(rank) + ", got shape " +
                     shape_to_string(t.shape()));
  }
}

void require_channel_vector(const Tensor& t, std::size_t channels,
                            const char* what) {
  if (t.rank() != 1 || t.dim(0) != channels) {
    throw ShapeError(std::string(what) + ": expected [" +
                     std::to_string(channels) + "], got " +
                     shape_to_string(t.shape()));
  }
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
  }
  if (data_.size() != shape_product(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

bool bit_identical(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(),
                                   a.size() * sizeof(float)) == 0);
}

std::size_t conv_output_size(std::size_t n, std::size_t kernel,
                             std::size_t stride, std::size_t padding) {
  if (stride == 0 || n + 2 * padding < kernel) return 0;
  return (n + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weights,
              const std::optional<Tensor>& bias, const ConvParams& attrs) {
  require_rank(input, 3, "conv2d input");
  const Shape expected_w = {attrs.out_channels, attrs.in_channels, attrs.kernel,
                            attrs.kernel};
  if (weights.shape() != expected_w) {
    throw ShapeError("conv2d weights: expected " +
                     shape_to_string(expected_w) + ", got " +
                     shape_to_string(weights.shape()));
  }
  if (input.dim(0) != attrs.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(0)) +
                     " channels, layer expects " +
                     std::to_string(attrs.in_channels));
  }
  if (attrs.has_bias != bias.has_value()) {
    throw ShapeError("conv2d: bias presence does not match the parameters");
  }
  if (bias) require_channel_vector(*bias, attrs.out_channels, "conv2d bias");

  const std::size_t h = input.dim(1), w = input.dim(2);
  const std::size_t oh = conv_output_size(h, attrs.kernel, attrs.stride,
                                          attrs.padding);
  const std::size_t ow = conv_output_size(w, attrs.kernel, attrs.stride,
                                          attrs.padding);
  if (oh == 0 || ow == 0) {
    throw ShapeError("conv2d: output size < 1 for input " +
                     shape_to_string(input.shape()));
  }

  const std::size_t k = attrs.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(attrs.padding);
  const auto ih = static_cast<std::ptrdiff_t>(h);
  const auto iw = static_cast<std::ptrdiff_t>(w);
  Tensor out = Tensor::chw(attrs.out_channels, oh, ow);
  const float* x = input.data().data();
  const float* wt = weights.data().data();
  float* y = out.data().data();

  for (std::size_t o = 0; o < attrs.out_channels; ++o) {
    const float b = bias ? (*bias)[o] : 0.0f;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * attrs.stride) - pad;
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::ptrdiff_t x0 =
            static_cast<std::ptrdiff_t>(ox * attrs.stride) - pad;
        float acc = b;
        for (std::size_t c = 0; c < attrs.in_channels; ++c) {
          const float* xc = x + c * h * w;
          const float* wc = wt + (o * attrs.in_channels + c) * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = y0 + static_cast<std::ptrdiff_t>(ky);
            if (iy < 0 || iy >= ih) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = x0 + static_cast<std::ptrdiff_t>(kx);
              if (ix < 0 || ix >= iw) continue;
              acc += wc[ky * k + kx] * xc[iy * iw + ix];
            }
          }
        }
        y[(o * oh + oy) * ow + ox] = acc;
      }
    }
  }
  return out;
}

Tensor maxpool2d(const Tensor& input, std::size_t kernel, std::size_t stride,
                 std::size_t padding) {
  require_rank(input, 3, "maxpool2d input");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = conv_output_size(h, kernel, stride, padding);
  const std::size_t ow = conv_output_size(w, kernel, stride, padding);
  if (kernel == 0 || oh == 0 || ow == 0) {
    throw ShapeError("maxpool2d: output size < 1 for input " +
                     shape_to_string(input.shape()));
  }
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  Tensor out = Tensor::chw(c, oh, ow);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * stride) - pad;
        const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * stride) - pad;
        bool any_padded = false;
        bool any_real = false;
        float best = 0.0f;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::ptrdiff_t iy = y0 + static_cast<std::ptrdiff_t>(ky);
            const std::ptrdiff_t ix = x0 + static_cast<std::ptrdiff_t>(kx);
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                ix >= static_cast<std::ptrdiff_t>(w)) {
              any_padded = true;
              continue;
            }
            const float v = input.at(ch, static_cast<std::size_t>(iy),
                                     static_cast<std::size_t>(ix));
            best = any_real ? std::max(best, v) : v;
            any_real = true;
          }
        }
        if (any_padded) best = any_real ? std::max(best, 0.0f) : 0.0f;
        out.at(ch, oy, ox) = best;
      }
    }
  }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor batchnorm_infer(const Tensor& input, const Tensor& gamma,
                       const Tensor& beta, const Tensor& running_mean,
                       const Tensor& running_var, float eps) {
  require_rank(input, 3, "batchnorm input");
  const std::size_t c = input.dim(0);
  require_channel_vector(gamma, c, "batchnorm gamma");
  require_channel_vector(beta, c, "batchnorm beta");
  require_channel_vector(running_mean, c, "batchnorm running_mean");
  require_channel_vector(running_var, c, "batchnorm running_var");
  const std::size_t plane = input.dim(1) * input.dim(2);
  Tensor out = input;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float scale = gamma[ch] / std::sqrt(running_var[ch] + eps);
    const float mean = running_mean[ch];
    const float shift = beta[ch];
    float* p = out.data().data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - mean) * scale + shift;
  }
  return out;
}

Tensor hadamard_broadcast(const Tensor& input, const Tensor& mask) {
  require_rank(input, 3, "hadamard input");
  if (mask.rank() != 3 || mask.dim(0) != 1 || mask.dim(1) != input.dim(1) ||
      mask.dim(2) != input.dim(2)) {
    throw ShapeError("hadamard: mask " + shape_to_string(mask.shape()) +
                     " does not broadcast over " +
                     shape_to_string(input.shape()));
  }
  const std::size_t plane = input.dim(1) * input.dim(2);
  Tensor out = input;
  for (std::size_t ch = 0; ch < input.dim(0); ++ch) {
    float* p = out.data().data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] *= mask[i];
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " differ");
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weights,
              const std::optional<Tensor>& bias) {
  require_rank(weights, 2, "linear weights");
  const std::size_t out_dim = weights.dim(0), in_dim = weights.dim(1);
  if (x.size() != in_dim) {
    throw ShapeError("linear: input length " + std::to_string(x.size()) +
                     " does not match weights " +
                     shape_to_string(weights.shape()));
  }
  if (bias) require_channel_vector(*bias, out_dim, "linear bias");
  Tensor out({out_dim});
  for (std::size_t o = 0; o < out_dim; ++o) {
    float acc = bias ? (*bias)[o] : 0.0f;
    const float* row = weights.data().data() + o * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * x[i];
    out[o] = acc;
  }
  return out;
}

Tensor global_avgpool(const Tensor& input) {
  require_rank(input, 3, "global_avgpool input");
  const std::size_t c = input.dim(0);
  const std::size_t plane = input.dim(1) * input.dim(2);
  Tensor out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* p = input.data().data() + ch * plane;
    float acc = 0.0f;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    out[ch] = acc / static_cast<float>(plane);
  }
  return out;
}

Tensor bilinear_resize(const Tensor& input, std::size_t new_h,
                       std::size_t new_w) {
  require_rank(input, 3, "bilinear_resize input");
  if (new_h == 0 || new_w == 0) {
    throw ShapeError("bilinear_resize: target size must be positive");
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (new_h == h && new_w == w) return input;

  struct Tap {
    std::size_t lo, hi;
    float frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> result(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      const std::size_t hi = std::min(lo + 1, in - 1);
      result[i] = {lo, hi, static_cast<float>(src - static_cast<double>(lo))};
    }
    return result;
  };
  const std::vector<Tap> ty = taps(h, new_h);
  const std::vector<Tap> tx = taps(w, new_w);

  Tensor out = Tensor::chw(c, new_h, new_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < new_h; ++y) {
      for (std::size_t x = 0; x < new_w; ++x) {
        const Tap& a = ty[y];
        const Tap& b = tx[x];
        const float top = input.at(ch, a.lo, b.lo) * (1.0f - b.frac) +
                          input.at(ch, a.lo, b.hi) * b.frac;
        const float bottom = input.at(ch, a.hi, b.lo) * (1.0f - b.frac) +
                             input.at(ch, a.hi, b.hi) * b.frac;
        out.at(ch, y, x) = top * (1.0f - a.frac) + bottom * a.frac;
      }
    }
  }
  return out;
}

}  // namespace lmask
