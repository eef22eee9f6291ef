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

// Dense float tensors and the inference kernels built on them.
//
// All kernels are plain loop nests with a fixed summation order so that two
// calls on equal inputs produce bit-identical outputs. Activations are laid
// out channel-major (C x H x W).

#ifndef LMASK_TENSOR_HPP_
#define LMASK_TENSOR_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lmask {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor chw(std::size_t c, std::size_t h, std::size_t w,
                    float fill = 0.0f) {
    return Tensor({c, h, w}, fill);
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  // CHW accessors; only valid on rank-3 tensors.
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  // Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Bitwise equality (distinguishes +0 from -0, unlike operator==).
bool bit_identical(std::span<const float> a, std::span<const float> b);

struct ConvParams {
  std::size_t out_channels = 1;
  std::size_t in_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool has_bias = false;
};

// floor((n + 2p - k) / s) + 1, or 0 when the window does not fit.
std::size_t conv_output_size(std::size_t n, std::size_t kernel,
                             std::size_t stride, std::size_t padding);

// Cross-correlation with zero padding. Summation order per output cell:
// bias first, then input channel, kernel row, kernel column.
Tensor conv2d(const Tensor& input, const Tensor& weights,
              const std::optional<Tensor>& bias, const ConvParams& attrs);

// Window maximum. Padded cells take the value 0.
Tensor maxpool2d(const Tensor& input, std::size_t kernel, std::size_t stride,
                 std::size_t padding);

Tensor relu(const Tensor& input);

Tensor batchnorm_infer(const Tensor& input, const Tensor& gamma,
                       const Tensor& beta, const Tensor& running_mean,
                       const Tensor& running_var, float eps);

// input (C x H x W) times a 1 x H x W mask broadcast over channels.
Tensor hadamard_broadcast(const Tensor& input, const Tensor& mask);

Tensor add(const Tensor& a, const Tensor& b);

// y = W x + b with W stored out x in.
Tensor linear(const Tensor& x, const Tensor& weights,
              const std::optional<Tensor>& bias);

// Per-channel mean over all H*W cells; returns a rank-1 tensor of length C.
Tensor global_avgpool(const Tensor& input);

// Half-pixel (align_corners = false) bilinear interpolation.
Tensor bilinear_resize(const Tensor& input, std::size_t new_h,
                       std::size_t new_w);

}  // namespace lmask

#endif  // LMASK_TENSOR_HPP_
