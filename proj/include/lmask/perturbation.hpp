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

// Masking strategies behind one evaluate() entry point.
//
// Pixel strategies overwrite masked pixels of the [0, 1] image before
// normalization and then run the plain network. Layer masking normalizes the
// untouched image and runs the masked network.

#ifndef LMASK_PERTURBATION_HPP_
#define LMASK_PERTURBATION_HPP_

#include <array>
#include <string>
#include <string_view>

#include "lmask/graph.hpp"
#include "lmask/masking.hpp"

namespace lmask {

struct Normalization {
  std::array<float, 3> mean = {0.485f, 0.456f, 0.406f};
  std::array<float, 3> std = {0.229f, 0.224f, 0.225f};
};

enum class StrategyKind {
  kBlackout,
  kGreyout,
  kConstantColor,
  kImageMean,
  kLayerMasking,
};

struct Strategy {
  StrategyKind kind = StrategyKind::kLayerMasking;
  std::array<float, 3> color = {0.0f, 0.0f, 0.0f};  // kConstantColor only
  MaskingConfig masking;                             // kLayerMasking only
  Normalization normalization;
};

// Grammar: blackout | greyout | color:R,G,B | imagemean |
//          layermask[:zero][:prefix=N]
// Throws ValidationError on anything else or colors outside [0, 1].
Strategy parse_strategy(std::string_view text, const Normalization& norm = {});
std::string to_string(const Strategy& strategy);

// (x - mean) / std per channel.
Tensor normalize(const Tensor& image01, const Normalization& norm);

// Throws ValidationError for kLayerMasking.
Tensor apply_pixel_strategy(const Tensor& image01, const Mask& mask,
                            const Strategy& strategy);

ForwardResult evaluate(const Model& model, const Tensor& image01,
                       const Mask& mask, const Strategy& strategy);

}  // namespace lmask

#endif  // LMASK_PERTURBATION_HPP_
