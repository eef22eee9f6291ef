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

#include "lmask/perturbation.hpp"

#include <charconv>
#include <sstream>
#include <vector>

#include "lmask/error.hpp"

namespace lmask {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) return parts;
    start = pos + 1;
  }
}

float parse_unit(std::string_view s, std::string_view whole) {
  float v = 0.0f;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() ||
      !(v >= 0.0f) || v > 1.0f) {
    throw ValidationError("strategy '" + std::string(whole) +
                          "': color components must be numbers in [0, 1]");
  }
  return v;
}

}  // namespace

Strategy parse_strategy(std::string_view text, const Normalization& norm) {
  Strategy s;
  s.normalization = norm;
  if (text == "blackout") {
    s.kind = StrategyKind::kBlackout;
    return s;
  }
  if (text == "greyout") {
    s.kind = StrategyKind::kGreyout;
    return s;
  }
  if (text == "imagemean") {
    s.kind = StrategyKind::kImageMean;
    return s;
  }
  if (text.starts_with("color:")) {
    const auto parts = split(text.substr(6), ',');
    if (parts.size() != 3) {
      throw ValidationError("strategy '" + std::string(text) +
                            "': expected color:R,G,B");
    }
    s.kind = StrategyKind::kConstantColor;
    for (std::size_t c = 0; c < 3; ++c) s.color[c] = parse_unit(parts[c], text);
    return s;
  }
  const auto parts = split(text, ':');
  if (parts[0] != "layermask") {
    throw ValidationError("unknown strategy '" + std::string(text) + "'");
  }
  s.kind = StrategyKind::kLayerMasking;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string_view opt = parts[i];
    if (opt == "zero") {
      s.masking.padding = PaddingMode::kZero;
    } else if (opt.starts_with("prefix=")) {
      const std::string_view digits = opt.substr(7);
      std::size_t n = 0;
      auto [ptr, ec] =
          std::from_chars(digits.data(), digits.data() + digits.size(), n);
      if (digits.empty() || ec != std::errc() ||
          ptr != digits.data() + digits.size()) {
        throw ValidationError("strategy '" + std::string(text) +
                              "': prefix must be a non-negative integer");
      }
      s.masking.prefix = n;
    } else {
      throw ValidationError("strategy '" + std::string(text) +
                            "': unknown option '" + std::string(opt) + "'");
    }
  }
  return s;
}

std::string to_string(const Strategy& strategy) {
  switch (strategy.kind) {
    case StrategyKind::kBlackout:
      return "blackout";
    case StrategyKind::kGreyout:
      return "greyout";
    case StrategyKind::kImageMean:
      return "imagemean";
    case StrategyKind::kConstantColor: {
      std::ostringstream out;
      out << "color:" << strategy.color[0] << ',' << strategy.color[1] << ','
          << strategy.color[2];
      return out.str();
    }
    case StrategyKind::kLayerMasking:
      return to_string(strategy.masking);
  }
  return "?";
}

Tensor normalize(const Tensor& image01, const Normalization& norm) {
  if (image01.rank() != 3 || image01.dim(0) != 3) {
    throw ShapeError("normalize: expected a 3 x H x W image, got " +
                     shape_to_string(image01.shape()));
  }
  Tensor out = image01;
  const std::size_t plane = image01.dim(1) * image01.dim(2);
  for (std::size_t c = 0; c < 3; ++c) {
    float* p = out.data().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      p[i] = (p[i] - norm.mean[c]) / norm.std[c];
    }
  }
  return out;
}

Tensor apply_pixel_strategy(const Tensor& image01, const Mask& mask,
                            const Strategy& strategy) {
  if (image01.rank() != 3 || image01.dim(0) != 3 ||
      image01.dim(1) != mask.height() || image01.dim(2) != mask.width()) {
    throw ShapeError("apply_pixel_strategy: image " +
                     shape_to_string(image01.shape()) +
                     " does not match mask " +
                     shape_to_string(mask.grid().shape()));
  }
  std::array<float, 3> fill{};
  switch (strategy.kind) {
    case StrategyKind::kBlackout:
      fill = {0.0f, 0.0f, 0.0f};
      break;
    case StrategyKind::kGreyout:
      fill = strategy.normalization.mean;
      break;
    case StrategyKind::kConstantColor:
      fill = strategy.color;
      break;
    case StrategyKind::kImageMean: {
      const std::size_t kept = mask.count();
      if (kept == 0) {
        fill = strategy.normalization.mean;
        break;
      }
      const std::size_t plane = mask.height() * mask.width();
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
          if (mask.grid()[i] != 0.0f) acc += image01[c * plane + i];
        }
        fill[c] = static_cast<float>(acc / static_cast<double>(kept));
      }
      break;
    }
    case StrategyKind::kLayerMasking:
      throw ValidationError(
          "apply_pixel_strategy: layer masking is not a pixel strategy");
  }
  Tensor out = image01;
  const std::size_t plane = mask.height() * mask.width();
  for (std::size_t i = 0; i < plane; ++i) {
    if (mask.grid()[i] != 0.0f) continue;
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = fill[c];
  }
  return out;
}

ForwardResult evaluate(const Model& model, const Tensor& image01,
                       const Mask& mask, const Strategy& strategy) {
  if (strategy.kind == StrategyKind::kLayerMasking) {
    return masked_forward(model.graph, model.weights,
                          normalize(image01, strategy.normalization), mask,
                          strategy.masking);
  }
  return forward(model.graph, model.weights,
                 normalize(apply_pixel_strategy(image01, mask, strategy),
                           strategy.normalization));
}

}  // namespace lmask
