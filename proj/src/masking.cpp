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

#include "lmask/masking.hpp"

#include <algorithm>
#include <cmath>

#include "lmask/error.hpp"

namespace lmask {

namespace {

constexpr float kPadEpsilon = 1e-8f;

void require_mask_fits(const Tensor& value, const Mask& mask,
                       const char* what) {
  if (value.rank() != 3 || value.dim(1) != mask.height() ||
      value.dim(2) != mask.width()) {
    throw ShapeError(std::string(what) + ": mask " +
                     shape_to_string(mask.grid().shape()) +
                     " does not match activation " +
                     shape_to_string(value.shape()));
  }
}

// 3x3 all-ones correlation with zero padding on one H x W plane.
void box_sum3(const float* in, float* out, std::size_t h, std::size_t w) {
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int dy = -1; dy <= 1; ++dy) {
        const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
        if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
          acc += in[static_cast<std::size_t>(yy) * w +
                    static_cast<std::size_t>(xx)];
        }
      }
      out[y * w + x] = acc;
    }
  }
}

std::size_t layer_kernel(const LayerDef& layer) {
  if (layer.op == OpKind::kConv) return std::get<ConvParams>(layer.params).kernel;
  return std::get<PoolParams>(layer.params).kernel;
}

std::size_t layer_stride(const LayerDef& layer) {
  if (layer.op == OpKind::kConv) return std::get<ConvParams>(layer.params).stride;
  return std::get<PoolParams>(layer.params).stride;
}

std::size_t layer_padding(const LayerDef& layer) {
  if (layer.op == OpKind::kConv) {
    return std::get<ConvParams>(layer.params).padding;
  }
  return std::get<PoolParams>(layer.params).padding;
}

bool is_spatial(OpKind op) { return op == OpKind::kConv || op == OpKind::kMaxPool; }

bool is_elementwise(OpKind op) {
  return op == OpKind::kRelu || op == OpKind::kBatchNorm;
}

Tensor run_plain(const LayerDef& layer, const WeightStore& weights,
                 const Tensor& in) {
  const Tensor* ins[] = {&in};
  return apply_layer(layer, weights, ins);
}

}  // namespace

Mask::Mask(Tensor grid) : grid_(std::move(grid)) {
  if (grid_.rank() != 3 || grid_.dim(0) != 1) {
    throw ShapeError("mask must be 1 x H x W, got " +
                     shape_to_string(grid_.shape()));
  }
  for (float v : grid_.data()) {
    if (v != 0.0f && v != 1.0f) {
      throw ValidationError("mask entries must be exactly 0 or 1");
    }
  }
}

Mask Mask::ones(std::size_t h, std::size_t w) {
  return Mask(Tensor::chw(1, h, w, 1.0f));
}

Mask Mask::zeros(std::size_t h, std::size_t w) {
  return Mask(Tensor::chw(1, h, w, 0.0f));
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(
      std::count(grid_.data().begin(), grid_.data().end(), 1.0f));
}

Mask intersect(const Mask& a, const Mask& b) {
  if (a.grid().shape() != b.grid().shape()) {
    throw ShapeError("mask intersection: shapes " +
                     shape_to_string(a.grid().shape()) + " and " +
                     shape_to_string(b.grid().shape()) + " differ");
  }
  Tensor g = a.grid();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= b.grid()[i];
  return Mask(std::move(g));
}

Tensor apply_mask(const Tensor& value, const Mask& mask) {
  require_mask_fits(value, mask, "apply_mask");
  const std::size_t plane = mask.height() * mask.width();
  const float* m = mask.grid().data().data();
  Tensor out = value;
  for (std::size_t c = 0; c < value.dim(0); ++c) {
    float* p = out.data().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (m[i] == 0.0f) p[i] = 0.0f;
    }
  }
  return out;
}

std::string to_string(const MaskingConfig& config) {
  std::string s = "layermask";
  if (config.padding == PaddingMode::kZero) s += ":zero";
  if (config.prefix) s += ":prefix=" + std::to_string(*config.prefix);
  return s;
}

std::vector<PadStep> neighbor_pad_trace(const Tensor& x, const Mask& mask,
                                        std::size_t k) {
  require_mask_fits(x, mask, "neighbor_pad");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t plane = h * w;

  std::vector<PadStep> steps;
  steps.reserve(k + 1);
  steps.push_back({apply_mask(x, mask), mask});

  Tensor value = steps.back().value;
  Tensor m = mask.grid();
  std::vector<float> numer(plane), denom(plane);
  for (std::size_t round = 0; round < k; ++round) {
    box_sum3(m.data().data(), denom.data(), h, w);
    Tensor next = value;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* src = value.data().data() + ch * plane;
      float* dst = next.data().data() + ch * plane;
      box_sum3(src, numer.data(), h, w);
      for (std::size_t i = 0; i < plane; ++i) {
        if (m[i] == 0.0f) dst[i] = src[i] + numer[i] / (denom[i] + kPadEpsilon);
      }
    }
    value = std::move(next);
    for (std::size_t i = 0; i < plane; ++i) {
      m[i] = std::min(1.0f, m[i] + denom[i]);
    }
    steps.push_back({value, Mask(m)});
  }
  return steps;
}

Tensor neighbor_pad(const Tensor& x, const Mask& mask, std::size_t k) {
  return std::move(neighbor_pad_trace(x, mask, k).back().value);
}

bool is_maskable(const ModelGraph& graph, std::size_t node) {
  const OpKind op = graph.layer(node).op;
  if (!is_spatial(op) && !is_elementwise(op) && op != OpKind::kAdd) {
    return false;
  }
  for (std::size_t up : graph.inputs_of(node)) {
    if (graph.output_shape(up).size() != 3) return false;
  }
  return true;
}

MaskedActivation masked_spatial(const LayerDef& layer,
                                const WeightStore& weights,
                                const MaskedActivation& in,
                                PaddingMode padding) {
  if (!is_spatial(layer.op)) {
    throw ValidationError("layer '" + layer.id +
                          "': masked_spatial needs a conv or maxpool layer");
  }
  require_mask_fits(in.value, in.mask, "masked_spatial");
  const std::size_t k = layer_kernel(layer);
  const Tensor padded = padding == PaddingMode::kNeighbor
                            ? neighbor_pad(in.value, in.mask, k)
                            : apply_mask(in.value, in.mask);
  Tensor value = run_plain(layer, weights, padded);
  Mask out_mask(maxpool2d(in.mask.grid(), k, layer_stride(layer),
                          layer_padding(layer)));
  return {apply_mask(value, out_mask), std::move(out_mask)};
}

MaskedActivation masked_elementwise(const LayerDef& layer,
                                    const WeightStore& weights,
                                    const MaskedActivation& in) {
  if (!is_elementwise(layer.op)) {
    throw ValidationError("layer '" + layer.id +
                          "': masked_elementwise needs relu or batchnorm");
  }
  Tensor value = run_plain(layer, weights, apply_mask(in.value, in.mask));
  return {apply_mask(value, in.mask), in.mask};
}

MaskedActivation masked_add(const MaskedActivation& a,
                            const MaskedActivation& b) {
  Mask m = intersect(a.mask, b.mask);
  return {apply_mask(add(a.value, b.value), m), std::move(m)};
}

Tensor masked_head(const MaskedActivation& in, std::span<const LayerDef> head,
                   const WeightStore& weights) {
  Tensor value = apply_mask(in.value, in.mask);
  for (const LayerDef& layer : head) value = run_plain(layer, weights, value);
  return value;
}

MaskedTrace masked_forward_trace(const ModelGraph& graph,
                                 const WeightStore& weights,
                                 const Tensor& image, const Mask& mask,
                                 const MaskingConfig& config) {
  if (image.shape() != graph.input_shape()) {
    throw ShapeError("layer '" + graph.layer(graph.input_node()).id +
                     "': input shape " + shape_to_string(image.shape()) +
                     " does not match graph input " +
                     shape_to_string(graph.input_shape()));
  }
  require_mask_fits(image, mask, "masked_forward");
  graph.validate_weights(weights);

  std::size_t maskable_total = 0;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    maskable_total += is_maskable(graph, i);
  }
  const std::size_t budget = config.prefix.value_or(maskable_total);
  if (budget > maskable_total) {
    throw ValidationError("masking prefix " + std::to_string(budget) +
                          " exceeds the " + std::to_string(maskable_total) +
                          " maskable layers of the graph");
  }

  MaskedTrace trace;
  trace.nodes.resize(graph.size());
  std::size_t masked_so_far = 0;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const LayerDef& layer = graph.layer(i);
    NodeState& out = trace.nodes[i];
    const auto& ups = graph.inputs_of(i);
    try {
      if (layer.op == OpKind::kInput) {
        out = {apply_mask(image, mask), mask};
        continue;
      }
      const bool masked = is_maskable(graph, i) && masked_so_far < budget &&
                          std::all_of(ups.begin(), ups.end(), [&](auto up) {
                            return trace.nodes[up].mask.has_value();
                          });
      if (masked) {
        ++masked_so_far;
        auto in = [&](std::size_t j) {
          const NodeState& s = trace.nodes[ups[j]];
          return MaskedActivation{s.value, *s.mask};
        };
        MaskedActivation r;
        if (is_spatial(layer.op)) {
          r = masked_spatial(layer, weights, in(0), config.padding);
        } else if (is_elementwise(layer.op)) {
          r = masked_elementwise(layer, weights, in(0));
        } else {
          r = masked_add(in(0), in(1));
        }
        out = {std::move(r.value), std::move(r.mask)};
        continue;
      }
      if (layer.op == OpKind::kOutput) {
        out = trace.nodes[ups[0]];
        continue;
      }
      // Plain node: inputs still carrying a mask are zero-filled first.
      std::vector<Tensor> zero_filled(ups.size());
      std::vector<const Tensor*> ins;
      for (std::size_t j = 0; j < ups.size(); ++j) {
        const NodeState& s = trace.nodes[ups[j]];
        if (s.mask) {
          zero_filled[j] = apply_mask(s.value, *s.mask);
          ins.push_back(&zero_filled[j]);
        } else {
          ins.push_back(&s.value);
        }
      }
      out = {apply_layer(layer, weights, ins), std::nullopt};
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + layer.id + "': " + e.what());
    }
  }

  auto finish = [](const NodeState& s) {
    return s.mask ? apply_mask(s.value, *s.mask).vec() : s.value.vec();
  };
  trace.result.logits = finish(trace.nodes[graph.output_node()]);
  trace.result.features = finish(trace.nodes[graph.feature_tap()]);
  for (float v : trace.result.logits) {
    if (!std::isfinite(v)) {
      throw NumericalError("masked forward produced non-finite logits");
    }
  }
  return trace;
}

ForwardResult masked_forward(const ModelGraph& graph,
                             const WeightStore& weights, const Tensor& image,
                             const Mask& mask, const MaskingConfig& config) {
  return masked_forward_trace(graph, weights, image, mask, config).result;
}

std::vector<std::optional<Mask>> mask_propagation_oracle(
    const ModelGraph& graph, const Mask& mask) {
  std::vector<std::optional<Mask>> out(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const LayerDef& layer = graph.layer(i);
    const auto& ups = graph.inputs_of(i);
    if (layer.op == OpKind::kInput) {
      out[i] = mask;
      continue;
    }
    const bool inputs_masked = std::all_of(
        ups.begin(), ups.end(), [&](auto up) { return out[up].has_value(); });
    if (!inputs_masked || !is_maskable(graph, i)) continue;

    if (layer.op == OpKind::kAdd) {
      const Mask& a = *out[ups[0]];
      const Mask& b = *out[ups[1]];
      Mask m = Mask::zeros(a.height(), a.width());
      for (std::size_t y = 0; y < a.height(); ++y) {
        for (std::size_t x = 0; x < a.width(); ++x) {
          m.set(y, x, a.at(y, x) && b.at(y, x));
        }
      }
      out[i] = std::move(m);
    } else if (is_elementwise(layer.op)) {
      out[i] = out[ups[0]];
    } else {
      const Mask& in = *out[ups[0]];
      const Shape& shape = graph.output_shape(i);
      const auto k = static_cast<long long>(layer_kernel(layer));
      const auto s = static_cast<long long>(layer_stride(layer));
      const auto p = static_cast<long long>(layer_padding(layer));
      Mask m = Mask::zeros(shape[1], shape[2]);
      for (std::size_t oy = 0; oy < shape[1]; ++oy) {
        for (std::size_t ox = 0; ox < shape[2]; ++ox) {
          const long long top = static_cast<long long>(oy) * s - p;
          const long long left = static_cast<long long>(ox) * s - p;
          bool hit = false;
          // Every input cell is tested for membership in the window.
          for (std::size_t iy = 0; iy < in.height() && !hit; ++iy) {
            for (std::size_t ix = 0; ix < in.width() && !hit; ++ix) {
              const auto y = static_cast<long long>(iy);
              const auto x = static_cast<long long>(ix);
              const bool inside = y >= top && y < top + k && x >= left &&
                                  x < left + k;
              hit = inside && in.at(iy, ix);
            }
          }
          m.set(oy, ox, hit);
        }
      }
      out[i] = std::move(m);
    }
  }
  return out;
}

}  // namespace lmask
