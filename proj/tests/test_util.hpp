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

// Helpers shared by the unit tests and the acceptance runner.

#ifndef LMASK_TESTS_TEST_UTIL_HPP_
#define LMASK_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lmask/graph.hpp"
#include "lmask/masking.hpp"
#include "lmask/rng.hpp"
#include "lmask/tensor.hpp"

namespace lmask::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline Tensor random_image(Rng& rng, std::size_t h, std::size_t w) {
  return random_tensor(rng, {3, h, w}, 0.0, 1.0);
}

// Each cell kept with probability keep_prob.
inline Mask random_mask(Rng& rng, std::size_t h, std::size_t w,
                        double keep_prob = 0.5) {
  Mask m = Mask::zeros(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) m.set(y, x, rng.uniform() < keep_prob);
  }
  return m;
}

// Union of a few random rectangles; closer to the masks used in practice
// than independent noise.
inline Mask random_block_mask(Rng& rng, std::size_t h, std::size_t w) {
  Mask m = Mask::zeros(h, w);
  const std::size_t blocks = 1 + rng.below(4);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t y0 = rng.below(h), x0 = rng.below(w);
    const std::size_t bh = 1 + rng.below(h - y0), bw = 1 + rng.below(w - x0);
    for (std::size_t y = y0; y < y0 + bh; ++y) {
      for (std::size_t x = x0; x < x0 + bw; ++x) m.set(y, x, true);
    }
  }
  return m;
}

// Smooth "natural-looking" picture: colour gradients, a few discs and
// rectangles, and mild noise.
inline Tensor natural_image(Rng& rng, std::size_t h, std::size_t w) {
  Tensor img = Tensor::chw(3, h, w);
  double base[3], gy[3], gx[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.2, 0.8);
    gy[c] = rng.uniform(-0.3, 0.3);
    gx[c] = rng.uniform(-0.3, 0.3);
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = static_cast<float>(
            base[c] + gy[c] * (static_cast<double>(y) / h - 0.5) +
            gx[c] * (static_cast<double>(x) / w - 0.5));
      }
    }
  }
  const std::size_t shapes = 3 + rng.below(5);
  for (std::size_t s = 0; s < shapes; ++s) {
    double color[3];
    for (double& c : color) c = rng.uniform();
    const double cy = rng.uniform(0, h), cx = rng.uniform(0, w);
    const double r = rng.uniform(0.08, 0.3) * std::min(h, w);
    const bool disc = rng.uniform() < 0.5;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = y - cy, dx = x - cx;
        const bool inside = disc ? dy * dy + dx * dx < r * r
                                 : std::abs(dy) < r && std::abs(dx) < 0.6 * r;
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(color[c]);
      }
    }
  }
  for (float& v : img.data()) {
    v = static_cast<float>(
        std::clamp(static_cast<double>(v) + 0.02 * rng.normal(), 0.0, 1.0));
  }
  return img;
}

// Random spatial graph for mask-propagation checks: a chain of up to
// `depth` conv/maxpool/relu/batchnorm layers with optional residual adds,
// followed by a global pool head. Weights are drawn from the same rng.
struct RandomNet {
  ModelGraph graph;
  WeightStore weights;
};

inline RandomNet random_net(Rng& rng, std::size_t max_depth = 4) {
  const std::size_t c = 1 + rng.below(3);
  const std::size_t h = 4 + rng.below(9), w = 4 + rng.below(9);
  std::vector<LayerDef> layers;
  layers.push_back({"in", OpKind::kInput, std::monostate{}, {}, {}});
  std::string prev = "in";
  std::size_t ch = c, ph = h, pw = w;
  const std::size_t depth = 1 + rng.below(max_depth);
  WeightStore weights;
  for (std::size_t d = 0; d < depth; ++d) {
    const std::string id = "l" + std::to_string(d);
    const std::size_t kind = rng.below(4);
    const std::size_t k = 1 + rng.below(3);
    const std::size_t s = 1 + rng.below(2);
    const std::size_t p = rng.below(k);  // p < k keeps every window non-empty
    if (kind <= 1 && conv_output_size(ph, k, s, p) >= 1 &&
        conv_output_size(pw, k, s, p) >= 1 && ph + 2 * p >= k &&
        pw + 2 * p >= k) {
      const std::size_t oh = conv_output_size(ph, k, s, p);
      const std::size_t ow = conv_output_size(pw, k, s, p);
      if (kind == 0) {
        ConvParams attrs{ch, ch, k, s, p, rng.uniform() < 0.5};
        LayerDef l{id, OpKind::kConv, attrs, {prev}, {id + ".w"}};
        weights.insert(id + ".w", random_tensor(rng, {ch, ch, k, k}));
        if (attrs.has_bias) {
          l.weight_names.push_back(id + ".b");
          weights.insert(id + ".b", random_tensor(rng, {ch}));
        }
        layers.push_back(l);
      } else {
        layers.push_back({id, OpKind::kMaxPool, PoolParams{k, s, p}, {prev}, {}});
      }
      const bool residual = s == 1 && oh == ph && ow == pw && rng.uniform() < 0.5;
      prev = id;
      ph = oh;
      pw = ow;
      if (residual) {
        const std::string add_id = id + ".add";
        layers.push_back({add_id, OpKind::kAdd, std::monostate{},
                          {layers[layers.size() - 1].inputs[0], id}, {}});
        prev = add_id;
      }
    } else if (kind == 2) {
      layers.push_back({id, OpKind::kRelu, std::monostate{}, {prev}, {}});
      prev = id;
    } else {
      LayerDef l{id,
                  OpKind::kBatchNorm,
                  BatchNormParams{},
                  {prev},
                  {id + ".g", id + ".b", id + ".m", id + ".v"}};
      weights.insert(id + ".g", random_tensor(rng, {ch}, 0.5, 1.5));
      weights.insert(id + ".b", random_tensor(rng, {ch}));
      weights.insert(id + ".m", random_tensor(rng, {ch}));
      weights.insert(id + ".v", random_tensor(rng, {ch}, 0.5, 1.5));
      layers.push_back(l);
      prev = id;
    }
  }
  layers.push_back({"gap", OpKind::kAvgPoolGlobal, std::monostate{}, {prev}, {}});
  layers.push_back({"fc", OpKind::kLinear, LinearParams{ch, 2, true}, {"gap"},
                    {"fc.w", "fc.b"}});
  weights.insert("fc.w", random_tensor(rng, {2, ch}));
  weights.insert("fc.b", random_tensor(rng, {2}));
  layers.push_back({"out", OpKind::kOutput, std::monostate{}, {"fc"}, {}});
  return {ModelGraph::build({c, h, w}, "gap", std::move(layers)),
          std::move(weights)};
}

}  // namespace lmask::testing

#endif  // LMASK_TESTS_TEST_UTIL_HPP_
