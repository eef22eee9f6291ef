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

// Layer masking: run a CNN on the unmasked part of its input only.
//
// Every layer with a small receptive field is replaced by a version that
// acts on a (value, mask) pair:
//
//   conv / maxpool, kernel k, stride s:
//       value <- g(neighbor_pad(value, mask, k)),  mask <- maxpool_k,s(mask)
//   relu / batchnorm:
//       value <- g(value * mask),                  mask unchanged
//   add:
//       value <- (a + b) * (ma * mb),              mask <- ma * mb
//
// After each of these the value is multiplied by the output mask, so masked
// cells are exactly zero between layers. Layers from the first global pool,
// flatten or linear node onwards see value * mask and run unmodified.

#ifndef LMASK_MASKING_HPP_
#define LMASK_MASKING_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmask/graph.hpp"
#include "lmask/tensor.hpp"

namespace lmask {

// Binary spatial mask stored as a 1 x H x W tensor. 1 = unmasked (kept).
class Mask {
 public:
  Mask() = default;
  // Throws ShapeError unless grid is 1 x H x W, ValidationError unless every
  // entry is exactly 0 or 1.
  explicit Mask(Tensor grid);

  static Mask ones(std::size_t h, std::size_t w);
  static Mask zeros(std::size_t h, std::size_t w);

  std::size_t height() const { return grid_.dim(1); }
  std::size_t width() const { return grid_.dim(2); }
  const Tensor& grid() const { return grid_; }

  bool at(std::size_t y, std::size_t x) const {
    return grid_.at(0, y, x) != 0.0f;
  }
  void set(std::size_t y, std::size_t x, bool keep) {
    grid_.at(0, y, x) = keep ? 1.0f : 0.0f;
  }
  // Number of unmasked cells.
  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Tensor grid_;
};

// Elementwise product of two masks of equal size.
Mask intersect(const Mask& a, const Mask& b);

// value with every masked cell set to exactly 0 (all channels).
Tensor apply_mask(const Tensor& value, const Mask& mask);

struct MaskedActivation {
  Tensor value;
  Mask mask;
};

enum class PaddingMode { kNeighbor, kZero };

struct MaskingConfig {
  PaddingMode padding = PaddingMode::kNeighbor;
  // Number of maskable nodes (topological order) that use masked semantics;
  // nullopt masks all of them.
  std::optional<std::size_t> prefix;
};

std::string to_string(const MaskingConfig& config);

// Iterative neighbor-average fill of masked cells, k rounds. Unmasked cells
// are returned unchanged; cells further than k steps (8-neighbourhood) from
// any unmasked cell stay 0.
Tensor neighbor_pad(const Tensor& x, const Mask& mask, std::size_t k);

struct PadStep {
  Tensor value;
  Mask mask;
};

// State after each round of neighbor_pad. Entry 0 is (x * mask, mask);
// entry i is the padded value and grown mask after round i.
std::vector<PadStep> neighbor_pad_trace(const Tensor& x, const Mask& mask,
                                        std::size_t k);

// Maskable node kinds: conv, maxpool (spatial), relu, batchnorm
// (elementwise), and add, when fed C x H x W activations.
bool is_maskable(const ModelGraph& graph, std::size_t node);

MaskedActivation masked_spatial(const LayerDef& layer,
                                const WeightStore& weights,
                                const MaskedActivation& in,
                                PaddingMode padding = PaddingMode::kNeighbor);

MaskedActivation masked_elementwise(const LayerDef& layer,
                                    const WeightStore& weights,
                                    const MaskedActivation& in);

MaskedActivation masked_add(const MaskedActivation& a,
                            const MaskedActivation& b);

// Runs a chain of head layers (global pool / flatten / linear / relu ...)
// on value * mask. Global pooling keeps the full H*W denominator.
Tensor masked_head(const MaskedActivation& in, std::span<const LayerDef> head,
                   const WeightStore& weights);

struct NodeState {
  Tensor value;
  std::optional<Mask> mask;  // absent once the node runs plainly
};

struct MaskedTrace {
  std::vector<NodeState> nodes;  // indexed like graph.layers()
  ForwardResult result;
};

MaskedTrace masked_forward_trace(const ModelGraph& graph,
                                 const WeightStore& weights,
                                 const Tensor& image, const Mask& mask,
                                 const MaskingConfig& config = {});

ForwardResult masked_forward(const ModelGraph& graph,
                             const WeightStore& weights, const Tensor& image,
                             const Mask& mask,
                             const MaskingConfig& config = {});

// Brute-force mask propagation: a cell of a spatial node is 1 iff some cell
// of its input window (enumerated over the whole input plane) is 1; add
// nodes intersect. Entries are nullopt for nodes past the spatial part of
// the graph.
std::vector<std::optional<Mask>> mask_propagation_oracle(
    const ModelGraph& graph, const Mask& mask);

}  // namespace lmask

#endif  // LMASK_MASKING_HPP_
