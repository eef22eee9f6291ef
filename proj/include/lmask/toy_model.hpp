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

// Small residual network used by the tests and the shipped example model:
// a 3x3 stem with batchnorm and 2x2 max pooling, an identity residual block
// at 8 channels, a strided block to 16 channels with a 1x1 projection
// shortcut, global average pooling and a 10-way linear classifier.

#ifndef LMASK_TOY_MODEL_HPP_
#define LMASK_TOY_MODEL_HPP_

#include <cstdint>

#include "lmask/graph.hpp"

namespace lmask {

ModelGraph toy_resnet_graph(std::size_t height = 32, std::size_t width = 32);

// He-normal conv weights and mildly perturbed batchnorm statistics drawn
// from Rng(seed) in layer order.
WeightStore toy_resnet_weights(const ModelGraph& graph, std::uint64_t seed = 0);

Model toy_resnet(std::uint64_t seed = 0);

}  // namespace lmask

#endif  // LMASK_TOY_MODEL_HPP_
