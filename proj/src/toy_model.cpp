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

#include "lmask/toy_model.hpp"

#include <cmath>

#include "lmask/rng.hpp"

namespace lmask {

namespace {

LayerDef conv(const std::string& id, const std::string& input, std::size_t in,
               std::size_t out, std::size_t kernel, std::size_t stride,
               std::size_t padding) {
  ConvParams attrs;
  attrs.in_channels = in;
  attrs.out_channels = out;
  attrs.kernel = kernel;
  attrs.stride = stride;
  attrs.padding = padding;
  return {id, OpKind::kConv, attrs, {input}, {id + ".weight"}};
}

LayerDef bn(const std::string& id, const std::string& input) {
  return {id,
          OpKind::kBatchNorm,
          BatchNormParams{},
          {input},
          {id + ".weight", id + ".bias", id + ".running_mean",
           id + ".running_var"}};
}

LayerDef simple(const std::string& id, OpKind op,
                 std::vector<std::string> inputs) {
  return {id, op, std::monostate{}, std::move(inputs), {}};
}

}  // namespace

ModelGraph toy_resnet_graph(std::size_t height, std::size_t width) {
  std::vector<LayerDef> layers = {
      simple("in", OpKind::kInput, {}),
      conv("conv1", "in", 3, 8, 3, 1, 1),
      bn("bn1", "conv1"),
      simple("relu1", OpKind::kRelu, {"bn1"}),
      {"pool1", OpKind::kMaxPool, PoolParams{2, 2, 0}, {"relu1"}, {}},
      conv("conv2a", "pool1", 8, 8, 3, 1, 1),
      bn("bn2a", "conv2a"),
      simple("relu2a", OpKind::kRelu, {"bn2a"}),
      conv("conv2b", "relu2a", 8, 8, 3, 1, 1),
      bn("bn2b", "conv2b"),
      simple("add2", OpKind::kAdd, {"pool1", "bn2b"}),
      simple("relu2", OpKind::kRelu, {"add2"}),
      conv("conv3a", "relu2", 8, 16, 3, 2, 1),
      bn("bn3a", "conv3a"),
      simple("relu3a", OpKind::kRelu, {"bn3a"}),
      conv("conv3b", "relu3a", 16, 16, 3, 1, 1),
      bn("bn3b", "conv3b"),
      conv("conv3s", "relu2", 8, 16, 1, 2, 0),
      bn("bn3s", "conv3s"),
      simple("add3", OpKind::kAdd, {"bn3s", "bn3b"}),
      simple("relu3", OpKind::kRelu, {"add3"}),
      simple("gap", OpKind::kAvgPoolGlobal, {"relu3"}),
      simple("flat", OpKind::kFlatten, {"gap"}),
      {"fc", OpKind::kLinear, LinearParams{16, 10, true}, {"flat"},
       {"fc.weight", "fc.bias"}},
      simple("out", OpKind::kOutput, {"fc"}),
  };
  return ModelGraph::build({3, height, width}, "gap", std::move(layers));
}

WeightStore toy_resnet_weights(const ModelGraph& graph, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore store;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const LayerDef& layer = graph.layer(i);
    const auto& in_shape = graph.output_shape(graph.inputs_of(i).empty()
                                                  ? i
                                                  : graph.inputs_of(i)[0]);
    const auto shapes = expected_weight_shapes(layer, in_shape);
    for (std::size_t w = 0; w < shapes.size(); ++w) {
      Tensor t(shapes[w]);
      for (float& v : t.data()) {
        switch (layer.op) {
          case OpKind::kConv: {
            const auto& s = std::get<ConvParams>(layer.params);
            const double fan_in =
                static_cast<double>(s.in_channels * s.kernel * s.kernel);
            v = static_cast<float>(rng.normal() * std::sqrt(2.0 / fan_in));
            break;
          }
          case OpKind::kBatchNorm:
            // gamma, beta, running mean, running var
            v = static_cast<float>(w == 0   ? rng.uniform(0.8, 1.2)
                                   : w == 3 ? rng.uniform(0.5, 1.5)
                                            : 0.1 * rng.normal());
            break;
          case OpKind::kLinear: {
            const auto& s = std::get<LinearParams>(layer.params);
            const double scale =
                w == 0 ? 1.0 / std::sqrt(static_cast<double>(s.in_features))
                       : 0.1;
            v = static_cast<float>(rng.normal() * scale);
            break;
          }
          default:
            break;
        }
      }
      store.insert(layer.weight_names[w], std::move(t));
    }
  }
  return store;
}

Model toy_resnet(std::uint64_t seed) {
  ModelGraph graph = toy_resnet_graph();
  WeightStore weights = toy_resnet_weights(graph, seed);
  return bind_model(std::move(graph), std::move(weights));
}

}  // namespace lmask
