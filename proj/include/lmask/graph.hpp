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

// CNN described as a DAG of layers plus the plain forward pass.
//
// Graph document (JSON):
//   {
//     "input_shape": [C, H, W],
//     "feature_tap": "<layer id>",
//     "layers": [
//       {"id": "conv1", "op": "conv", "inputs": ["in"],
//        "params": {"in_channels": 3, "out_channels": 8, "kernel": 3,
//                   "stride": 1, "padding": 1, "bias": false},
//        "weight_names": ["conv1.weight"]},
//       ...
//     ]
//   }
//
// Supported ops and their weight_names:
//   input, output, relu, flatten, avgpool_global, add   (none)
//   conv       [weight O x C x k x k] (+ [bias O] when params.bias)
//   maxpool    (none); params kernel, stride (default kernel), padding
//   batchnorm  [gamma, beta, running_mean, running_var]; params eps
//   linear     [weight out x in] (+ [bias out] when params.bias, default on)

#ifndef LMASK_GRAPH_HPP_
#define LMASK_GRAPH_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lmask/tensor.hpp"
#include "lmask/weights.hpp"

namespace lmask {

enum class OpKind {
  kInput,
  kConv,
  kMaxPool,
  kAvgPoolGlobal,
  kRelu,
  kBatchNorm,
  kLinear,
  kAdd,
  kFlatten,
  kOutput,
};

std::string_view op_name(OpKind op);
// Throws ValidationError for unknown names.
OpKind parse_op(std::string_view name);

struct PoolParams {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

struct BatchNormParams {
  float eps = 1e-5f;
};

struct LinearParams {
  std::size_t in_features = 1;
  std::size_t out_features = 1;
  bool has_bias = true;
};

using LayerParams =
    std::variant<std::monostate, ConvParams, PoolParams, BatchNormParams, LinearParams>;

struct LayerDef {
  std::string id;
  OpKind op = OpKind::kInput;
  LayerParams params;
  std::vector<std::string> inputs;
  std::vector<std::string> weight_names;
};

// Validated, topologically ordered DAG with statically inferred shapes.
// Immutable after construction.
class ModelGraph {
 public:
  // Validates arity, references, acyclicity, weight-name counts and shapes.
  // Topological ties are broken by declaration order. Throws
  // ValidationError / ShapeError naming the offending layer.
  static ModelGraph build(Shape input_shape, std::string feature_tap,
                          std::vector<LayerDef> layers);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<LayerDef>& layers() const { return layers_; }
  std::size_t size() const { return layers_.size(); }
  const LayerDef& layer(std::size_t i) const { return layers_[i]; }
  const std::vector<std::size_t>& inputs_of(std::size_t i) const {
    return input_index_[i];
  }
  const Shape& output_shape(std::size_t i) const { return shapes_[i]; }
  std::size_t index_of(const std::string& id) const;

  std::size_t input_node() const { return input_node_; }
  std::size_t output_node() const { return output_node_; }
  std::size_t feature_tap() const { return feature_tap_; }

  // Checks that every weight name resolves with exactly the expected shape.
  void validate_weights(const WeightStore& weights) const;

 private:
  Shape input_shape_;
  std::vector<LayerDef> layers_;
  std::vector<std::vector<std::size_t>> input_index_;
  std::vector<Shape> shapes_;
  std::map<std::string, std::size_t> index_;
  std::size_t input_node_ = 0;
  std::size_t output_node_ = 0;
  std::size_t feature_tap_ = 0;
};

// Expected weight shapes for one layer, in weight_names order.
std::vector<Shape> expected_weight_shapes(const LayerDef& layer,
                                          const Shape& input_shape);

ModelGraph load_graph(std::string_view text);
std::string save_graph(const ModelGraph& graph);

// A validated graph bound to weights that fit it.
struct Model {
  ModelGraph graph;
  WeightStore weights;
};

// Validates weights against the graph before binding them.
Model bind_model(ModelGraph graph, WeightStore weights);

struct ForwardResult {
  std::vector<float> logits;
  std::vector<float> features;
};

// Applies one non-input layer to already-computed input activations.
Tensor apply_layer(const LayerDef& layer, const WeightStore& weights,
                   std::span<const Tensor* const> inputs);

// Plain (unmasked) forward pass. Throws ShapeError if the input shape does
// not match, NumericalError on non-finite outputs.
ForwardResult forward(const ModelGraph& graph, const WeightStore& weights,
                      const Tensor& input);

}  // namespace lmask

#endif  // LMASK_GRAPH_HPP_
