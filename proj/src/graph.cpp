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

#include "lmask/graph.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <queue>
#include <set>

#include <json.hpp>

#include "lmask/error.hpp"

namespace lmask {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<OpKind, std::string_view>, 10> kOpNames = {{
    {OpKind::kInput, "input"},
    {OpKind::kConv, "conv"},
    {OpKind::kMaxPool, "maxpool"},
    {OpKind::kAvgPoolGlobal, "avgpool_global"},
    {OpKind::kRelu, "relu"},
    {OpKind::kBatchNorm, "batchnorm"},
    {OpKind::kLinear, "linear"},
    {OpKind::kAdd, "add"},
    {OpKind::kFlatten, "flatten"},
    {OpKind::kOutput, "output"},
}};

[[noreturn]] void fail(const std::string& id, const std::string& msg) {
  throw ValidationError("layer '" + id + "': " + msg);
}

[[noreturn]] void fail_shape(const std::string& id, const std::string& msg) {
  throw ShapeError("layer '" + id + "': " + msg);
}

std::size_t expected_arity(OpKind op) {
  switch (op) {
    case OpKind::kInput:
      return 0;
    case OpKind::kAdd:
      return 2;
    default:
      return 1;
  }
}

std::size_t expected_weight_count(const LayerDef& layer) {
  switch (layer.op) {
    case OpKind::kConv:
      return std::get<ConvParams>(layer.params).has_bias ? 2 : 1;
    case OpKind::kLinear:
      return std::get<LinearParams>(layer.params).has_bias ? 2 : 1;
    case OpKind::kBatchNorm:
      return 4;
    default:
      return 0;
  }
}

void check_params(const LayerDef& layer) {
  auto wrong = [&] { fail(layer.id, "params do not match op kind"); };
  switch (layer.op) {
    case OpKind::kConv: {
      if (!std::holds_alternative<ConvParams>(layer.params)) wrong();
      const auto& c = std::get<ConvParams>(layer.params);
      if (c.kernel < 1 || c.stride < 1 || c.in_channels < 1 ||
          c.out_channels < 1) {
        fail(layer.id, "conv needs kernel, stride and channels >= 1");
      }
      break;
    }
    case OpKind::kMaxPool: {
      if (!std::holds_alternative<PoolParams>(layer.params)) wrong();
      const auto& p = std::get<PoolParams>(layer.params);
      if (p.kernel < 1 || p.stride < 1) {
        fail(layer.id, "maxpool needs kernel and stride >= 1");
      }
      break;
    }
    case OpKind::kBatchNorm:
      if (!std::holds_alternative<BatchNormParams>(layer.params)) wrong();
      break;
    case OpKind::kLinear: {
      if (!std::holds_alternative<LinearParams>(layer.params)) wrong();
      const auto& l = std::get<LinearParams>(layer.params);
      if (l.in_features < 1 || l.out_features < 1) {
        fail(layer.id, "linear needs positive feature counts");
      }
      break;
    }
    default:
      if (!std::holds_alternative<std::monostate>(layer.params)) wrong();
  }
}

Shape infer_shape(const LayerDef& layer, const std::vector<Shape>& in) {
  auto need_rank3 = [&](const Shape& s) {
    if (s.size() != 3) {
      fail_shape(layer.id, "expects a C x H x W input, got " +
                               shape_to_string(s));
    }
  };
  switch (layer.op) {
    case OpKind::kInput:
      return {};
    case OpKind::kConv: {
      const auto& c = std::get<ConvParams>(layer.params);
      need_rank3(in[0]);
      if (in[0][0] != c.in_channels) {
        fail_shape(layer.id, "input has " + std::to_string(in[0][0]) +
                                 " channels, conv expects " +
                                 std::to_string(c.in_channels));
      }
      const std::size_t oh =
          conv_output_size(in[0][1], c.kernel, c.stride, c.padding);
      const std::size_t ow =
          conv_output_size(in[0][2], c.kernel, c.stride, c.padding);
      if (oh == 0 || ow == 0) fail_shape(layer.id, "output size < 1");
      return {c.out_channels, oh, ow};
    }
    case OpKind::kMaxPool: {
      const auto& p = std::get<PoolParams>(layer.params);
      need_rank3(in[0]);
      const std::size_t oh =
          conv_output_size(in[0][1], p.kernel, p.stride, p.padding);
      const std::size_t ow =
          conv_output_size(in[0][2], p.kernel, p.stride, p.padding);
      if (oh == 0 || ow == 0) fail_shape(layer.id, "output size < 1");
      return {in[0][0], oh, ow};
    }
    case OpKind::kAvgPoolGlobal:
      need_rank3(in[0]);
      return {in[0][0]};
    case OpKind::kBatchNorm:
      need_rank3(in[0]);
      return in[0];
    case OpKind::kRelu:
    case OpKind::kOutput:
      return in[0];
    case OpKind::kFlatten:
      return {std::accumulate(in[0].begin(), in[0].end(), std::size_t{1},
                              std::multiplies<>())};
    case OpKind::kLinear: {
      const auto& l = std::get<LinearParams>(layer.params);
      if (in[0].size() != 1 || in[0][0] != l.in_features) {
        fail_shape(layer.id, "linear expects a flat input of length " +
                                 std::to_string(l.in_features) + ", got " +
                                 shape_to_string(in[0]));
      }
      return {l.out_features};
    }
    case OpKind::kAdd:
      if (in[0] != in[1]) {
        fail_shape(layer.id, "add inputs differ: " + shape_to_string(in[0]) +
                                 " vs " + shape_to_string(in[1]));
      }
      return in[0];
  }
  return {};
}

std::size_t get_size(const json& params, const char* key,
                     std::optional<std::size_t> fallback,
                     const std::string& id) {
  if (!params.contains(key)) {
    if (fallback) return *fallback;
    fail(id, std::string("missing param '") + key + "'");
  }
  const json& v = params.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    fail(id, std::string("param '") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

bool get_bool(const json& params, const char* key, bool fallback,
              const std::string& id) {
  if (!params.contains(key)) return fallback;
  if (!params.at(key).is_boolean()) {
    fail(id, std::string("param '") + key + "' must be a boolean");
  }
  return params.at(key).get<bool>();
}

LayerParams parse_params(OpKind op, const json& params,
                         const std::string& id) {
  switch (op) {
    case OpKind::kConv: {
      ConvParams c;
      c.in_channels = get_size(params, "in_channels", std::nullopt, id);
      c.out_channels = get_size(params, "out_channels", std::nullopt, id);
      c.kernel = get_size(params, "kernel", std::nullopt, id);
      c.stride = get_size(params, "stride", 1, id);
      c.padding = get_size(params, "padding", 0, id);
      c.has_bias = get_bool(params, "bias", false, id);
      return c;
    }
    case OpKind::kMaxPool: {
      PoolParams p;
      p.kernel = get_size(params, "kernel", std::nullopt, id);
      p.stride = get_size(params, "stride", p.kernel, id);
      p.padding = get_size(params, "padding", 0, id);
      return p;
    }
    case OpKind::kBatchNorm: {
      BatchNormParams b;
      if (params.contains("eps")) {
        if (!params.at("eps").is_number()) fail(id, "param 'eps' must be a number");
        b.eps = params.at("eps").get<float>();
      }
      return b;
    }
    case OpKind::kLinear: {
      LinearParams l;
      l.in_features = get_size(params, "in_features", std::nullopt, id);
      l.out_features = get_size(params, "out_features", std::nullopt, id);
      l.has_bias = get_bool(params, "bias", true, id);
      return l;
    }
    default:
      return std::monostate{};
  }
}

json params_to_json(const LayerDef& layer) {
  json p = json::object();
  switch (layer.op) {
    case OpKind::kConv: {
      const auto& c = std::get<ConvParams>(layer.params);
      p = {{"in_channels", c.in_channels}, {"out_channels", c.out_channels},
           {"kernel", c.kernel},           {"stride", c.stride},
           {"padding", c.padding},         {"bias", c.has_bias}};
      break;
    }
    case OpKind::kMaxPool: {
      const auto& m = std::get<PoolParams>(layer.params);
      p = {{"kernel", m.kernel}, {"stride", m.stride}, {"padding", m.padding}};
      break;
    }
    case OpKind::kBatchNorm:
      p = {{"eps", std::get<BatchNormParams>(layer.params).eps}};
      break;
    case OpKind::kLinear: {
      const auto& l = std::get<LinearParams>(layer.params);
      p = {{"in_features", l.in_features},
           {"out_features", l.out_features},
           {"bias", l.has_bias}};
      break;
    }
    default:
      break;
  }
  return p;
}

const Tensor& single_input(std::span<const Tensor* const> inputs) {
  return *inputs[0];
}

}  // namespace

std::string_view op_name(OpKind op) {
  for (const auto& [kind, name] : kOpNames) {
    if (kind == op) return name;
  }
  return "?";
}

OpKind parse_op(std::string_view name) {
  for (const auto& [kind, n] : kOpNames) {
    if (n == name) return kind;
  }
  throw ValidationError("unknown op '" + std::string(name) + "'");
}

std::vector<Shape> expected_weight_shapes(const LayerDef& layer,
                                          const Shape& input_shape) {
  switch (layer.op) {
    case OpKind::kConv: {
      const auto& c = std::get<ConvParams>(layer.params);
      std::vector<Shape> s = {
          {c.out_channels, c.in_channels, c.kernel, c.kernel}};
      if (c.has_bias) s.push_back({c.out_channels});
      return s;
    }
    case OpKind::kBatchNorm: {
      const Shape ch = {input_shape.at(0)};
      return {ch, ch, ch, ch};
    }
    case OpKind::kLinear: {
      const auto& l = std::get<LinearParams>(layer.params);
      std::vector<Shape> s = {{l.out_features, l.in_features}};
      if (l.has_bias) s.push_back({l.out_features});
      return s;
    }
    default:
      return {};
  }
}

ModelGraph ModelGraph::build(Shape input_shape, std::string feature_tap,
                             std::vector<LayerDef> layers) {
  if (input_shape.size() != 3 ||
      std::find(input_shape.begin(), input_shape.end(), 0) !=
          input_shape.end()) {
    throw ValidationError("input_shape must be [C, H, W] with positive dims");
  }

  std::map<std::string, std::size_t> declared;
  std::size_t n_input = 0, n_output = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerDef& l = layers[i];
    if (l.id.empty()) throw ValidationError("layer with empty id");
    if (!declared.emplace(l.id, i).second) fail(l.id, "duplicate id");
    check_params(l);
    if (l.inputs.size() != expected_arity(l.op)) {
      fail(l.id, "arity violation: " + std::string(op_name(l.op)) +
                     " takes " + std::to_string(expected_arity(l.op)) +
                     " input(s), got " + std::to_string(l.inputs.size()));
    }
    if (l.weight_names.size() != expected_weight_count(l)) {
      fail(l.id, "expects " + std::to_string(expected_weight_count(l)) +
                     " weight name(s), got " +
                     std::to_string(l.weight_names.size()));
    }
    n_input += l.op == OpKind::kInput;
    n_output += l.op == OpKind::kOutput;
  }
  if (n_input != 1) throw ValidationError("graph needs exactly one input node");
  if (n_output != 1) {
    throw ValidationError("graph needs exactly one output node");
  }

  std::vector<std::vector<std::size_t>> decl_inputs(layers.size());
  std::vector<std::vector<std::size_t>> consumers(layers.size());
  std::vector<std::size_t> pending(layers.size(), 0);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (const std::string& ref : layers[i].inputs) {
      auto it = declared.find(ref);
      if (it == declared.end()) {
        fail(layers[i].id, "dangling reference to '" + ref + "'");
      }
      decl_inputs[i].push_back(it->second);
      consumers[it->second].push_back(i);
      ++pending[i];
    }
  }

  // Kahn's algorithm, smallest declaration index first.
  std::priority_queue<std::size_t, std::vector<std::size_t>,
                      std::greater<>> ready;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (pending[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (std::size_t c : consumers[i]) {
      if (--pending[c] == 0) ready.push(c);
    }
  }
  if (order.size() != layers.size()) {
    // Walk upstream through unresolved nodes until one repeats; it lies on
    // a cycle.
    std::size_t node = 0;
    while (pending[node] == 0) ++node;
    std::vector<bool> seen(layers.size(), false);
    while (!seen[node]) {
      seen[node] = true;
      for (std::size_t up : decl_inputs[node]) {
        if (pending[up] != 0) {
          node = up;
          break;
        }
      }
    }
    fail(layers[node].id, "cycle detected");
  }

  ModelGraph g;
  g.input_shape_ = std::move(input_shape);
  std::vector<std::size_t> position(layers.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) position[order[pos]] = pos;
  g.layers_.reserve(layers.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t decl = order[pos];
    g.layers_.push_back(std::move(layers[decl]));
    std::vector<std::size_t> ins;
    for (std::size_t up : decl_inputs[decl]) ins.push_back(position[up]);
    g.input_index_.push_back(std::move(ins));
  }
  for (std::size_t i = 0; i < g.layers_.size(); ++i) {
    g.index_[g.layers_[i].id] = i;
    if (g.layers_[i].op == OpKind::kInput) g.input_node_ = i;
    if (g.layers_[i].op == OpKind::kOutput) g.output_node_ = i;
  }

  g.shapes_.resize(g.layers_.size());
  for (std::size_t i = 0; i < g.layers_.size(); ++i) {
    if (g.layers_[i].op == OpKind::kInput) {
      g.shapes_[i] = g.input_shape_;
      continue;
    }
    std::vector<Shape> in;
    for (std::size_t up : g.input_index_[i]) in.push_back(g.shapes_[up]);
    g.shapes_[i] = infer_shape(g.layers_[i], in);
  }

  auto tap = g.index_.find(feature_tap);
  if (tap == g.index_.end()) {
    throw ValidationError("feature_tap '" + feature_tap +
                          "' is not a layer id");
  }
  g.feature_tap_ = tap->second;
  std::vector<bool> ancestor(g.layers_.size(), false);
  ancestor[g.output_node_] = true;
  for (std::size_t i = g.layers_.size(); i-- > 0;) {
    if (!ancestor[i]) continue;
    for (std::size_t up : g.input_index_[i]) ancestor[up] = true;
  }
  if (!ancestor[g.feature_tap_]) {
    throw ValidationError("feature_tap '" + feature_tap +
                          "' is not an ancestor of the output node");
  }
  return g;
}

std::size_t ModelGraph::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown layer id '" + id + "'");
  return it->second;
}

void ModelGraph::validate_weights(const WeightStore& weights) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerDef& l = layers_[i];
    if (l.weight_names.empty()) continue;
    const Shape& in = shapes_[input_index_[i][0]];
    const std::vector<Shape> expected = expected_weight_shapes(l, in);
    for (std::size_t w = 0; w < expected.size(); ++w) {
      const std::string& name = l.weight_names[w];
      if (!weights.contains(name)) {
        fail(l.id, "missing weight tensor '" + name + "'");
      }
      if (weights.get(name).shape() != expected[w]) {
        fail_shape(l.id, "weight '" + name + "' has shape " +
                             shape_to_string(weights.get(name).shape()) +
                             ", expected " + shape_to_string(expected[w]));
      }
    }
  }
}

ModelGraph load_graph(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("graph document parse error: ") +
                          e.what());
  }
  auto require = [&](const json& obj, const char* key, const std::string& ctx) {
    if (!obj.is_object() || !obj.contains(key)) {
      throw ValidationError(ctx + ": missing key '" + key + "'");
    }
    return obj.at(key);
  };

  try {
    Shape input_shape;
    const json shape = require(doc, "input_shape", "graph");
    if (!shape.is_array()) throw ValidationError("input_shape must be an array");
    for (const json& d : shape) {
      if (!d.is_number_integer() || d.get<long long>() <= 0) {
        throw ValidationError("input_shape entries must be positive integers");
      }
      input_shape.push_back(d.get<std::size_t>());
    }
    const json tap = require(doc, "feature_tap", "graph");
    if (!tap.is_string()) throw ValidationError("feature_tap must be a string");
    const json layers_doc = require(doc, "layers", "graph");
    if (!layers_doc.is_array()) throw ValidationError("layers must be an array");

    std::vector<LayerDef> layers;
    for (std::size_t i = 0; i < layers_doc.size(); ++i) {
      const json& entry = layers_doc[i];
      const std::string ctx = "layers[" + std::to_string(i) + "]";
      const json id = require(entry, "id", ctx);
      if (!id.is_string()) throw ValidationError(ctx + ": id must be a string");
      LayerDef l;
      l.id = id.get<std::string>();
      const json op = require(entry, "op", "layer '" + l.id + "'");
      if (!op.is_string()) fail(l.id, "op must be a string");
      try {
        l.op = parse_op(op.get<std::string>());
      } catch (const ValidationError& e) {
        fail(l.id, e.what());
      }
      const json params = entry.value("params", json::object());
      if (!params.is_object()) fail(l.id, "params must be an object");
      l.params = parse_params(l.op, params, l.id);
      for (const char* key : {"inputs", "weight_names"}) {
        const json list = entry.value(key, json::array());
        if (!list.is_array()) fail(l.id, std::string(key) + " must be an array");
        for (const json& s : list) {
          if (!s.is_string()) fail(l.id, std::string(key) + " must hold strings");
          (std::string_view(key) == "inputs" ? l.inputs : l.weight_names)
              .push_back(s.get<std::string>());
        }
      }
      layers.push_back(std::move(l));
    }
    return ModelGraph::build(std::move(input_shape), tap.get<std::string>(),
                             std::move(layers));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("graph document: ") + e.what());
  }
}

std::string save_graph(const ModelGraph& graph) {
  json doc;
  doc["input_shape"] = graph.input_shape();
  doc["feature_tap"] = graph.layer(graph.feature_tap()).id;
  json layers = json::array();
  for (const LayerDef& l : graph.layers()) {
    json entry = {{"id", l.id}, {"op", std::string(op_name(l.op))}};
    json params = params_to_json(l);
    if (!params.empty()) entry["params"] = params;
    entry["inputs"] = l.inputs;
    if (!l.weight_names.empty()) entry["weight_names"] = l.weight_names;
    layers.push_back(std::move(entry));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(2) + "\n";
}

Tensor apply_layer(const LayerDef& layer, const WeightStore& weights,
                   std::span<const Tensor* const> inputs) {
  switch (layer.op) {
    case OpKind::kInput:
    case OpKind::kOutput:
      return single_input(inputs);
    case OpKind::kConv: {
      const auto& attrs = std::get<ConvParams>(layer.params);
      std::optional<Tensor> bias;
      if (attrs.has_bias) bias = weights.get(layer.weight_names[1]);
      return conv2d(single_input(inputs), weights.get(layer.weight_names[0]),
                    bias, attrs);
    }
    case OpKind::kMaxPool: {
      const auto& p = std::get<PoolParams>(layer.params);
      return maxpool2d(single_input(inputs), p.kernel, p.stride, p.padding);
    }
    case OpKind::kAvgPoolGlobal:
      return global_avgpool(single_input(inputs));
    case OpKind::kRelu:
      return relu(single_input(inputs));
    case OpKind::kBatchNorm:
      return batchnorm_infer(single_input(inputs),
                             weights.get(layer.weight_names[0]),
                             weights.get(layer.weight_names[1]),
                             weights.get(layer.weight_names[2]),
                             weights.get(layer.weight_names[3]),
                             std::get<BatchNormParams>(layer.params).eps);
    case OpKind::kLinear: {
      const auto& attrs = std::get<LinearParams>(layer.params);
      std::optional<Tensor> bias;
      if (attrs.has_bias) bias = weights.get(layer.weight_names[1]);
      return linear(single_input(inputs), weights.get(layer.weight_names[0]),
                    bias);
    }
    case OpKind::kAdd:
      return add(*inputs[0], *inputs[1]);
    case OpKind::kFlatten: {
      const Tensor& in = single_input(inputs);
      return in.reshaped({in.size()});
    }
  }
  throw ValidationError("layer '" + layer.id + "': unsupported op");
}

Model bind_model(ModelGraph graph, WeightStore weights) {
  graph.validate_weights(weights);
  return {std::move(graph), std::move(weights)};
}

ForwardResult forward(const ModelGraph& graph, const WeightStore& weights,
                      const Tensor& input) {
  if (input.shape() != graph.input_shape()) {
    throw ShapeError("layer '" + graph.layer(graph.input_node()).id +
                     "': input shape " + shape_to_string(input.shape()) +
                     " does not match graph input " +
                     shape_to_string(graph.input_shape()));
  }
  graph.validate_weights(weights);
  std::vector<Tensor> acts(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const LayerDef& layer = graph.layer(i);
    if (layer.op == OpKind::kInput) {
      acts[i] = input;
      continue;
    }
    std::vector<const Tensor*> ins;
    for (std::size_t up : graph.inputs_of(i)) ins.push_back(&acts[up]);
    try {
      acts[i] = apply_layer(layer, weights, ins);
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + layer.id + "': " + e.what());
    }
  }
  ForwardResult r{acts[graph.output_node()].vec(),
                  acts[graph.feature_tap()].vec()};
  const Tensor& out = acts[graph.output_node()];
  if (!out.all_finite() || !acts[graph.feature_tap()].all_finite()) {
    throw NumericalError("forward produced non-finite values");
  }
  return r;
}

}  // namespace lmask
