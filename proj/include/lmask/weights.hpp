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

// Named tensor store and its LMW1 binary encoding.
//
// LMW1 layout (little-endian, no alignment padding):
//   "LMW1" | u32 count | count x { u16 name_len | name bytes | u8 ndim |
//                                   ndim x u32 dims | prod(dims) x f32 }
// Tensors are written in ascending name order.

#ifndef LMASK_WEIGHTS_HPP_
#define LMASK_WEIGHTS_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lmask/tensor.hpp"

namespace lmask {

class WeightStore {
 public:
  // Throws ValidationError if the name is already present.
  void insert(const std::string& name, Tensor tensor);

  bool contains(const std::string& name) const;
  // Throws ValidationError naming the missing tensor.
  const Tensor& get(const std::string& name) const;

  std::size_t size() const { return tensors_.size(); }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  std::map<std::string, Tensor> tensors_;
};

std::vector<std::uint8_t> save_weights(const WeightStore& store);
// Throws IoError on bad magic or truncation, ValidationError on duplicates.
WeightStore load_weights(std::span<const std::uint8_t> bytes);

}  // namespace lmask

#endif  // LMASK_WEIGHTS_HPP_
