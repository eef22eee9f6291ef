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

#include "lmask/weights.hpp"

#include <bit>
#include <cstring>

#include "lmask/error.hpp"

namespace lmask {

namespace {

constexpr char kMagic[4] = {'L', 'M', 'W', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw IoError(std::string("LMW1: truncated payload while reading ") +
                    what);
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return bytes(1, what)[0]; }
  std::uint16_t u16(const char* what) {
    auto b = bytes(2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    auto b = bytes(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

void WeightStore::insert(const std::string& name, Tensor tensor) {
  if (!tensors_.emplace(name, std::move(tensor)).second) {
    throw ValidationError("duplicate weight name '" + name + "'");
  }
}

bool WeightStore::contains(const std::string& name) const {
  return tensors_.count(name) != 0;
}

const Tensor& WeightStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw ValidationError("missing weight tensor '" + name + "'");
  }
  return it->second;
}

std::vector<std::uint8_t> save_weights(const WeightStore& store) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, tensor] : store.tensors()) {
    if (name.size() > UINT16_MAX) {
      throw ValidationError("weight name too long: " + name.substr(0, 32));
    }
    if (tensor.rank() > UINT8_MAX) {
      throw ValidationError("tensor '" + name + "' has too many dimensions");
    }
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : tensor.data()) w.f32(v);
  }
  return w.take();
}

WeightStore load_weights(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw IoError("LMW1: bad magic");
  }
  const std::uint32_t count = r.u32("tensor count");
  WeightStore store;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint16_t name_len = r.u16("name length");
    auto name_bytes = r.bytes(name_len, "name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint8_t ndim = r.u8("ndim");
    if (ndim == 0) throw IoError("LMW1: tensor '" + name + "' has rank 0");
    Shape shape(ndim);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.u32("dims");
      if (d == 0) throw IoError("LMW1: tensor '" + name + "' has a zero dim");
      n *= d;
    }
    if (n > bytes.size() / 4) {
      throw IoError("LMW1: truncated payload in tensor '" + name + "'");
    }
    std::vector<float> data(n);
    for (auto& v : data) v = std::bit_cast<float>(r.u32("tensor data"));
    if (store.contains(name)) {
      throw ValidationError("LMW1: duplicate tensor name '" + name + "'");
    }
    store.insert(name, Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw IoError("LMW1: trailing bytes after last tensor");
  return store;
}

}  // namespace lmask
