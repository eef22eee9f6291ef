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

#include "lmask/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <system_error>

#include "lmask/error.hpp"

namespace lmask {

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(std::span<const std::uint8_t> bytes) : in_(bytes) {}

  std::string magic() {
    if (in_.size() < 2) throw IoError("netpbm: file too short");
    pos_ = 2;
    return std::string(in_.begin(), in_.begin() + 2);
  }

  // Next whitespace-separated unsigned integer, skipping '#' comments.
  std::uint32_t number(const char* what) {
    skip_space();
    std::uint64_t v = 0;
    std::size_t digits = 0;
    while (pos_ < in_.size() && std::isdigit(in_[pos_])) {
      v = v * 10 + (in_[pos_++] - '0');
      if (v > UINT32_MAX) throw IoError(std::string("netpbm: ") + what + " overflows");
      ++digits;
    }
    if (digits == 0) throw IoError(std::string("netpbm: expected ") + what);
    return static_cast<std::uint32_t>(v);
  }

  // Binary rasters start after exactly one whitespace byte.
  std::size_t raster_start() {
    if (pos_ >= in_.size() || !std::isspace(in_[pos_])) {
      throw IoError("netpbm: missing whitespace before raster");
    }
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < in_.size()) {
      if (in_[pos_] == '#') {
        while (pos_ < in_.size() && in_[pos_] != '\n') ++pos_;
      } else if (std::isspace(in_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_dims(std::uint32_t w, std::uint32_t h, std::uint32_t maxval) {
  if (w == 0 || h == 0) throw IoError("netpbm: zero image dimension");
  if (maxval == 0 || maxval > 65535) throw IoError("netpbm: bad maxval");
}

std::uint32_t sample_at(std::span<const std::uint8_t> raster, std::size_t i,
                        bool wide) {
  return wide ? (static_cast<std::uint32_t>(raster[2 * i]) << 8) |
                    raster[2 * i + 1]
              : raster[i];
}

std::string header(const char* magic, std::size_t w, std::size_t h,
                   std::uint32_t maxval) {
  return std::string(magic) + "\n" + std::to_string(w) + " " +
         std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
}

}  // namespace

Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  HeaderParser p(bytes);
  if (p.magic() != "P6") throw IoError("PPM: expected P6 magic");
  const std::uint32_t w = p.number("width");
  const std::uint32_t h = p.number("height");
  const std::uint32_t maxval = p.number("maxval");
  check_dims(w, h, maxval);
  const std::size_t start = p.raster_start();
  const bool wide = maxval > 255;
  const std::size_t n = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - start < n * (wide ? 2 : 1)) {
    throw IoError("PPM: truncated raster");
  }
  auto raster = bytes.subspan(start);
  Tensor img = Tensor::chw(3, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t i = (y * w + x) * 3 + c;
        img.at(c, y, x) = static_cast<float>(sample_at(raster, i, wide)) /
                          static_cast<float>(maxval);
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_ppm(const Tensor& image01) {
  if (image01.rank() != 3 || image01.dim(0) != 3) {
    throw ShapeError("PPM: expected a 3 x H x W image, got " +
                     shape_to_string(image01.shape()));
  }
  const std::size_t h = image01.dim(1), w = image01.dim(2);
  const std::string head = header("P6", w, h, 255);
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.reserve(out.size() + h * w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(image01.at(c, y, x), 0.0f, 1.0f);
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
      }
    }
  }
  return out;
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  HeaderParser p(bytes);
  const std::string magic = p.magic();
  if (magic != "P5" && magic != "P2") throw IoError("PGM: expected P5 or P2");
  GrayImage img;
  img.width = p.number("width");
  img.height = p.number("height");
  img.maxval = p.number("maxval");
  check_dims(static_cast<std::uint32_t>(img.width),
             static_cast<std::uint32_t>(img.height), img.maxval);
  const std::size_t n = img.width * img.height;
  img.values.resize(n);
  if (magic == "P2") {
    for (auto& v : img.values) {
      v = p.number("sample");
      if (v > img.maxval) throw IoError("PGM: sample exceeds maxval");
    }
    return img;
  }
  const std::size_t start = p.raster_start();
  const bool wide = img.maxval > 255;
  if (bytes.size() - start < n * (wide ? 2 : 1)) {
    throw IoError("PGM: truncated raster");
  }
  auto raster = bytes.subspan(start);
  for (std::size_t i = 0; i < n; ++i) {
    img.values[i] = sample_at(raster, i, wide);
    if (img.values[i] > img.maxval) throw IoError("PGM: sample exceeds maxval");
  }
  return img;
}

std::vector<std::uint8_t> encode_pgm_binary(const GrayImage& image) {
  const std::string head = header("P5", image.width, image.height, image.maxval);
  std::vector<std::uint8_t> out(head.begin(), head.end());
  for (std::uint32_t v : image.values) {
    if (image.maxval > 255) out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

std::vector<std::uint8_t> encode_pgm_ascii(const GrayImage& image) {
  std::string text = header("P2", image.width, image.height, image.maxval);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      if (x) text += ' ';
      text += std::to_string(image.values[y * image.width + x]);
    }
    text += '\n';
  }
  return {text.begin(), text.end()};
}

Mask mask_from_gray(const GrayImage& image) {
  Mask m = Mask::zeros(image.height, image.width);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      m.set(y, x, image.values[y * image.width + x] >= 128);
    }
  }
  return m;
}

GrayImage gray_from_mask(const Mask& mask) {
  GrayImage img{mask.height(), mask.width(), 255, {}};
  img.values.reserve(mask.height() * mask.width());
  for (float v : mask.grid().data()) img.values.push_back(v != 0.0f ? 255 : 0);
  return img;
}

std::vector<float> unit_from_gray(const GrayImage& image) {
  std::vector<float> out(image.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(image.values[i]) /
             static_cast<float>(image.maxval);
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return bytes;
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename onto '" + path.string() + "'");
  }
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view text) {
  write_file_atomic(
      path, std::span<const std::uint8_t>(
                reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Tensor read_ppm_file(const std::filesystem::path& path) {
  try {
    return decode_ppm(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

GrayImage read_pgm_file(const std::filesystem::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace lmask
