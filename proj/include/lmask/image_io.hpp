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

// Netpbm codecs (PPM P6, PGM P5/P2) and file helpers.

#ifndef LMASK_IMAGE_IO_HPP_
#define LMASK_IMAGE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmask/masking.hpp"
#include "lmask/tensor.hpp"

namespace lmask {

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint32_t maxval = 255;
  std::vector<std::uint32_t> values;  // row-major
};

// P6 with maxval <= 65535, returned as 3 x H x W scaled to [0, 1].
Tensor decode_ppm(std::span<const std::uint8_t> bytes);
// Values are clamped to [0, 1] and rounded to 8 bits.
std::vector<std::uint8_t> encode_ppm(const Tensor& image01);

// Binary (P5) or ASCII (P2) graymap.
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm_binary(const GrayImage& image);
std::vector<std::uint8_t> encode_pgm_ascii(const GrayImage& image);

// Pixel values >= 128 are unmasked.
Mask mask_from_gray(const GrayImage& image);
GrayImage gray_from_mask(const Mask& mask);
// value / maxval, as an H x W row-major array.
std::vector<float> unit_from_gray(const GrayImage& image);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temp file, then renames over the destination.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view text);

Tensor read_ppm_file(const std::filesystem::path& path);
GrayImage read_pgm_file(const std::filesystem::path& path);

}  // namespace lmask

#endif  // LMASK_IMAGE_IO_HPP_
