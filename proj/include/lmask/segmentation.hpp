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

#ifndef LMASK_SEGMENTATION_HPP_
#define LMASK_SEGMENTATION_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lmask/masking.hpp"
#include "lmask/tensor.hpp"

namespace lmask {

// Per-pixel labels in [0, count), every label used at least once.
struct SegmentMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> labels;  // row-major
  std::size_t count = 0;

  std::uint32_t at(std::size_t y, std::size_t x) const {
    return labels[y * width + x];
  }
};

// True iff every label is < count and every label in [0, count) occurs.
bool is_partition(const SegmentMap& seg);

// Renumbers labels to [0, count) in order of first raster appearance.
void compact_labels(SegmentMap& seg);

std::vector<std::size_t> segment_sizes(const SegmentMap& seg);

// Square patches numbered row-major; the last row/column may be ragged.
SegmentMap grid_patches(std::size_t height, std::size_t width,
                        std::size_t patch_size = 16);

struct SlicParams {
  std::size_t n_segments = 196;
  double compactness = 10.0;
  std::size_t max_iters = 10;
};

// k-means over (CIELAB, y, x) seeded on a regular grid, followed by
// merging of small disconnected fragments into an adjacent segment.
SegmentMap slic(const Tensor& image01, const SlicParams& params = {});

struct QuickshiftParams {
  double kernel_size = 2.0;
  double max_dist = 200.0;
  double ratio = 0.2;
};

// Gaussian density over (ratio * CIELAB, y, x) in a window of radius
// ceil(3 * kernel_size); each pixel links to its closest denser neighbour
// within the window unless that link is longer than max_dist. Density ties
// count the smaller raster index as denser.
SegmentMap quickshift(const Tensor& image01, const QuickshiftParams& params = {},
                      int threads = 1);

// sRGB in [0, 1] to CIELAB (D65 white), 3 x H x W in and out.
Tensor rgb_to_lab(const Tensor& image01);

// Sum of saliency over the pixels of each segment.
std::vector<double> segment_saliency(const SegmentMap& seg,
                                     std::span<const float> saliency);

// Pixel mask that keeps exactly the segments with keep[label] != 0.
Mask mask_from_segments(const SegmentMap& seg,
                        std::span<const std::uint8_t> keep);

}  // namespace lmask

#endif  // LMASK_SEGMENTATION_HPP_
