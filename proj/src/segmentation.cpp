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

#include "lmask/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "lmask/error.hpp"
#include "lmask/parallel.hpp"

namespace lmask {

namespace {

constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();

void require_rgb(const Tensor& image, const char* what) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError(std::string(what) + ": expected a 3 x H x W image, got " +
                     shape_to_string(image.shape()));
  }
}

// sRGB companding, then the sRGB -> XYZ matrix for a D65 white point.
constexpr double kXyzFromRgb[3][3] = {{0.412453, 0.357580, 0.180423},
                                      {0.212671, 0.715160, 0.072169},
                                      {0.019334, 0.119193, 0.950227}};
constexpr double kWhite[3] = {0.95047, 1.0, 1.08883};

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  // Linear segment below (6/29)^3.
  return t > 0.008856 ? std::cbrt(t) : 7.787 * t + 16.0 / 116.0;
}

}  // namespace

bool is_partition(const SegmentMap& seg) {
  if (seg.labels.size() != seg.height * seg.width || seg.count == 0) {
    return false;
  }
  std::vector<bool> used(seg.count, false);
  for (std::uint32_t l : seg.labels) {
    if (l >= seg.count) return false;
    used[l] = true;
  }
  return std::all_of(used.begin(), used.end(), [](bool b) { return b; });
}

void compact_labels(SegmentMap& seg) {
  std::map<std::uint32_t, std::uint32_t> remap;
  for (auto& l : seg.labels) {
    auto [it, inserted] =
        remap.emplace(l, static_cast<std::uint32_t>(remap.size()));
    l = it->second;
  }
  seg.count = remap.size();
}

std::vector<std::size_t> segment_sizes(const SegmentMap& seg) {
  std::vector<std::size_t> sizes(seg.count, 0);
  for (std::uint32_t l : seg.labels) ++sizes.at(l);
  return sizes;
}

SegmentMap grid_patches(std::size_t height, std::size_t width,
                        std::size_t patch_size) {
  if (patch_size == 0) throw ValidationError("patch size must be >= 1");
  if (height == 0 || width == 0) throw ShapeError("empty image");
  const std::size_t cols = (width + patch_size - 1) / patch_size;
  const std::size_t rows = (height + patch_size - 1) / patch_size;
  SegmentMap seg{height, width, std::vector<std::uint32_t>(height * width),
                 rows * cols};
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      seg.labels[y * width + x] =
          static_cast<std::uint32_t>((y / patch_size) * cols + x / patch_size);
    }
  }
  return seg;
}

Tensor rgb_to_lab(const Tensor& image01) {
  require_rgb(image01, "rgb_to_lab");
  const std::size_t h = image01.dim(1), w = image01.dim(2);
  Tensor lab = Tensor::chw(3, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double rgb[3];
      for (std::size_t c = 0; c < 3; ++c) {
        rgb[c] = srgb_to_linear(
            std::clamp(static_cast<double>(image01.at(c, y, x)), 0.0, 1.0));
      }
      double f[3];
      for (int r = 0; r < 3; ++r) {
        const double v = kXyzFromRgb[r][0] * rgb[0] + kXyzFromRgb[r][1] * rgb[1] +
                         kXyzFromRgb[r][2] * rgb[2];
        f[r] = lab_f(v / kWhite[r]);
      }
      lab.at(0, y, x) = static_cast<float>(116.0 * f[1] - 16.0);
      lab.at(1, y, x) = static_cast<float>(500.0 * (f[0] - f[1]));
      lab.at(2, y, x) = static_cast<float>(200.0 * (f[1] - f[2]));
    }
  }
  return lab;
}

SegmentMap slic(const Tensor& image01, const SlicParams& params) {
  require_rgb(image01, "slic");
  const std::size_t h = image01.dim(1), w = image01.dim(2);
  const std::size_t n_pixels = h * w;
  if (params.n_segments == 0) throw ValidationError("slic: n_segments must be >= 1");
  if (params.n_segments > n_pixels) {
    throw ValidationError("slic: n_segments " +
                          std::to_string(params.n_segments) +
                          " exceeds pixel count " + std::to_string(n_pixels));
  }
  if (!(params.compactness > 0.0)) {
    throw ValidationError("slic: compactness must be positive");
  }
  const Tensor lab = rgb_to_lab(image01);

  // Seed grid with roughly the image aspect ratio.
  const double k = static_cast<double>(params.n_segments);
  std::size_t nx = static_cast<std::size_t>(std::lround(
      std::sqrt(k * static_cast<double>(w) / static_cast<double>(h))));
  nx = std::clamp<std::size_t>(nx, 1, w);
  std::size_t ny = static_cast<std::size_t>(std::lround(k / static_cast<double>(nx)));
  ny = std::clamp<std::size_t>(ny, 1, h);
  const double cell_h = static_cast<double>(h) / static_cast<double>(ny);
  const double cell_w = static_cast<double>(w) / static_cast<double>(nx);
  const double step = std::sqrt(cell_h * cell_w);
  const double spatial_weight =
      (params.compactness / step) * (params.compactness / step);

  struct Center {
    double l, a, b, y, x;
  };
  std::vector<Center> centers;
  for (std::size_t i = 0; i < ny; ++i) {
    for (std::size_t j = 0; j < nx; ++j) {
      const double cy = (static_cast<double>(i) + 0.5) * cell_h;
      const double cx = (static_cast<double>(j) + 0.5) * cell_w;
      const auto py = std::min(static_cast<std::size_t>(cy), h - 1);
      const auto px = std::min(static_cast<std::size_t>(cx), w - 1);
      centers.push_back({lab.at(0, py, px), lab.at(1, py, px),
                         lab.at(2, py, px), cy, cx});
    }
  }

  const double reach = std::max(cell_h, cell_w);
  std::vector<std::uint32_t> assign(n_pixels, kUnset);
  std::vector<double> best(n_pixels);
  auto distance = [&](const Center& c, std::size_t y, std::size_t x) {
    const double dl = lab.at(0, y, x) - c.l;
    const double da = lab.at(1, y, x) - c.a;
    const double db = lab.at(2, y, x) - c.b;
    const double dy = static_cast<double>(y) + 0.5 - c.y;
    const double dx = static_cast<double>(x) + 0.5 - c.x;
    return dl * dl + da * da + db * db + spatial_weight * (dy * dy + dx * dx);
  };

  for (std::size_t iter = 0; iter < std::max<std::size_t>(params.max_iters, 1);
       ++iter) {
    std::fill(assign.begin(), assign.end(), kUnset);
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      const Center& c = centers[ci];
      const auto y0 = static_cast<std::ptrdiff_t>(std::floor(c.y - reach));
      const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(c.y + reach));
      const auto x0 = static_cast<std::ptrdiff_t>(std::floor(c.x - reach));
      const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(c.x + reach));
      for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(y0, 0);
           y < std::min<std::ptrdiff_t>(y1, static_cast<std::ptrdiff_t>(h)); ++y) {
        for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(x0, 0);
             x < std::min<std::ptrdiff_t>(x1, static_cast<std::ptrdiff_t>(w));
             ++x) {
          const auto uy = static_cast<std::size_t>(y);
          const auto ux = static_cast<std::size_t>(x);
          const double d = distance(c, uy, ux);
          const std::size_t p = uy * w + ux;
          // Strict comparison: ties keep the lower center index.
          if (d < best[p]) {
            best[p] = d;
            assign[p] = static_cast<std::uint32_t>(ci);
          }
        }
      }
    }
    for (std::size_t p = 0; p < n_pixels; ++p) {
      if (assign[p] != kUnset) continue;
      const std::size_t y = p / w, x = p % w;
      for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        const double d = distance(centers[ci], y, x);
        if (d < best[p]) {
          best[p] = d;
          assign[p] = static_cast<std::uint32_t>(ci);
        }
      }
    }
    std::vector<std::array<double, 6>> sums(centers.size(), {0, 0, 0, 0, 0, 0});
    for (std::size_t p = 0; p < n_pixels; ++p) {
      const std::size_t y = p / w, x = p % w;
      auto& s = sums[assign[p]];
      s[0] += lab.at(0, y, x);
      s[1] += lab.at(1, y, x);
      s[2] += lab.at(2, y, x);
      s[3] += static_cast<double>(y) + 0.5;
      s[4] += static_cast<double>(x) + 0.5;
      s[5] += 1.0;
    }
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      const auto& s = sums[ci];
      if (s[5] == 0.0) continue;
      centers[ci] = {s[0] / s[5], s[1] / s[5], s[2] / s[5], s[3] / s[5],
                     s[4] / s[5]};
    }
  }

  // Connectivity: relabel 4-connected components in raster order; a
  // component below min_size joins the segment adjacent to it.
  const std::size_t min_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(0.5 * static_cast<double>(n_pixels) /
                                  static_cast<double>(centers.size())));
  SegmentMap seg{h, w, std::vector<std::uint32_t>(n_pixels, kUnset), 0};
  std::vector<std::size_t> component;
  std::uint32_t next_label = 0;
  for (std::size_t start = 0; start < n_pixels; ++start) {
    if (seg.labels[start] != kUnset) continue;
    const std::uint32_t source = assign[start];
    component.clear();
    component.push_back(start);
    seg.labels[start] = next_label;
    std::uint32_t adjacent = kUnset;
    for (std::size_t head = 0; head < component.size(); ++head) {
      const std::size_t p = component[head];
      const std::size_t y = p / w, x = p % w;
      const std::array<std::pair<bool, std::size_t>, 4> nbrs = {{
          {y > 0, p - w}, {x > 0, p - 1}, {x + 1 < w, p + 1}, {y + 1 < h, p + w}}};
      for (const auto& [valid, q] : nbrs) {
        if (!valid) continue;
        if (seg.labels[q] == kUnset && assign[q] == source) {
          seg.labels[q] = next_label;
          component.push_back(q);
        } else if (seg.labels[q] != kUnset && seg.labels[q] != next_label &&
                   adjacent == kUnset) {
          adjacent = seg.labels[q];
        }
      }
    }
    if (component.size() < min_size && adjacent != kUnset) {
      for (std::size_t p : component) seg.labels[p] = adjacent;
    } else {
      ++next_label;
    }
  }
  seg.count = next_label;
  return seg;
}

SegmentMap quickshift(const Tensor& image01, const QuickshiftParams& params,
                      int threads) {
  require_rgb(image01, "quickshift");
  if (!(params.kernel_size > 0.0)) {
    throw ValidationError("quickshift: kernel_size must be positive");
  }
  const std::size_t h = image01.dim(1), w = image01.dim(2);
  const std::size_t n = h * w;
  const Tensor lab = rgb_to_lab(image01);
  std::vector<std::array<double, 3>> color(n);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        color[y * w + x][c] = params.ratio * lab.at(c, y, x);
      }
    }
  }
  const auto radius =
      static_cast<std::ptrdiff_t>(std::ceil(3.0 * params.kernel_size));
  const double inv_two_sigma_sq =
      -0.5 / (params.kernel_size * params.kernel_size);
  const auto ih = static_cast<std::ptrdiff_t>(h);
  const auto iw = static_cast<std::ptrdiff_t>(w);

  auto joint_dist_sq = [&](std::size_t p, std::size_t q, std::ptrdiff_t dy,
                           std::ptrdiff_t dx) {
    double d = static_cast<double>(dy * dy + dx * dx);
    for (std::size_t c = 0; c < 3; ++c) {
      const double dc = color[p][c] - color[q][c];
      d += dc * dc;
    }
    return d;
  };

  // Window scan in fixed (dy, dx) order per pixel; rows are independent.
  std::vector<double> density(n, 0.0);
  parallel_for(h, threads, [&](std::size_t y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      double acc = 0.0;
      for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy) {
        const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
        if (yy < 0 || yy >= ih) continue;
        for (std::ptrdiff_t dx = -radius; dx <= radius; ++dx) {
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (xx < 0 || xx >= iw) continue;
          const std::size_t q = static_cast<std::size_t>(yy * iw + xx);
          acc += std::exp(joint_dist_sq(p, q, dy, dx) * inv_two_sigma_sq);
        }
      }
      density[p] = acc;
    }
  });

  auto denser = [&](std::size_t a, std::size_t b) {
    return density[a] > density[b] || (density[a] == density[b] && a < b);
  };

  std::vector<std::size_t> parent(n);
  parallel_for(h, threads, [&](std::size_t y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      std::size_t best_q = p;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy) {
        const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
        if (yy < 0 || yy >= ih) continue;
        for (std::ptrdiff_t dx = -radius; dx <= radius; ++dx) {
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (xx < 0 || xx >= iw) continue;
          const std::size_t q = static_cast<std::size_t>(yy * iw + xx);
          if (!denser(q, p)) continue;
          const double d = joint_dist_sq(p, q, dy, dx);
          if (d < best_d || (d == best_d && q < best_q)) {
            best_d = d;
            best_q = q;
          }
        }
      }
      parent[p] = (best_q != p && std::sqrt(best_d) <= params.max_dist)
                      ? best_q
                      : p;
    }
  });

  // Parents are strictly denser, so every chain ends at a root.
  SegmentMap seg{h, w, std::vector<std::uint32_t>(n), 0};
  std::vector<std::size_t> root(n);
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t r = p;
    while (parent[r] != r) r = parent[r];
    root[p] = r;
  }
  std::vector<std::uint32_t> root_label(n, kUnset);
  std::uint32_t next_label = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (root_label[root[p]] == kUnset) root_label[root[p]] = next_label++;
    seg.labels[p] = root_label[root[p]];
  }
  seg.count = next_label;
  return seg;
}

std::vector<double> segment_saliency(const SegmentMap& seg,
                                     std::span<const float> saliency) {
  if (saliency.size() != seg.labels.size()) {
    throw ShapeError("segment_saliency: saliency has " +
                     std::to_string(saliency.size()) + " values, image has " +
                     std::to_string(seg.labels.size()) + " pixels");
  }
  std::vector<double> scores(seg.count, 0.0);
  for (std::size_t p = 0; p < saliency.size(); ++p) {
    scores.at(seg.labels[p]) += saliency[p];
  }
  return scores;
}

Mask mask_from_segments(const SegmentMap& seg,
                        std::span<const std::uint8_t> keep) {
  if (keep.size() != seg.count) {
    throw ShapeError("mask_from_segments: " + std::to_string(keep.size()) +
                     " flags for " + std::to_string(seg.count) + " segments");
  }
  Tensor grid = Tensor::chw(1, seg.height, seg.width);
  for (std::size_t p = 0; p < seg.labels.size(); ++p) {
    grid[p] = keep[seg.labels[p]] ? 1.0f : 0.0f;
  }
  return Mask(std::move(grid));
}

}  // namespace lmask
