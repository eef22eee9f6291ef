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

// Segment-ablation curves, their summary metrics, and the masking
// diagnostics (linearity, output collapse, magnitude scaling).

#ifndef LMASK_EVALUATION_HPP_
#define LMASK_EVALUATION_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lmask/graph.hpp"
#include "lmask/perturbation.hpp"
#include "lmask/segmentation.hpp"

namespace lmask {

enum class AblationMode { kRandom, kMostSalientFirst, kLeastSalientFirst };

// Accepts random | most | least (and the long forms most_salient_first,
// least_salient_first).
AblationMode parse_ablation_mode(std::string_view text);
std::string to_string(AblationMode mode);

// Permutation of segment indices in masking order. Sorting is stable with
// ties on the lower index; random mode is a seeded Fisher-Yates shuffle.
std::vector<std::size_t> ablation_order(std::span<const double> scores,
                                        AblationMode mode,
                                        std::uint64_t seed = 0);

struct AblationPoint {
  double fraction_masked = 0.0;
  double accuracy = 0.0;
  double class_entropy = 0.0;  // nats
  double taxonomy_similarity = 0.0;
  double unchanged_fraction = 0.0;
};

struct DatasetItem {
  Tensor image01;
  int label = 0;
  std::optional<std::vector<float>> saliency;     // H x W in [0, 1]
  std::optional<std::vector<float>> object_mask;  // H x W in [0, 1]
};

// Reads a JSON-lines manifest {image, label, saliency?, object_mask?};
// relative paths resolve against the manifest's directory.
std::vector<DatasetItem> load_manifest(const std::filesystem::path& path);

// Class hierarchy from "child parent" lines; the root is its own parent.
// Class index i is looked up under the id std::to_string(i).
class Taxonomy {
 public:
  static Taxonomy parse(std::string_view text);

  bool contains(const std::string& id) const { return parents_.count(id) != 0; }
  // 1 for the root; otherwise 1 + the depth of the shallowest parent.
  std::size_t depth(const std::string& id) const;
  // Wu-Palmer: 2 depth(lcs) / (depth(a) + depth(b)), with the deepest common
  // ancestor as lcs. Throws ValidationError for unknown ids.
  double similarity(const std::string& a, const std::string& b) const;
  double similarity(int a, int b) const {
    return similarity(std::to_string(a), std::to_string(b));
  }

 private:
  std::map<std::string, std::vector<std::string>> parents_;
  std::map<std::string, std::size_t> depth_;
};

// Entropy (nats) of the empirical distribution of predictions.
double class_entropy(std::span<const int> predictions);
double unchanged_fraction(std::span<const int> base, std::span<const int> masked);

// Trapezoidal area; fractions must be strictly increasing from 0 to 1.
double auc(std::span<const std::pair<double, double>> curve);

enum class SegmentAlgorithm { kGrid, kSlic, kQuickshift };

struct SegmenterConfig {
  SegmentAlgorithm algorithm = SegmentAlgorithm::kGrid;
  std::size_t patch_size = 16;
  SlicParams slic;
  QuickshiftParams quickshift;
};

SegmentAlgorithm parse_segment_algorithm(std::string_view text);
std::string to_string(SegmentAlgorithm algorithm);
SegmentMap segment_image(const Tensor& image01, const SegmenterConfig& config);

// Number of segments masked at `fraction` of `count`: ceil(fraction * count)
// with a 1e-9 allowance for representation error in the fraction.
std::size_t segments_to_mask(double fraction, std::size_t count);

std::vector<double> default_fraction_grid();

struct AblationConfig {
  Strategy strategy;
  AblationMode mode = AblationMode::kRandom;
  std::uint64_t seed = 0;
  std::vector<double> fractions = default_fraction_grid();
  SegmenterConfig segmenter;
  const Taxonomy* taxonomy = nullptr;  // exact-match similarity when null
  int threads = 1;
};

int top1(std::span<const float> logits);

std::vector<AblationPoint> ablation_curve(const Model& model,
                                          std::span<const DatasetItem> dataset,
                                          const AblationConfig& config);

std::string ablation_csv(std::span<const AblationPoint> curve);
std::vector<AblationPoint> parse_ablation_csv(std::string_view text);

struct DiagnosticsResult {
  std::optional<double> linearity_cosine;
  std::vector<std::pair<std::size_t, double>> collapse_curve;
  std::vector<std::pair<std::size_t, double>> magnitude_curve;
  std::size_t patch_masks = 0;
};

// cos(f(x), sum_i f_m(x, m_i)) over penultimate features, m_i the patch
// indicator masks of a grid with the given patch size.
double linearity_test(const Model& model, const Tensor& image01,
                      std::size_t patch_size, const Strategy& strategy,
                      int threads = 1);

// Mean over pairs of cos(f_m(x1n, m_n), f_m(x2n, m_n)) - cos(f(x1), f(x2))
// per size n, where xin is xi resized to n x n at the top-left of a zero
// canvas and m_n keeps that square.
std::vector<std::pair<std::size_t, double>> collapse_test(
    const Model& model, std::span<const std::pair<Tensor, Tensor>> pairs,
    std::span<const std::size_t> sizes, const Strategy& strategy,
    int threads = 1);

// Mean L2 norm of f_m(x, m) where m keeps a centered n x n square.
std::vector<std::pair<std::size_t, double>> magnitude_test(
    const Model& model, std::span<const Tensor> images,
    std::span<const std::size_t> sizes, const Strategy& strategy,
    int threads = 1);

double pearson_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace lmask

#endif  // LMASK_EVALUATION_HPP_
