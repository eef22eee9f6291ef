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

// LIME over image segments, and the metrics used to compare explanations
// against object masks.

#ifndef LMASK_INTERPRETABILITY_HPP_
#define LMASK_INTERPRETABILITY_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmask/masking.hpp"
#include "lmask/segmentation.hpp"

namespace lmask {

struct Explanation {
  std::vector<double> scores;  // one per segment
  double intercept = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  int target_class = -1;
  double r_squared = 0.0;  // of the surrogate fit on its own samples
};

struct LimeParams {
  std::size_t n_samples = 500;
  double keep_prob = 0.5;
  double ridge_lambda = 1e-6;
  std::uint64_t seed = 0;
  // Exponential proximity kernel on the cosine distance to the all-kept
  // vector; 0 gives every sample the same weight.
  double kernel_width = 0.0;
  int threads = 1;
};

// Maps a pixel mask to the scalar being explained. Must be deterministic
// and safe to call concurrently when params.threads > 1.
using MaskScorer = std::function<double(const Mask&)>;

// Samples are drawn serially from the seed before any scorer call, so the
// result does not depend on params.threads. The intercept is not penalized.
// Throws NumericalError when the normal equations are rank deficient.
Explanation lime_explain(const MaskScorer& scorer, const SegmentMap& seg,
                         const LimeParams& params = {});

std::string explanation_to_json(const Explanation& e);
Explanation explanation_from_json(std::string_view text);

struct GroundTruthExplanation {
  std::vector<double> g;  // per-segment sum of (mask - mean(mask))
  double m_avg = 0.0;
};

GroundTruthExplanation ground_truth(const SegmentMap& seg,
                                    std::span<const float> object_mask);

// Cosine similarity; nullopt when either vector has zero norm.
std::optional<double> cosine_similarity(std::span<const double> a,
                                        std::span<const double> b);
std::optional<double> cosine_similarity(std::span<const float> a,
                                        std::span<const float> b);

std::optional<double> alignment_score(const GroundTruthExplanation& g,
                                      const Explanation& e);

using StrategyScores = std::map<std::string, std::optional<double>>;

// Fraction of items on which each strategy scores best. Exact ties split
// the item evenly; strategies with a null score cannot win an item, and
// items where every score is null are skipped. Throws ValidationError when
// no item is usable or the strategy sets differ.
std::map<std::string, double> win_rate(std::span<const StrategyScores> items);

// The top_k segments by |score| are blended 50/50 with green (positive) or
// red (negative). Ties in |score| go to the lower segment index.
Tensor render_overlay(const Tensor& image01, const SegmentMap& seg,
                      const Explanation& e, std::size_t top_k = 10);

}  // namespace lmask

#endif  // LMASK_INTERPRETABILITY_HPP_
