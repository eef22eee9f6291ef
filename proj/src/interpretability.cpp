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

#include "lmask/interpretability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

#include "lmask/error.hpp"
#include "lmask/parallel.hpp"
#include "lmask/rng.hpp"

namespace lmask {

namespace {

// Smallest pivot, relative to the largest, accepted from the factorization.
constexpr double kRankTolerance = 1e-12;

template <typename T>
std::optional<double> cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine similarity of vectors of different lengths");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

}  // namespace

Explanation lime_explain(const MaskScorer& scorer, const SegmentMap& seg,
                         const LimeParams& params) {
  if (!is_partition(seg)) throw ValidationError("lime: invalid segment map");
  if (params.n_samples == 0) throw ValidationError("lime: n_samples must be >= 1");
  if (!(params.keep_prob > 0.0 && params.keep_prob < 1.0)) {
    throw ValidationError("lime: keep_prob must lie in (0, 1)");
  }
  if (params.ridge_lambda < 0.0) {
    throw ValidationError("lime: ridge_lambda must be >= 0");
  }
  const std::size_t k = seg.count;
  const std::size_t n = params.n_samples;

  Rng rng(params.seed);
  std::vector<std::vector<std::uint8_t>> samples(
      n, std::vector<std::uint8_t>(k, 0));
  for (auto& z : samples) {
    for (auto& bit : z) bit = rng.uniform() < params.keep_prob ? 1 : 0;
  }

  std::vector<double> y(n);
  parallel_for(n, params.threads, [&](std::size_t i) {
    y[i] = scorer(mask_from_segments(seg, samples[i]));
  });

  std::vector<double> weight(n, 1.0);
  if (params.kernel_width > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const double kept = std::accumulate(samples[i].begin(), samples[i].end(), 0.0);
      const double d = 1.0 - std::sqrt(kept / static_cast<double>(k));
      weight[i] = std::sqrt(
          std::exp(-d * d / (params.kernel_width * params.kernel_width)));
    }
  }

  // Column 0 is the intercept.
  const std::size_t dim = k + 1;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    row(0) = 1.0;
    for (std::size_t j = 0; j < k; ++j) row(j + 1) = samples[i][j];
    gram.noalias() += weight[i] * row * row.transpose();
    rhs += weight[i] * y[i] * row;
  }
  for (std::size_t j = 1; j < dim; ++j) gram(j, j) += params.ridge_lambda;

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  const Eigen::VectorXd pivots = Eigen::MatrixXd(llt.matrixL()).diagonal();
  const double max_pivot = pivots.cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success || !(max_pivot > 0.0) ||
      (pivots.cwiseAbs().minCoeff() / max_pivot) *
              (pivots.cwiseAbs().minCoeff() / max_pivot) <
          kRankTolerance) {
    throw NumericalError(
        "lime: normal equations are rank deficient (increase n_samples or "
        "ridge_lambda)");
  }
  const Eigen::VectorXd beta = llt.solve(rhs);
  if (!beta.allFinite()) throw NumericalError("lime: non-finite coefficients");

  Explanation e;
  e.intercept = beta(0);
  e.scores.assign(beta.data() + 1, beta.data() + dim);
  e.n_samples = n;
  e.seed = params.seed;

  double wsum = 0.0, ymean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    wsum += weight[i];
    ymean += weight[i] * y[i];
  }
  ymean /= wsum;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = e.intercept;
    for (std::size_t j = 0; j < k; ++j) pred += e.scores[j] * samples[i][j];
    ss_res += weight[i] * (y[i] - pred) * (y[i] - pred);
    ss_tot += weight[i] * (y[i] - ymean) * (y[i] - ymean);
  }
  e.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return e;
}

std::string explanation_to_json(const Explanation& e) {
  nlohmann::json doc = {{"target_class", e.target_class},
                        {"intercept", e.intercept},
                        {"scores", e.scores},
                        {"n_samples", e.n_samples},
                        {"seed", e.seed},
                        {"r_squared", e.r_squared}};
  return doc.dump(2) + "\n";
}

Explanation explanation_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    Explanation e;
    e.target_class = doc.at("target_class").get<int>();
    e.intercept = doc.at("intercept").get<double>();
    e.scores = doc.at("scores").get<std::vector<double>>();
    e.n_samples = doc.at("n_samples").get<std::size_t>();
    e.seed = doc.at("seed").get<std::uint64_t>();
    e.r_squared = doc.value("r_squared", 0.0);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("explanation document: ") + ex.what());
  }
}

GroundTruthExplanation ground_truth(const SegmentMap& seg,
                                    std::span<const float> object_mask) {
  if (object_mask.size() != seg.labels.size()) {
    throw ShapeError("ground_truth: object mask has " +
                     std::to_string(object_mask.size()) +
                     " values, segment map has " +
                     std::to_string(seg.labels.size()));
  }
  GroundTruthExplanation gt;
  double total = 0.0;
  for (float v : object_mask) total += v;
  gt.m_avg = total / static_cast<double>(object_mask.size());
  gt.g.assign(seg.count, 0.0);
  for (std::size_t p = 0; p < object_mask.size(); ++p) {
    gt.g.at(seg.labels[p]) += static_cast<double>(object_mask[p]) - gt.m_avg;
  }
  return gt;
}

std::optional<double> cosine_similarity(std::span<const double> a,
                                        std::span<const double> b) {
  return cosine_impl(a, b);
}

std::optional<double> cosine_similarity(std::span<const float> a,
                                        std::span<const float> b) {
  return cosine_impl(a, b);
}

std::optional<double> alignment_score(const GroundTruthExplanation& g,
                                      const Explanation& e) {
  if (g.g.size() != e.scores.size()) {
    throw ShapeError("alignment_score: " + std::to_string(g.g.size()) +
                     " ground-truth entries vs " +
                     std::to_string(e.scores.size()) + " scores");
  }
  return cosine_similarity(std::span<const double>(g.g),
                           std::span<const double>(e.scores));
}

std::map<std::string, double> win_rate(std::span<const StrategyScores> items) {
  if (items.empty()) throw ValidationError("win_rate: no items");
  std::map<std::string, double> wins;
  for (const auto& [name, score] : items.front()) wins[name] = 0.0;
  std::size_t used = 0;
  for (const StrategyScores& item : items) {
    if (item.size() != wins.size() ||
        !std::all_of(item.begin(), item.end(),
                     [&](const auto& kv) { return wins.count(kv.first) != 0; })) {
      throw ValidationError("win_rate: items compare different strategy sets");
    }
    std::optional<double> best;
    for (const auto& [name, score] : item) {
      if (score && (!best || *score > *best)) best = score;
    }
    if (!best) continue;
    std::vector<std::string> winners;
    for (const auto& [name, score] : item) {
      if (score && *score == *best) winners.push_back(name);
    }
    for (const auto& name : winners) {
      wins[name] += 1.0 / static_cast<double>(winners.size());
    }
    ++used;
  }
  if (used == 0) throw ValidationError("win_rate: every alignment score is null");
  for (auto& [name, w] : wins) w /= static_cast<double>(used);
  return wins;
}

Tensor render_overlay(const Tensor& image01, const SegmentMap& seg,
                      const Explanation& e, std::size_t top_k) {
  if (image01.rank() != 3 || image01.dim(0) != 3 ||
      image01.dim(1) != seg.height || image01.dim(2) != seg.width) {
    throw ShapeError("render_overlay: image " +
                     shape_to_string(image01.shape()) +
                     " does not match the segment map");
  }
  if (e.scores.size() != seg.count) {
    throw ShapeError("render_overlay: explanation has " +
                     std::to_string(e.scores.size()) + " scores for " +
                     std::to_string(seg.count) + " segments");
  }
  if (top_k > seg.count) {
    throw ValidationError("render_overlay: top_k exceeds the segment count");
  }
  std::vector<std::size_t> order(seg.count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(e.scores[a]) > std::abs(e.scores[b]);
  });
  // 0 = untouched, 1 = green, 2 = red.
  std::vector<int> tint(seg.count, 0);
  for (std::size_t i = 0; i < top_k; ++i) {
    const double s = e.scores[order[i]];
    tint[order[i]] = s > 0.0 ? 1 : (s < 0.0 ? 2 : 0);
  }
  constexpr float kAlpha = 0.5f;
  Tensor out = image01;
  for (std::size_t y = 0; y < seg.height; ++y) {
    for (std::size_t x = 0; x < seg.width; ++x) {
      const int t = tint[seg.at(y, x)];
      if (t == 0) continue;
      const float color[3] = {t == 2 ? 1.0f : 0.0f, t == 1 ? 1.0f : 0.0f, 0.0f};
      for (std::size_t c = 0; c < 3; ++c) {
        out.at(c, y, x) = (1.0f - kAlpha) * out.at(c, y, x) + kAlpha * color[c];
      }
    }
  }
  return out;
}

}  // namespace lmask
