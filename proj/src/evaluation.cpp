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

#include "lmask/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lmask/error.hpp"
#include "lmask/image_io.hpp"
#include "lmask/interpretability.hpp"
#include "lmask/parallel.hpp"
#include "lmask/rng.hpp"

namespace lmask {

namespace {

constexpr char kCurveHeader[] =
    "fraction,accuracy,class_entropy,taxonomy_similarity,unchanged_fraction";

std::vector<float> load_unit_map(const std::filesystem::path& path,
                                 const Tensor& image, const char* what) {
  const GrayImage g = read_pgm_file(path);
  if (g.height != image.dim(1) || g.width != image.dim(2)) {
    throw ShapeError(std::string(what) + " '" + path.string() + "' is " +
                     std::to_string(g.width) + "x" + std::to_string(g.height) +
                     ", image is " + std::to_string(image.dim(2)) + "x" +
                     std::to_string(image.dim(1)));
  }
  return unit_from_gray(g);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<double> features_as_double(const std::vector<float>& f) {
  return {f.begin(), f.end()};
}

double cosine_or_throw(std::span<const double> a, std::span<const double> b,
                       const char* what) {
  const auto c = cosine_similarity(a, b);
  if (!c) {
    throw NumericalError(std::string(what) +
                         ": cosine undefined for a zero feature vector");
  }
  return *c;
}

}  // namespace

AblationMode parse_ablation_mode(std::string_view text) {
  if (text == "random") return AblationMode::kRandom;
  if (text == "most" || text == "most_salient_first") {
    return AblationMode::kMostSalientFirst;
  }
  if (text == "least" || text == "least_salient_first") {
    return AblationMode::kLeastSalientFirst;
  }
  throw ValidationError("unknown ablation mode '" + std::string(text) + "'");
}

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kRandom:
      return "random";
    case AblationMode::kMostSalientFirst:
      return "most_salient_first";
    case AblationMode::kLeastSalientFirst:
      return "least_salient_first";
  }
  return "?";
}

std::vector<std::size_t> ablation_order(std::span<const double> scores,
                                        AblationMode mode,
                                        std::uint64_t seed) {
  if (scores.empty()) throw ValidationError("ablation_order: no segments");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  switch (mode) {
    case AblationMode::kRandom: {
      Rng rng(seed);
      rng.shuffle(std::span<std::size_t>(order));
      break;
    }
    case AblationMode::kMostSalientFirst:
      std::stable_sort(order.begin(), order.end(),
                       [&](auto a, auto b) { return scores[a] > scores[b]; });
      break;
    case AblationMode::kLeastSalientFirst:
      std::stable_sort(order.begin(), order.end(),
                       [&](auto a, auto b) { return scores[a] < scores[b]; });
      break;
  }
  return order;
}

std::vector<DatasetItem> load_manifest(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<DatasetItem> items;
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where =
        path.string() + ":" + std::to_string(lineno);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("image") || !doc["image"].is_string() ||
        !doc.contains("label") || !doc["label"].is_number_integer()) {
      throw ValidationError(where + ": needs string 'image' and integer 'label'");
    }
    DatasetItem item;
    item.image01 = read_ppm_file(resolve(doc["image"].get<std::string>()));
    item.label = doc["label"].get<int>();
    for (const char* key : {"saliency", "object_mask"}) {
      if (!doc.contains(key) || doc[key].is_null()) continue;
      if (!doc[key].is_string()) {
        throw ValidationError(where + ": '" + key + "' must be a path");
      }
      auto values =
          load_unit_map(resolve(doc[key].get<std::string>()), item.image01, key);
      (std::string_view(key) == "saliency" ? item.saliency : item.object_mask) =
          std::move(values);
    }
    items.push_back(std::move(item));
  }
  return items;
}

Taxonomy Taxonomy::parse(std::string_view text) {
  Taxonomy t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> roots;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::istringstream fields(s);
    std::string child, parent, extra;
    if (!(fields >> child >> parent) || (fields >> extra)) {
      throw ValidationError("hierarchy line " + std::to_string(lineno) +
                            ": expected 'child_id parent_id'");
    }
    auto& ps = t.parents_[child];
    if (child == parent) {
      roots.push_back(child);
    } else if (std::find(ps.begin(), ps.end(), parent) == ps.end()) {
      ps.push_back(parent);
    }
    t.parents_.try_emplace(parent);
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  if (roots.size() != 1) {
    throw ValidationError("hierarchy must have exactly one root, found " +
                          std::to_string(roots.size()));
  }
  if (!t.parents_.at(roots[0]).empty()) {
    throw ValidationError("hierarchy root '" + roots[0] + "' has a parent");
  }

  // Depths by memoized recursion; an id on the current path means a cycle.
  std::set<std::string> on_path;
  std::function<std::size_t(const std::string&)> visit =
      [&](const std::string& id) -> std::size_t {
    if (auto it = t.depth_.find(id); it != t.depth_.end()) return it->second;
    const auto& ps = t.parents_.at(id);
    if (ps.empty()) {
      if (id != roots[0]) {
        throw ValidationError("hierarchy id '" + id +
                              "' is not connected to the root");
      }
      return t.depth_[id] = 1;
    }
    if (!on_path.insert(id).second) {
      throw ValidationError("hierarchy has a cycle through '" + id + "'");
    }
    std::size_t best = SIZE_MAX;
    for (const auto& p : ps) best = std::min(best, visit(p));
    on_path.erase(id);
    return t.depth_[id] = best + 1;
  };
  for (const auto& [id, ps] : t.parents_) visit(id);
  return t;
}

std::size_t Taxonomy::depth(const std::string& id) const {
  auto it = depth_.find(id);
  if (it == depth_.end()) {
    throw ValidationError("unknown class id '" + id + "' in hierarchy");
  }
  return it->second;
}

double Taxonomy::similarity(const std::string& a, const std::string& b) const {
  const std::size_t da = depth(a), db = depth(b);
  if (a == b) return 1.0;
  auto ancestors = [&](const std::string& id) {
    std::set<std::string> seen;
    std::vector<std::string> stack = {id};
    while (!stack.empty()) {
      std::string cur = std::move(stack.back());
      stack.pop_back();
      if (!seen.insert(cur).second) continue;
      for (const auto& p : parents_.at(cur)) stack.push_back(p);
    }
    return seen;
  };
  const auto anc_a = ancestors(a);
  std::size_t lcs_depth = 0;
  for (const auto& id : ancestors(b)) {
    if (anc_a.count(id)) lcs_depth = std::max(lcs_depth, depth_.at(id));
  }
  return 2.0 * static_cast<double>(lcs_depth) / static_cast<double>(da + db);
}

double class_entropy(std::span<const int> predictions) {
  if (predictions.empty()) throw ValidationError("class_entropy: no predictions");
  std::map<int, std::size_t> counts;
  for (int p : predictions) ++counts[p];
  const double n = static_cast<double>(predictions.size());
  double h = 0.0;
  for (const auto& [cls, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

double unchanged_fraction(std::span<const int> base,
                          std::span<const int> masked) {
  if (base.size() != masked.size()) {
    throw ValidationError("unchanged_fraction: prediction lists differ in length");
  }
  if (base.empty()) throw ValidationError("unchanged_fraction: no predictions");
  std::size_t same = 0;
  for (std::size_t i = 0; i < base.size(); ++i) same += base[i] == masked[i];
  return static_cast<double>(same) / static_cast<double>(base.size());
}

double auc(std::span<const std::pair<double, double>> curve) {
  if (curve.size() < 2) throw ValidationError("auc: need at least two points");
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (!(curve[i].first > curve[i - 1].first)) {
      throw ValidationError("auc: fractions must be strictly increasing");
    }
  }
  if (curve.front().first != 0.0 || curve.back().first != 1.0) {
    throw ValidationError("auc: fractions must span [0, 1]");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += 0.5 * (curve[i].second + curve[i - 1].second) *
            (curve[i].first - curve[i - 1].first);
  }
  return area;
}

SegmentAlgorithm parse_segment_algorithm(std::string_view text) {
  if (text == "grid" || text == "patches") return SegmentAlgorithm::kGrid;
  if (text == "slic") return SegmentAlgorithm::kSlic;
  if (text == "quickshift") return SegmentAlgorithm::kQuickshift;
  throw ValidationError("unknown segmentation algorithm '" + std::string(text) +
                        "'");
}

std::string to_string(SegmentAlgorithm algorithm) {
  switch (algorithm) {
    case SegmentAlgorithm::kGrid:
      return "grid";
    case SegmentAlgorithm::kSlic:
      return "slic";
    case SegmentAlgorithm::kQuickshift:
      return "quickshift";
  }
  return "?";
}

SegmentMap segment_image(const Tensor& image01, const SegmenterConfig& config) {
  switch (config.algorithm) {
    case SegmentAlgorithm::kGrid:
      return grid_patches(image01.dim(1), image01.dim(2), config.patch_size);
    case SegmentAlgorithm::kSlic:
      return slic(image01, config.slic);
    case SegmentAlgorithm::kQuickshift:
      return quickshift(image01, config.quickshift);
  }
  throw ValidationError("unknown segmentation algorithm");
}

std::size_t segments_to_mask(double fraction, std::size_t count) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ValidationError("fraction must lie in [0, 1]");
  }
  const double n = std::ceil(fraction * static_cast<double>(count) - 1e-9);
  return std::min(count, static_cast<std::size_t>(std::max(0.0, n)));
}

std::vector<double> default_fraction_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
  return grid;
}

int top1(std::span<const float> logits) {
  if (logits.empty()) throw ValidationError("top1: empty logits");
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                          logits.begin());
}

std::vector<AblationPoint> ablation_curve(const Model& model,
                                          std::span<const DatasetItem> dataset,
                                          const AblationConfig& config) {
  if (dataset.empty()) throw ValidationError("ablation: empty dataset");
  if (config.fractions.empty()) throw ValidationError("ablation: empty grid");
  for (double f : config.fractions) segments_to_mask(f, 1);
  const bool needs_saliency = config.mode != AblationMode::kRandom;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (needs_saliency && !dataset[i].saliency) {
      throw ValidationError("ablation: item " + std::to_string(i) +
                            " has no saliency map but mode is " +
                            to_string(config.mode));
    }
  }

  const std::size_t nf = config.fractions.size();
  std::vector<int> base(dataset.size());
  std::vector<std::vector<int>> preds(nf, std::vector<int>(dataset.size()));
  parallel_for(dataset.size(), config.threads, [&](std::size_t i) {
    const DatasetItem& item = dataset[i];
    const SegmentMap seg = segment_image(item.image01, config.segmenter);
    std::vector<double> scores(seg.count, 0.0);
    if (needs_saliency) scores = segment_saliency(seg, *item.saliency);
    const auto order =
        ablation_order(scores, config.mode, derive_seed(config.seed, i));
    const std::size_t h = item.image01.dim(1), w = item.image01.dim(2);
    base[i] = top1(
        evaluate(model, item.image01, Mask::ones(h, w), config.strategy).logits);
    for (std::size_t f = 0; f < nf; ++f) {
      std::vector<std::uint8_t> keep(seg.count, 1);
      const std::size_t n_mask = segments_to_mask(config.fractions[f], seg.count);
      for (std::size_t j = 0; j < n_mask; ++j) keep[order[j]] = 0;
      preds[f][i] = top1(evaluate(model, item.image01,
                                  mask_from_segments(seg, keep), config.strategy)
                             .logits);
    }
  });

  std::vector<AblationPoint> curve;
  for (std::size_t f = 0; f < nf; ++f) {
    AblationPoint p;
    p.fraction_masked = config.fractions[f];
    double correct = 0.0, sim = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      correct += preds[f][i] == dataset[i].label;
      sim += config.taxonomy
                 ? config.taxonomy->similarity(preds[f][i], dataset[i].label)
                 : (preds[f][i] == dataset[i].label ? 1.0 : 0.0);
    }
    const double n = static_cast<double>(dataset.size());
    p.accuracy = correct / n;
    p.taxonomy_similarity = sim / n;
    p.class_entropy = class_entropy(preds[f]);
    p.unchanged_fraction = unchanged_fraction(base, preds[f]);
    curve.push_back(p);
  }
  return curve;
}

std::string ablation_csv(std::span<const AblationPoint> curve) {
  std::string out = std::string(kCurveHeader) + "\n";
  char buf[256];
  for (const AblationPoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  p.fraction_masked, p.accuracy, p.class_entropy,
                  p.taxonomy_similarity, p.unchanged_fraction);
    out += buf;
  }
  return out;
}

std::vector<AblationPoint> parse_ablation_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCurveHeader) {
    throw ValidationError(std::string("curve CSV: expected header '") +
                          kCurveHeader + "'");
  }
  std::vector<AblationPoint> curve;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    AblationPoint p;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf%c", &p.fraction_masked,
                    &p.accuracy, &p.class_entropy, &p.taxonomy_similarity,
                    &p.unchanged_fraction, &tail) < 5 ||
        (tail != 0 && tail != '\r' && tail != '\n')) {
      throw ValidationError("curve CSV: malformed row '" + line + "'");
    }
    curve.push_back(p);
  }
  return curve;
}

double linearity_test(const Model& model, const Tensor& image01,
                      std::size_t patch_size, const Strategy& strategy,
                      int threads) {
  const std::size_t h = image01.dim(1), w = image01.dim(2);
  const SegmentMap patches = grid_patches(h, w, patch_size);
  const auto full = features_as_double(
      forward(model.graph, model.weights,
              normalize(image01, strategy.normalization))
          .features);

  std::vector<std::vector<float>> parts(patches.count);
  parallel_for(patches.count, threads, [&](std::size_t i) {
    std::vector<std::uint8_t> keep(patches.count, 0);
    keep[i] = 1;
    parts[i] =
        evaluate(model, image01, mask_from_segments(patches, keep), strategy)
            .features;
  });
  std::vector<double> sum(full.size(), 0.0);
  for (const auto& part : parts) {
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += part[j];
  }
  return cosine_or_throw(full, sum, "linearity_test");
}

std::vector<std::pair<std::size_t, double>> collapse_test(
    const Model& model, std::span<const std::pair<Tensor, Tensor>> pairs,
    std::span<const std::size_t> sizes, const Strategy& strategy,
    int threads) {
  if (pairs.empty()) throw ValidationError("collapse_test: no image pairs");
  const Shape& in_shape = model.graph.input_shape();
  const std::size_t full = in_shape[1];
  if (in_shape[1] != in_shape[2]) {
    throw ValidationError("collapse_test: model input is not square");
  }
  for (const auto& [a, b] : pairs) {
    if (a.shape() != in_shape || b.shape() != in_shape) {
      throw ValidationError(
          "collapse_test: images must be square and match the model input " +
          shape_to_string(in_shape));
    }
  }
  for (std::size_t n : sizes) {
    if (n == 0 || n > full) {
      throw ValidationError("collapse_test: sizes must lie in [1, " +
                            std::to_string(full) + "]");
    }
  }

  auto features = [&](const Tensor& img, const Mask& m) {
    return features_as_double(evaluate(model, img, m, strategy).features);
  };
  auto shrink = [&](const Tensor& img, std::size_t n) {
    const Tensor small = bilinear_resize(img, n, n);
    Tensor canvas = Tensor::chw(img.dim(0), full, full);
    for (std::size_t c = 0; c < img.dim(0); ++c) {
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) canvas.at(c, y, x) = small.at(c, y, x);
      }
    }
    return canvas;
  };

  // delta[p][s] = c_n - c for pair p and size index s.
  std::vector<std::vector<double>> delta(pairs.size(),
                                         std::vector<double>(sizes.size()));
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    const auto& [x1, x2] = pairs[p];
    const Mask ones = Mask::ones(full, full);
    const double c = cosine_or_throw(features(x1, ones), features(x2, ones),
                                     "collapse_test");
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      const std::size_t n = sizes[s];
      Mask m = Mask::zeros(full, full);
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) m.set(y, x, true);
      }
      const double cn = cosine_or_throw(features(shrink(x1, n), m),
                                        features(shrink(x2, n), m),
                                        "collapse_test");
      delta[p][s] = cn - c;
    }
  });

  std::vector<std::pair<std::size_t, double>> curve;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    double acc = 0.0;
    for (const auto& d : delta) acc += d[s];
    curve.emplace_back(sizes[s], acc / static_cast<double>(pairs.size()));
  }
  return curve;
}

std::vector<std::pair<std::size_t, double>> magnitude_test(
    const Model& model, std::span<const Tensor> images,
    std::span<const std::size_t> sizes, const Strategy& strategy,
    int threads) {
  if (images.empty()) throw ValidationError("magnitude_test: no images");
  const std::size_t h = model.graph.input_shape()[1];
  const std::size_t w = model.graph.input_shape()[2];
  for (std::size_t n : sizes) {
    if (n > std::min(h, w)) {
      throw ValidationError("magnitude_test: size " + std::to_string(n) +
                            " exceeds the input size");
    }
  }
  std::vector<std::vector<double>> norms(images.size(),
                                         std::vector<double>(sizes.size()));
  parallel_for(images.size(), threads, [&](std::size_t i) {
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      const std::size_t n = sizes[s];
      const std::size_t top = (h - n) / 2, left = (w - n) / 2;
      Mask m = Mask::zeros(h, w);
      for (std::size_t y = top; y < top + n; ++y) {
        for (std::size_t x = left; x < left + n; ++x) m.set(y, x, true);
      }
      const auto f = evaluate(model, images[i], m, strategy).features;
      double sq = 0.0;
      for (float v : f) sq += static_cast<double>(v) * v;
      norms[i][s] = std::sqrt(sq);
    }
  });
  std::vector<std::pair<std::size_t, double>> curve;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    double acc = 0.0;
    for (const auto& n : norms) acc += n[s];
    curve.emplace_back(sizes[s], acc / static_cast<double>(images.size()));
  }
  return curve;
}

double pearson_correlation(std::span<const double> a,
                           std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ValidationError("pearson: need two equal-length series of >= 2 points");
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw NumericalError("pearson: a series is constant");
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace lmask
