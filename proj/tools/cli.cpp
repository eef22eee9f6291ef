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

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmask/error.hpp"
#include "lmask/evaluation.hpp"
#include "lmask/graph.hpp"
#include "lmask/image_io.hpp"
#include "lmask/interpretability.hpp"
#include "lmask/masking.hpp"
#include "lmask/perturbation.hpp"
#include "lmask/segmentation.hpp"
#include "lmask/toy_model.hpp"
#include "lmask/weights.hpp"

namespace lmask::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunConfig {
  std::string graph;
  std::string weights;
  std::vector<float> mean = {0.485f, 0.456f, 0.406f};
  std::vector<float> std = {0.229f, 0.224f, 0.225f};
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "-";

  Normalization normalization() const {
    Normalization n;
    for (std::size_t c = 0; c < 3; ++c) {
      if (!(std[c] > 0.0f)) {
        throw ValidationError("--std components must be > 0");
      }
      n.mean[c] = mean[c];
      n.std[c] = std[c];
    }
    return n;
  }
};

struct SegmentOptions {
  std::string algorithm = "grid";
  std::size_t patch = 16;
  SlicParams slic;
  QuickshiftParams quickshift;

  SegmenterConfig config() const {
    SegmenterConfig c;
    c.algorithm = parse_segment_algorithm(algorithm);
    c.patch_size = patch;
    c.slic = slic;
    c.quickshift = quickshift;
    return c;
  }
};

void add_run_options(CLI::App* cmd, RunConfig& rc, bool needs_model) {
  auto* g = cmd->add_option("--graph", rc.graph, "Graph JSON file");
  auto* w = cmd->add_option("--weights", rc.weights, "LMW1 weights file");
  if (needs_model) {
    g->required();
    w->required();
  }
  cmd->add_option("--mean", rc.mean, "Normalization mean (R G B)")
      ->expected(3);
  cmd->add_option("--std", rc.std, "Normalization std (R G B)")->expected(3);
  cmd->add_option("--seed", rc.seed, "Random seed");
  cmd->add_option("--threads", rc.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", rc.out, "Output path ('-' for stdout)");
}

void add_segment_options(CLI::App* cmd, SegmentOptions& so) {
  cmd->add_option("--alg", so.algorithm, "grid | slic | quickshift");
  cmd->add_option("--patch", so.patch, "Grid patch size")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--n-segments", so.slic.n_segments, "SLIC segment count")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--compactness", so.slic.compactness, "SLIC compactness");
  cmd->add_option("--iterations", so.slic.max_iters, "SLIC iterations");
  cmd->add_option("--kernel-size", so.quickshift.kernel_size,
                  "Quickshift kernel size");
  cmd->add_option("--max-dist", so.quickshift.max_dist, "Quickshift max_dist");
  cmd->add_option("--ratio", so.quickshift.ratio, "Quickshift color ratio");
}

Model load_model(const RunConfig& rc) {
  ModelGraph graph = load_graph(read_text_file(rc.graph));
  WeightStore weights = load_weights(read_file(rc.weights));
  return bind_model(std::move(graph), std::move(weights));
}

void emit(const std::string& path, std::string_view text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file_atomic(path, text);
  }
}

std::vector<int> top_k_indices(std::span<const float> logits, std::size_t k) {
  std::vector<int> idx(logits.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return logits[a] > logits[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

std::string forward_json(const ForwardResult& r, bool with_features) {
  json doc = {{"logits", r.logits}, {"top5", top_k_indices(r.logits, 5)}};
  if (with_features) doc["features"] = r.features;
  return doc.dump(2) + "\n";
}

Mask read_mask(const std::string& path, const Tensor& image) {
  Mask m = mask_from_gray(read_pgm_file(path));
  if (m.height() != image.dim(1) || m.width() != image.dim(2)) {
    throw ShapeError("mask '" + path + "' does not match the image size");
  }
  return m;
}

GrayImage gray_from_segments(const SegmentMap& seg) {
  GrayImage g;
  g.height = seg.height;
  g.width = seg.width;
  g.maxval = static_cast<std::uint32_t>(std::max<std::size_t>(1, seg.count - 1));
  if (g.maxval > 65535) {
    throw ValidationError("too many segments for a PGM label map");
  }
  g.values = seg.labels;
  return g;
}

SegmentMap read_segments(const fs::path& path) {
  const GrayImage g = read_pgm_file(path);
  SegmentMap seg;
  seg.height = g.height;
  seg.width = g.width;
  seg.labels = g.values;
  seg.count = g.values.empty()
                  ? 0
                  : *std::max_element(g.values.begin(), g.values.end()) + 1;
  if (!is_partition(seg)) {
    throw ValidationError("segment map '" + path.string() +
                          "' skips a label");
  }
  return seg;
}

std::vector<double> parse_fraction_list(const std::string& text) {
  std::vector<double> grid;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') {
      throw ValidationError("--grid: '" + item + "' is not a number");
    }
    grid.push_back(v);
  }
  if (grid.empty()) throw ValidationError("--grid is empty");
  return grid;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : "nan";
}

double softmax_prob(std::span<const float> logits, int target) {
  const float mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (float v : logits) z += std::exp(static_cast<double>(v - mx));
  return std::exp(static_cast<double>(logits[target] - mx)) / z;
}

// ---------------------------------------------------------------- commands

int cmd_forward(const RunConfig& rc, const std::string& image_path,
                bool with_features, std::ostream& out) {
  const Model model = load_model(rc);
  const Tensor image = read_ppm_file(image_path);
  const ForwardResult r = forward(model.graph, model.weights,
                                  normalize(image, rc.normalization()));
  emit(rc.out, forward_json(r, with_features), out);
  return kOk;
}

int cmd_mask_forward(const RunConfig& rc, const std::string& image_path,
                     const std::string& mask_path,
                     const std::string& strategy_text, bool with_features,
                     std::ostream& out) {
  const Model model = load_model(rc);
  const Strategy strategy = parse_strategy(strategy_text, rc.normalization());
  const Tensor image = read_ppm_file(image_path);
  const Mask mask = read_mask(mask_path, image);
  emit(rc.out, forward_json(evaluate(model, image, mask, strategy), with_features),
       out);
  return kOk;
}

int cmd_segment(const RunConfig& rc, const std::string& image_path,
                const SegmentOptions& so, std::ostream& out) {
  const Tensor image = read_ppm_file(image_path);
  const SegmenterConfig config = so.config();
  SegmentMap seg = config.algorithm == SegmentAlgorithm::kQuickshift
                       ? quickshift(image, config.quickshift, rc.threads)
                       : segment_image(image, config);
  json params;
  switch (config.algorithm) {
    case SegmentAlgorithm::kGrid:
      params = {{"patch", so.patch}};
      break;
    case SegmentAlgorithm::kSlic:
      params = {{"n_segments", so.slic.n_segments},
                {"compactness", so.slic.compactness},
                {"iterations", so.slic.max_iters}};
      break;
    case SegmentAlgorithm::kQuickshift:
      params = {{"kernel_size", so.quickshift.kernel_size},
                {"max_dist", so.quickshift.max_dist},
                {"ratio", so.quickshift.ratio}};
      break;
  }
  const json sidecar = {{"count", seg.count},
                        {"algorithm", to_string(config.algorithm)},
                        {"params", params}};
  if (rc.out.empty() || rc.out == "-") {
    throw ValidationError("segment: --out must name a PGM file");
  }
  const auto pgm = encode_pgm_ascii(gray_from_segments(seg));
  write_file_atomic(rc.out, std::span<const std::uint8_t>(pgm));
  write_file_atomic(rc.out + ".json", sidecar.dump(2) + "\n");
  out << seg.count << " segments\n";
  return kOk;
}

int cmd_ablate(const RunConfig& rc, const std::string& manifest,
               const SegmentOptions& so, const std::string& strategy_text,
               const std::string& mode, const std::string& grid,
               const std::string& hierarchy, std::ostream& out) {
  const Model model = load_model(rc);
  const auto dataset = load_manifest(manifest);
  if (dataset.empty()) {
    throw ValidationError("manifest '" + manifest + "' has no items");
  }
  std::optional<Taxonomy> taxonomy;
  if (!hierarchy.empty()) taxonomy = Taxonomy::parse(read_text_file(hierarchy));

  AblationConfig config;
  config.strategy = parse_strategy(strategy_text, rc.normalization());
  config.mode = parse_ablation_mode(mode);
  config.seed = rc.seed;
  if (!grid.empty()) config.fractions = parse_fraction_list(grid);
  config.segmenter = so.config();
  config.taxonomy = taxonomy ? &*taxonomy : nullptr;
  config.threads = rc.threads;
  emit(rc.out, ablation_csv(ablation_curve(model, dataset, config)), out);
  return kOk;
}

int cmd_auc(const RunConfig& rc, const std::vector<std::string>& curves,
            std::ostream& out) {
  // label -> per-run AUCs of the four metrics
  std::map<std::string, std::vector<std::array<double, 4>>> runs;
  std::vector<std::string> order;
  for (const std::string& attrs : curves) {
    const auto colon = attrs.find(':');
    if (colon == std::string::npos || colon == 0) {
      throw ValidationError("auc: expected LABEL:path, got '" + attrs + "'");
    }
    const std::string label = attrs.substr(0, colon);
    const auto curve = parse_ablation_csv(read_text_file(attrs.substr(colon + 1)));
    std::array<double, 4> a{};
    for (int metric = 0; metric < 4; ++metric) {
      std::vector<std::pair<double, double>> pts;
      for (const AblationPoint& p : curve) {
        const double v = metric == 0   ? p.accuracy
                         : metric == 1 ? p.class_entropy
                         : metric == 2 ? p.taxonomy_similarity
                                       : p.unchanged_fraction;
        pts.emplace_back(p.fraction_masked, v);
      }
      a[metric] = auc(pts);
    }
    if (!runs.count(label)) order.push_back(label);
    runs[label].push_back(a);
  }
  std::string csv =
      "strategy,n_runs,auc_accuracy,auc_class_entropy,auc_taxonomy_similarity,"
      "auc_unchanged_fraction\n";
  for (const std::string& label : order) {
    const auto& rs = runs[label];
    csv += label + "," + std::to_string(rs.size());
    for (int metric = 0; metric < 4; ++metric) {
      double acc = 0.0;
      for (const auto& r : rs) acc += r[metric];
      csv += "," + format_double(acc / static_cast<double>(rs.size()));
    }
    csv += "\n";
  }
  emit(rc.out, csv, out);
  return kOk;
}

struct ExplainOptions {
  std::string image;
  std::string strategy = "layermask";
  std::size_t n_samples = 500;
  std::size_t top_k = 10;
  double keep_prob = 0.5;
  double ridge = 1e-6;
  double kernel_width = 0.0;
  int target = -1;
  bool logit = false;
  std::string overlay;
};

int cmd_explain(const RunConfig& rc, const SegmentOptions& so,
                const ExplainOptions& eo, std::ostream& out) {
  const Model model = load_model(rc);
  const Strategy strategy = parse_strategy(eo.strategy, rc.normalization());
  const Tensor image = read_ppm_file(eo.image);
  const SegmentMap seg = segment_image(image, so.config());

  int target = eo.target;
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (target < 0) {
    target = top1(evaluate(model, image, Mask::ones(h, w), strategy).logits);
  }
  const auto n_classes =
      model.graph.output_shape(model.graph.output_node())[0];
  if (static_cast<std::size_t>(target) >= n_classes) {
    throw ValidationError("--target " + std::to_string(target) +
                          " exceeds the class count");
  }
  const MaskScorer scorer = [&](const Mask& m) {
    const auto r = evaluate(model, image, m, strategy);
    return eo.logit ? static_cast<double>(r.logits[target])
                    : softmax_prob(r.logits, target);
  };
  LimeParams params;
  params.n_samples = eo.n_samples;
  params.keep_prob = eo.keep_prob;
  params.ridge_lambda = eo.ridge;
  params.seed = rc.seed;
  params.kernel_width = eo.kernel_width;
  params.threads = rc.threads;
  Explanation e = lime_explain(scorer, seg, params);
  e.target_class = target;
  emit(rc.out, explanation_to_json(e), out);
  if (!eo.overlay.empty()) {
    const auto ppm = encode_ppm(render_overlay(image, seg, e, eo.top_k));
    write_file_atomic(eo.overlay, std::span<const std::uint8_t>(ppm));
  }
  return kOk;
}

int cmd_align(const RunConfig& rc, const std::string& manifest,
              std::ostream& out) {
  const std::string text = read_text_file(manifest);
  const fs::path base = fs::path(manifest).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<StrategyScores> items;
  std::vector<std::string> names;
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest + ":" + std::to_string(lineno);
    json doc;
    try {
      doc = json::parse(line);
      const SegmentMap seg = read_segments(resolve(doc.at("segments")));
      const GrayImage obj = read_pgm_file(resolve(doc.at("object_mask")));
      if (obj.height != seg.height || obj.width != seg.width) {
        throw ShapeError(where + ": object mask and segments differ in size");
      }
      const auto gt = ground_truth(seg, unit_from_gray(obj));
      StrategyScores scores;
      for (const auto& [name, path] : doc.at("explanations").items()) {
        const Explanation e = explanation_from_json(
            read_text_file(resolve(path.get<std::string>())));
        scores[name] = alignment_score(gt, e);
      }
      if (names.empty()) {
        for (const auto& kv : scores) names.push_back(kv.first);
      }
      items.push_back(std::move(scores));
    } catch (const json::exception& ex) {
      throw ValidationError(where + ": " + ex.what());
    }
  }
  if (items.empty()) {
    throw ValidationError("manifest '" + manifest + "' has no items");
  }
  const auto wins = win_rate(items);
  std::string csv = "strategy,mean_alignment,win_rate,n_items\n";
  for (const std::string& name : names) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& item : items) {
      const auto& s = item.at(name);
      if (s) {
        acc += *s;
        ++n;
      }
    }
    csv += name + "," +
           format_optional(n ? std::optional<double>(acc / n) : std::nullopt) +
           "," + format_double(wins.at(name)) + "," + std::to_string(n) + "\n";
  }
  emit(rc.out, csv, out);
  return kOk;
}

std::vector<std::size_t> parse_size_list(const std::string& text,
                                         std::size_t fallback_max) {
  std::vector<std::size_t> sizes;
  if (text.empty()) {
    for (std::size_t n = 0; n <= fallback_max; n += std::max<std::size_t>(1, fallback_max / 8)) {
      sizes.push_back(n);
    }
    if (sizes.back() != fallback_max) sizes.push_back(fallback_max);
    return sizes;
  }
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    char* end = nullptr;
    const long long v = std::strtoll(item.c_str(), &end, 10);
    if (item.empty() || *end != '\0' || v < 0) {
      throw ValidationError("--sizes: '" + item + "' is not a size");
    }
    sizes.push_back(static_cast<std::size_t>(v));
  }
  return sizes;
}

int cmd_diagnostics(const RunConfig& rc, const std::string& mode,
                    const std::vector<std::string>& image_paths,
                    const std::string& strategy_text, std::size_t patch,
                    const std::string& sizes_text, std::ostream& out) {
  const Model model = load_model(rc);
  const Strategy strategy = parse_strategy(strategy_text, rc.normalization());
  std::vector<Tensor> images;
  for (const auto& p : image_paths) images.push_back(read_ppm_file(p));
  if (images.empty()) throw ValidationError("diagnostics: no images");
  const std::size_t full = model.graph.input_shape()[1];

  std::string csv;
  if (mode == "linearity") {
    csv = "image,cosine\n";
    for (std::size_t i = 0; i < images.size(); ++i) {
      csv += std::to_string(i) + "," +
             format_double(linearity_test(model, images[i], patch, strategy,
                                          rc.threads)) +
             "\n";
    }
  } else if (mode == "collapse") {
    if (images.size() < 2) {
      throw ValidationError("collapse: needs at least two images");
    }
    std::vector<std::pair<Tensor, Tensor>> pairs;
    for (std::size_t i = 0; i + 1 < images.size(); i += 2) {
      pairs.emplace_back(images[i], images[i + 1]);
    }
    auto sizes = parse_size_list(sizes_text, full);
    sizes.erase(std::remove(sizes.begin(), sizes.end(), 0), sizes.end());
    csv = "size,mean_cosine_change\n";
    for (const auto& [n, v] :
         collapse_test(model, pairs, sizes, strategy, rc.threads)) {
      csv += std::to_string(n) + "," + format_double(v) + "\n";
    }
  } else if (mode == "magnitude") {
    const auto sizes = parse_size_list(sizes_text, full);
    csv = "size,mean_norm\n";
    for (const auto& [n, v] :
         magnitude_test(model, images, sizes, strategy, rc.threads)) {
      csv += std::to_string(n) + "," + format_double(v) + "\n";
    }
  } else {
    throw ValidationError("unknown diagnostics mode '" + mode +
                          "' (linearity | collapse | magnitude)");
  }
  emit(rc.out, csv, out);
  return kOk;
}

int cmd_pad_demo(const std::string& image_path, const std::string& mask_path,
                 std::size_t k, const std::string& prefix, std::ostream& out) {
  const Tensor image = read_ppm_file(image_path);
  const Mask mask = read_mask(mask_path, image);
  const auto trace = neighbor_pad_trace(image, mask, k);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto ppm = encode_ppm(trace[i].value);
    write_file_atomic(prefix + "_" + std::to_string(i) + ".ppm",
                      std::span<const std::uint8_t>(ppm));
  }
  out << trace.size() << " frames\n";
  return kOk;
}

int cmd_make_toy(std::uint64_t seed, const std::string& prefix,
                 std::ostream& out) {
  const Model m = toy_resnet(seed);
  write_file_atomic(prefix + ".json", save_graph(m.graph));
  const auto bytes = save_weights(m.weights);
  write_file_atomic(prefix + ".lmw", std::span<const std::uint8_t>(bytes));
  out << "wrote " << prefix << ".json and " << prefix << ".lmw\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Layer-masked CNN inference and masking evaluation"};
  app.require_subcommand(1);

  RunConfig rc;
  SegmentOptions so;
  std::string image, mask, strategy = "layermask", manifest, mode, grid,
                           hierarchy, sizes, prefix;
  bool with_features = false;
  std::vector<std::string> inputs;
  std::size_t k = 3, patch = 8;
  ExplainOptions eo;

  auto* fwd = app.add_subcommand("forward", "Plain inference on one image");
  add_run_options(fwd, rc, true);
  fwd->add_option("--image", image, "PPM image")->required();
  fwd->add_flag("--features", with_features, "Include penultimate features");

  auto* mfwd = app.add_subcommand("mask-forward", "Masked inference");
  add_run_options(mfwd, rc, true);
  mfwd->add_option("--image", image, "PPM image")->required();
  mfwd->add_option("--mask", mask, "PGM mask (>= 128 keeps)")->required();
  mfwd->add_option("--strategy", strategy, "Masking strategy");
  mfwd->add_flag("--features", with_features, "Include penultimate features");

  auto* segc = app.add_subcommand("segment", "Segment an image");
  add_run_options(segc, rc, false);
  segc->add_option("--image", image, "PPM image")->required();
  add_segment_options(segc, so);

  auto* abl = app.add_subcommand("ablate", "Segment-ablation curve");
  add_run_options(abl, rc, true);
  abl->add_option("--manifest", manifest, "JSONL dataset manifest")->required();
  abl->add_option("--strategy", strategy, "Masking strategy");
  abl->add_option("--mode", mode = "random", "random | most | least");
  abl->add_option("--grid", grid, "Comma-separated fractions");
  abl->add_option("--hierarchy", hierarchy, "Class hierarchy file");
  add_segment_options(abl, so);

  auto* aucc = app.add_subcommand("auc", "AUC table from curve CSVs");
  add_run_options(aucc, rc, false);
  aucc->add_option("curves", inputs, "LABEL:path.csv")->required();

  auto* expl = app.add_subcommand("explain", "LIME explanation");
  add_run_options(expl, rc, true);
  expl->add_option("--image", eo.image, "PPM image")->required();
  expl->add_option("--strategy", eo.strategy, "Masking strategy");
  expl->add_option("--n-samples", eo.n_samples, "LIME samples")
      ->check(CLI::PositiveNumber);
  expl->add_option("--top-k", eo.top_k, "Segments highlighted in the overlay");
  expl->add_option("--keep-prob", eo.keep_prob, "Segment keep probability");
  expl->add_option("--ridge", eo.ridge, "Ridge penalty");
  expl->add_option("--kernel-width", eo.kernel_width,
                   "Proximity kernel width (0 = uniform)");
  expl->add_option("--target", eo.target, "Class to explain (default top-1)");
  expl->add_flag("--logit", eo.logit, "Explain the logit, not the probability");
  expl->add_option("--overlay", eo.overlay, "Overlay PPM output");
  add_segment_options(expl, so);

  auto* aln = app.add_subcommand("align", "Alignment scores and win rates");
  add_run_options(aln, rc, false);
  aln->add_option("--manifest", manifest, "JSONL alignment manifest")
      ->required();

  auto* diag = app.add_subcommand("diagnostics", "Masking diagnostics");
  add_run_options(diag, rc, true);
  diag->add_option("--mode", mode, "linearity | collapse | magnitude")
      ->required();
  diag->add_option("--images", inputs, "PPM images")->required();
  diag->add_option("--strategy", strategy, "Masking strategy");
  diag->add_option("--patch", patch, "Linearity patch size")
      ->check(CLI::PositiveNumber);
  diag->add_option("--sizes", sizes, "Comma-separated square sizes");

  auto* pad = app.add_subcommand("pad-demo", "Neighbor padding frames");
  pad->add_option("--image", image, "PPM image")->required();
  pad->add_option("--mask", mask, "PGM mask")->required();
  pad->add_option("--k", k, "Padding rounds");
  pad->add_option("--prefix", prefix, "Output prefix")->required();

  std::uint64_t toy_seed = 0;
  auto* toy = app.add_subcommand("make-toy", "Write the toy model files");
  toy->add_option("--seed", toy_seed, "Weight seed");
  toy->add_option("--prefix", prefix, "Output prefix")->required();

  std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1),
                                     args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());
  try {
    app.parse(argv_rest);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  }

  try {
    if (*fwd) return cmd_forward(rc, image, with_features, out);
    if (*mfwd) {
      return cmd_mask_forward(rc, image, mask, strategy, with_features, out);
    }
    if (*segc) return cmd_segment(rc, image, so, out);
    if (*abl) {
      return cmd_ablate(rc, manifest, so, strategy, mode, grid, hierarchy, out);
    }
    if (*aucc) return cmd_auc(rc, inputs, out);
    if (*expl) return cmd_explain(rc, so, eo, out);
    if (*aln) return cmd_align(rc, manifest, out);
    if (*diag) {
      return cmd_diagnostics(rc, mode, inputs, strategy, patch, sizes, out);
    }
    if (*pad) return cmd_pad_demo(image, mask, k, prefix, out);
    if (*toy) return cmd_make_toy(toy_seed, prefix, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  }
  return kValidationError;
}

}  // namespace lmask::cli
