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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "lmask/error.hpp"
#include "lmask/image_io.hpp"
#include "lmask/toy_model.hpp"
#include "test_util.hpp"

namespace lmask {
namespace {

namespace fs = std::filesystem;
using testing::natural_image;
using testing::random_image;

constexpr char kHierarchy[] = R"(# id parent
root root
animal root
thing root
0 animal
1 animal
2 thing
3 2
)";

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lmask_eval_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(AblationOrderTest, Examples) {
  const std::vector<double> s = {3, 1, 2};
  EXPECT_EQ(ablation_order(s, AblationMode::kMostSalientFirst),
            (std::vector<std::size_t>{0, 2, 1}));
  EXPECT_EQ(ablation_order(s, AblationMode::kLeastSalientFirst),
            (std::vector<std::size_t>{1, 2, 0}));
  const std::vector<double> flat(5, 1.0);
  EXPECT_EQ(ablation_order(flat, AblationMode::kLeastSalientFirst),
            (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(ablation_order(flat, AblationMode::kMostSalientFirst),
            (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_THROW(ablation_order({}, AblationMode::kRandom), ValidationError);
}

TEST(AblationOrderTest, RandomIsSeededPermutation) {
  const std::vector<double> s(30, 0.0);
  const auto a = ablation_order(s, AblationMode::kRandom, 5);
  EXPECT_EQ(a, ablation_order(s, AblationMode::kRandom, 5));
  EXPECT_NE(a, ablation_order(s, AblationMode::kRandom, 6));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(AblationOrderTest, MostAndLeastAreReverses) {
  Rng rng(1);
  std::vector<double> s(25);
  for (double& v : s) v = rng.uniform();
  auto most = ablation_order(s, AblationMode::kMostSalientFirst);
  const auto least = ablation_order(s, AblationMode::kLeastSalientFirst);
  std::reverse(most.begin(), most.end());
  EXPECT_EQ(most, least);
}

TEST(AblationModeTest, Parse) {
  EXPECT_EQ(parse_ablation_mode("most"), AblationMode::kMostSalientFirst);
  EXPECT_EQ(parse_ablation_mode("least_salient_first"),
            AblationMode::kLeastSalientFirst);
  EXPECT_EQ(to_string(AblationMode::kRandom), "random");
  EXPECT_THROW(parse_ablation_mode("best"), ValidationError);
}

TEST(ClassEntropyTest, Examples) {
  EXPECT_EQ(class_entropy(std::vector<int>{3, 3, 3}), 0.0);
  EXPECT_NEAR(class_entropy(std::vector<int>{0, 1, 2, 3}), std::log(4.0), 1e-12);
  EXPECT_NEAR(class_entropy(std::vector<int>{5, 5, 6, 7}), 1.0397207708399179,
              1e-12);
  EXPECT_THROW(class_entropy(std::vector<int>{}), ValidationError);
}

TEST(UnchangedFractionTest, Examples) {
  const std::vector<int> a = {1, 2, 3, 4};
  EXPECT_EQ(unchanged_fraction(a, a), 1.0);
  EXPECT_EQ(unchanged_fraction(a, std::vector<int>{5, 6, 7, 8}), 0.0);
  EXPECT_EQ(unchanged_fraction(a, std::vector<int>{1, 2, 0, 0}), 0.5);
  EXPECT_THROW(unchanged_fraction(a, std::vector<int>{1}), ValidationError);
}

TEST(AucTest, Examples) {
  const std::vector<std::pair<double, double>> flat = {{0, 0.7}, {0.3, 0.7}, {1, 0.7}};
  EXPECT_NEAR(auc(flat), 0.7, 1e-12);
  const std::vector<std::pair<double, double>> line = {{0, 1}, {0.5, 0.5}, {1, 0}};
  EXPECT_NEAR(auc(line), 0.5, 1e-12);
  const std::vector<std::pair<double, double>> unsorted = {{0, 1}, {0.6, 0}, {0.5, 0}, {1, 1}};
  EXPECT_THROW(auc(unsorted), ValidationError);
  const std::vector<std::pair<double, double>> partial = {{0, 1}, {0.5, 0}};
  EXPECT_THROW(auc(partial), ValidationError);
}

TEST(AucTest, BoundedByValues) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<double, double>> c;
    double lo = 1e9, hi = -1e9;
    for (double f : default_fraction_grid()) {
      const double v = rng.uniform(-2, 2);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      c.emplace_back(f, v);
    }
    const double a = auc(c);
    EXPECT_GE(a, lo - 1e-12);
    EXPECT_LE(a, hi + 1e-12);
  }
}

TEST(TaxonomyTest, WuPalmer) {
  const Taxonomy t = Taxonomy::parse(kHierarchy);
  EXPECT_EQ(t.depth("root"), 1u);
  EXPECT_EQ(t.depth("3"), 4u);
  EXPECT_EQ(t.similarity(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(t.similarity(0, 1), 2.0 * 2 / (3 + 3));  // lcs "animal"
  EXPECT_DOUBLE_EQ(t.similarity("animal", "thing"), 0.5);  // siblings
  EXPECT_DOUBLE_EQ(t.similarity("root", "3"), 2.0 * 1 / (1 + 4));
  EXPECT_DOUBLE_EQ(t.similarity(2, 3), 2.0 * 3 / (3 + 4));
  EXPECT_THROW(t.similarity(0, 9), ValidationError);
}

TEST(TaxonomyTest, ShallowestParentDepth) {
  // "x" has parents at depth 2 and depth 3; it sits at depth 3.
  const Taxonomy t = Taxonomy::parse("r r\na r\nb a\nx a\nx b\n");
  EXPECT_EQ(t.depth("x"), 3u);
}

TEST(TaxonomyTest, ParseErrors) {
  EXPECT_THROW(Taxonomy::parse("a b\n"), ValidationError);            // no root
  EXPECT_THROW(Taxonomy::parse("r r\ns s\n"), ValidationError);       // two roots
  EXPECT_THROW(Taxonomy::parse("r r\na b\nb a\n"), ValidationError);  // cycle
  EXPECT_THROW(Taxonomy::parse("r r\na\n"), ValidationError);         // malformed
}

TEST(SegmentsToMaskTest, CeilWithRepresentationSlack) {
  EXPECT_EQ(segments_to_mask(0.0, 196), 0u);
  EXPECT_EQ(segments_to_mask(0.5, 196), 98u);
  EXPECT_EQ(segments_to_mask(0.3, 10), 3u);  // 0.3 * 10 is 3.0000000000000004
  EXPECT_EQ(segments_to_mask(0.31, 10), 4u);
  EXPECT_EQ(segments_to_mask(1.0, 7), 7u);
  EXPECT_THROW(segments_to_mask(1.5, 7), ValidationError);
  EXPECT_EQ(default_fraction_grid().size(), 11u);
}

TEST(CurveCsvTest, RoundTrip) {
  const std::vector<AblationPoint> curve = {{0.0, 1.0, 0.0, 1.0, 1.0},
                                            {0.5, 0.25, 1.0397, 0.6, 1.0 / 3}};
  const std::string csv = ablation_csv(curve);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "fraction,accuracy,class_entropy,taxonomy_similarity,unchanged_fraction");
  const auto back = parse_ablation_csv(csv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].unchanged_fraction, 1.0 / 3);
  EXPECT_THROW(parse_ablation_csv("a,b\n"), ValidationError);
  EXPECT_THROW(parse_ablation_csv(csv + "0.1,x\n"), ValidationError);
}

std::vector<DatasetItem> toy_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DatasetItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    DatasetItem item;
    item.image01 = natural_image(rng, 32, 32);
    item.label = static_cast<int>(rng.below(10));
    std::vector<float> sal(32 * 32);
    for (float& v : sal) v = static_cast<float>(rng.uniform());
    item.saliency = sal;
    items.push_back(std::move(item));
  }
  return items;
}

TEST(AblationCurveTest, EndpointsAndRanges) {
  const Model m = toy_resnet();
  const auto data = toy_dataset(6, 3);
  AblationConfig cfg;
  cfg.segmenter.patch_size = 8;
  int correct = 0;
  for (const auto& item : data) {
    correct += top1(evaluate(m, item.image01, Mask::ones(32, 32), cfg.strategy).logits) ==
               item.label;
  }
  for (const char* s : {"layermask", "blackout", "greyout"}) {
    cfg.strategy = parse_strategy(s);
    for (AblationMode mode : {AblationMode::kRandom, AblationMode::kMostSalientFirst}) {
      cfg.mode = mode;
      const auto curve = ablation_curve(m, data, cfg);
      ASSERT_EQ(curve.size(), 11u);
      EXPECT_EQ(curve[0].accuracy, correct / 6.0);
      EXPECT_EQ(curve[0].unchanged_fraction, 1.0);
      for (const auto& p : curve) {
        EXPECT_GE(p.accuracy, 0.0);
        EXPECT_LE(p.accuracy, 1.0);
        EXPECT_GE(p.class_entropy, 0.0);
        EXPECT_LE(p.class_entropy, std::log(10.0) + 1e-12);
        EXPECT_EQ(p.taxonomy_similarity, p.accuracy);  // no hierarchy
      }
    }
  }
  cfg.strategy = parse_strategy("blackout");
  EXPECT_EQ(ablation_curve(m, data, cfg).back().class_entropy, 0.0);
}

TEST(AblationCurveTest, ThreadIndependentAndNeedsSaliency) {
  const Model m = toy_resnet();
  auto data = toy_dataset(5, 4);
  AblationConfig cfg;
  cfg.segmenter.patch_size = 8;
  cfg.fractions = {0.0, 0.5, 1.0};
  const std::string one = ablation_csv(ablation_curve(m, data, cfg));
  cfg.threads = 3;
  EXPECT_EQ(ablation_csv(ablation_curve(m, data, cfg)), one);

  data[2].saliency.reset();
  EXPECT_NO_THROW(ablation_curve(m, data, cfg));
  cfg.mode = AblationMode::kLeastSalientFirst;
  EXPECT_THROW(ablation_curve(m, data, cfg), ValidationError);
  EXPECT_THROW(ablation_curve(m, {}, cfg), ValidationError);
}

TEST(AblationCurveTest, TaxonomySimilarity) {
  const Model m = toy_resnet();
  const auto data = toy_dataset(4, 5);
  std::string text = "root root\n";
  for (int c = 0; c < 10; ++c) text += std::to_string(c) + " root\n";
  const Taxonomy flat = Taxonomy::parse(text);
  AblationConfig cfg;
  cfg.segmenter.patch_size = 16;
  cfg.fractions = {0.0, 1.0};
  cfg.taxonomy = &flat;
  for (const auto& p : ablation_curve(m, data, cfg)) {
    // Wrong predictions score 2 * 1 / (2 + 2) in a one-level hierarchy.
    EXPECT_DOUBLE_EQ(p.taxonomy_similarity, p.accuracy + 0.5 * (1 - p.accuracy));
  }
}

TEST(ManifestTest, LoadsRelativePaths) {
  const fs::path dir = fresh_dir("manifest");
  Rng rng(6);
  const Tensor img = random_image(rng, 4, 5);
  const auto ppm = encode_ppm(img);
  write_file_atomic(dir / "a.ppm", std::span<const std::uint8_t>(ppm));
  GrayImage sal{4, 5, 255, std::vector<std::uint32_t>(20, 255)};
  sal.values[0] = 0;
  const auto pgm = encode_pgm_binary(sal);
  write_file_atomic(dir / "a_sal.pgm", std::span<const std::uint8_t>(pgm));
  write_file_atomic(dir / "m.jsonl",
                    "{\"image\": \"a.ppm\", \"label\": 3, \"saliency\": \"a_sal.pgm\"}\n"
                    "\n"
                    "{\"image\": \"a.ppm\", \"label\": 1}\n");
  const auto items = load_manifest(dir / "m.jsonl");
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[0].label, 3);
  ASSERT_TRUE(items[0].saliency.has_value());
  EXPECT_EQ((*items[0].saliency)[0], 0.0f);
  EXPECT_EQ((*items[0].saliency)[1], 1.0f);
  EXPECT_FALSE(items[1].saliency.has_value());
  EXPECT_EQ(items[0].image01.shape(), (Shape{3, 4, 5}));

  write_file_atomic(dir / "bad.jsonl", "{\"image\": \"a.ppm\"}\n");
  EXPECT_THROW(load_manifest(dir / "bad.jsonl"), ValidationError);
  write_file_atomic(dir / "missing.jsonl", "{\"image\": \"nope.ppm\", \"label\": 0}\n");
  EXPECT_THROW(load_manifest(dir / "missing.jsonl"), IoError);
  fs::remove_all(dir);
}

TEST(DiagnosticsTest, LinearitySinglePatchIsExactlyOne) {
  const Model m = toy_resnet();
  Rng rng(7);
  for (const char* s : {"layermask", "greyout"}) {
    EXPECT_EQ(linearity_test(m, random_image(rng, 32, 32), 32, parse_strategy(s)), 1.0);
  }
}

TEST(DiagnosticsTest, LinearityGolden) {
  const Model m = toy_resnet(0);
  Rng rng(2026);
  const Tensor img = random_image(rng, 32, 32);
  const Strategy lm = parse_strategy("layermask");
  const double c = linearity_test(m, img, 8, lm);
  EXPECT_NEAR(c, 0.996852991100, 1e-6);
  EXPECT_EQ(linearity_test(m, img, 8, lm, 4), c);
}

TEST(DiagnosticsTest, CollapseGoldenAndFullSize) {
  const Model m = toy_resnet(0);
  Rng rng(2026);
  random_image(rng, 32, 32);  // keep the stream aligned with the golden run
  std::vector<std::pair<Tensor, Tensor>> pairs;
  for (int i = 0; i < 3; ++i) {
    Tensor a = natural_image(rng, 32, 32);
    Tensor b = natural_image(rng, 32, 32);
    pairs.emplace_back(std::move(a), std::move(b));
  }
  const std::vector<std::size_t> sizes = {8, 16, 24, 32};
  const auto curve = collapse_test(m, pairs, sizes, parse_strategy("layermask"));
  const double golden[] = {-0.048674183085, -0.014748502665, -0.007322228875, 0.0};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(curve[i].first, sizes[i]);
    EXPECT_NEAR(curve[i].second, golden[i], 1e-6);
  }
  EXPECT_EQ(curve[3].second, 0.0);
  for (const char* s : {"blackout", "imagemean"}) {
    const std::vector<std::size_t> full = {32};
    EXPECT_EQ(collapse_test(m, pairs, full, parse_strategy(s))[0].second, 0.0);
  }
}

TEST(DiagnosticsTest, CollapseIdenticalPair) {
  const Model m = toy_resnet();
  Rng rng(8);
  const Tensor x = natural_image(rng, 32, 32);
  const std::vector<std::pair<Tensor, Tensor>> pairs = {{x, x}};
  const std::vector<std::size_t> sizes = {4, 12, 32};
  for (const auto& [n, v] : collapse_test(m, pairs, sizes, parse_strategy("layermask"))) {
    EXPECT_EQ(v, 0.0) << n;  // c_n = c = 1
  }
}

TEST(DiagnosticsTest, CollapseErrors) {
  const Model m = toy_resnet();
  const std::vector<std::pair<Tensor, Tensor>> bad = {
      {Tensor({3, 16, 16}), Tensor({3, 16, 16})}};
  const std::vector<std::size_t> sizes = {8};
  EXPECT_THROW(collapse_test(m, bad, sizes, parse_strategy("layermask")),
               ValidationError);
}

TEST(DiagnosticsTest, MagnitudeEndpointsAndScaling) {
  const Model m = toy_resnet();
  Rng rng(9);
  std::vector<Tensor> imgs;
  for (int i = 0; i < 6; ++i) imgs.push_back(random_image(rng, 32, 32));
  const std::vector<std::size_t> sizes = {0, 8, 16, 24, 32};
  const Strategy lm = parse_strategy("layermask");
  const auto curve = magnitude_test(m, imgs, sizes, lm);
  EXPECT_EQ(curve[0].second, 0.0);
  double plain = 0.0;
  for (const Tensor& img : imgs) {
    const auto f = forward(m.graph, m.weights, normalize(img, lm.normalization)).features;
    double sq = 0.0;
    for (float v : f) sq += static_cast<double>(v) * v;
    plain += std::sqrt(sq);
  }
  EXPECT_NEAR(curve[4].second, plain / 6, 1e-12);
  std::vector<double> area, norm;
  for (const auto& [n, v] : curve) {
    area.push_back(static_cast<double>(n * n));
    norm.push_back(v);
  }
  EXPECT_GE(pearson_correlation(area, norm), 0.9);
  const std::vector<std::size_t> too_big = {33};
  EXPECT_THROW(magnitude_test(m, imgs, too_big, lm), ValidationError);
}

TEST(PearsonTest, Basics) {
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {2, 4, 6, 8};
  const std::vector<double> c = {4, 3, 2, 1};
  EXPECT_NEAR(pearson_correlation(a, b), 1.0, 1e-12);
  EXPECT_NEAR(pearson_correlation(a, c), -1.0, 1e-12);
  EXPECT_THROW(pearson_correlation(a, std::vector<double>(4, 1.0)), NumericalError);
}

}  // namespace
}  // namespace lmask
