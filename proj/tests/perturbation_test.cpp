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

#include "lmask/perturbation.hpp"

#include <gtest/gtest.h>

#include "lmask/error.hpp"
#include "lmask/toy_model.hpp"
#include "test_util.hpp"

namespace lmask {
namespace {

using testing::random_block_mask;
using testing::random_image;

const char* const kAllStrategies[] = {
    "blackout",  "greyout",         "color:1,0,0",
    "imagemean", "layermask",       "layermask:zero",
    "layermask:prefix=4", "layermask:zero:prefix=2"};

TEST(StrategyTest, Parse) {
  EXPECT_EQ(parse_strategy("blackout").kind, StrategyKind::kBlackout);
  EXPECT_EQ(parse_strategy("greyout").kind, StrategyKind::kGreyout);
  EXPECT_EQ(parse_strategy("imagemean").kind, StrategyKind::kImageMean);
  const Strategy c = parse_strategy("color:0,0.5,1");
  EXPECT_EQ(c.kind, StrategyKind::kConstantColor);
  EXPECT_EQ(c.color, (std::array<float, 3>{0.0f, 0.5f, 1.0f}));
  const Strategy lm = parse_strategy("layermask:zero:prefix=4");
  EXPECT_EQ(lm.kind, StrategyKind::kLayerMasking);
  EXPECT_EQ(lm.masking.padding, PaddingMode::kZero);
  EXPECT_EQ(lm.masking.prefix, std::optional<std::size_t>(4));
  for (const char* s : kAllStrategies) EXPECT_EQ(to_string(parse_strategy(s)), s);
}

TEST(StrategyTest, ParseErrors) {
  for (const char* bad : {"", "black", "color:1,0", "color:1,0,2",
                          "color:a,b,c", "layermask:fast", "layermask:prefix=",
                          "layermask:prefix=-1"}) {
    EXPECT_THROW(parse_strategy(bad), ValidationError) << bad;
  }
}

TEST(PixelStrategyTest, Examples) {
  Rng rng(1);
  const Tensor img = random_image(rng, 6, 5);
  for (const char* s : {"blackout", "greyout", "color:0,1,0", "imagemean"}) {
    EXPECT_EQ(apply_pixel_strategy(img, Mask::ones(6, 5), parse_strategy(s)), img);
  }
  EXPECT_EQ(apply_pixel_strategy(img, Mask::zeros(6, 5), parse_strategy("blackout")),
            Tensor({3, 6, 5}));
  const Tensor flat({3, 6, 5}, 0.3f);
  EXPECT_EQ(apply_pixel_strategy(flat, random_block_mask(rng, 6, 5),
                                 parse_strategy("imagemean")),
            flat);
  EXPECT_THROW(apply_pixel_strategy(img, Mask::ones(6, 5), parse_strategy("layermask")),
               ValidationError);
  EXPECT_THROW(apply_pixel_strategy(img, Mask::ones(5, 5), parse_strategy("blackout")),
               ShapeError);
}

TEST(PixelStrategyTest, ImageMeanUsesUnmaskedPixels) {
  Tensor img({3, 1, 4}, {0.0f, 1.0f, 0.5f, 0.5f, 0, 0, 0, 0, 1, 1, 1, 1});
  Mask m = Mask::zeros(1, 4);
  m.set(0, 0, true);
  m.set(0, 1, true);
  const Tensor out = apply_pixel_strategy(img, m, parse_strategy("imagemean"));
  EXPECT_EQ(out.at(0, 0, 2), 0.5f);
  EXPECT_EQ(out.at(0, 0, 3), 0.5f);
  EXPECT_EQ(out.at(2, 0, 3), 1.0f);
  // Fully masked falls back to the normalization mean.
  const Tensor all = apply_pixel_strategy(img, Mask::zeros(1, 4),
                                          parse_strategy("imagemean"));
  EXPECT_EQ(all.at(0, 0, 0), 0.485f);
}

TEST(PixelStrategyTest, GreyoutNormalizesToZero) {
  Rng rng(2);
  const Tensor img = random_image(rng, 8, 8);
  const Mask m = random_block_mask(rng, 8, 8);
  const Strategy grey = parse_strategy("greyout");
  const Tensor n = normalize(apply_pixel_strategy(img, m, grey), grey.normalization);
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (m.grid()[i % 64] == 0.0f) EXPECT_EQ(n[i], 0.0f);
  }
}

TEST(EvaluateTest, FullMaskEqualsPlainForward) {
  const Model m = toy_resnet();
  Rng rng(3);
  const Tensor img = random_image(rng, 32, 32);
  const auto plain =
      forward(m.graph, m.weights, normalize(img, Normalization{}));
  for (const char* s : kAllStrategies) {
    const auto r = evaluate(m, img, Mask::ones(32, 32), parse_strategy(s));
    EXPECT_TRUE(bit_identical(r.logits, plain.logits)) << s;
  }
}

TEST(EvaluateTest, GreyoutAllMaskedIsZeroInput) {
  const Model m = toy_resnet();
  Rng rng(4);
  const auto r = evaluate(m, random_image(rng, 32, 32), Mask::zeros(32, 32),
                          parse_strategy("greyout"));
  const auto zero = forward(m.graph, m.weights, Tensor({3, 32, 32}));
  EXPECT_TRUE(bit_identical(r.logits, zero.logits));
}

TEST(EvaluateTest, LayerMaskingDiffersFromBlackout) {
  const Model m = toy_resnet();
  Rng rng(5);
  const Tensor img = random_image(rng, 32, 32);
  Mask half = Mask::zeros(32, 32);
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t x = 0; x < 16; ++x) half.set(y, x, true);
  }
  const auto a = evaluate(m, img, half, parse_strategy("layermask"));
  const auto b = evaluate(m, img, half, parse_strategy("blackout"));
  EXPECT_FALSE(bit_identical(a.logits, b.logits));
}

TEST(EvaluateTest, InsensitiveToMaskedPixelsForEveryStrategy) {
  const Model m = toy_resnet();
  Rng rng(6);
  for (int trial = 0; trial < 4; ++trial) {
    const Tensor img = random_image(rng, 32, 32);
    const Mask mask = random_block_mask(rng, 32, 32);
    Tensor other = img;
    for (std::size_t i = 0; i < other.size(); ++i) {
      if (mask.grid()[i % 1024] == 0.0f) other[i] = static_cast<float>(rng.uniform());
    }
    for (const char* s : kAllStrategies) {
      const Strategy st = parse_strategy(s);
      EXPECT_TRUE(bit_identical(evaluate(m, img, mask, st).logits,
                                evaluate(m, other, mask, st).logits))
          << s;
    }
  }
}

}  // namespace
}  // namespace lmask
