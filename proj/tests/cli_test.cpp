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

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "lmask/evaluation.hpp"
#include "lmask/image_io.hpp"
#include "lmask/interpretability.hpp"
#include "test_util.hpp"

namespace lmask {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lmask_cli_" + std::string(::testing::UnitTest::GetInstance()
                                           ->current_test_info()
                                           ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    Rng rng(1);
    for (int i = 0; i < 4; ++i) {
      write_ppm("img" + std::to_string(i) + ".ppm",
                testing::natural_image(rng, 32, 32));
    }
    Mask half = Mask::zeros(32, 32);
    for (std::size_t y = 0; y < 32; ++y) {
      for (std::size_t x = 0; x < 16; ++x) half.set(y, x, true);
    }
    write_mask("half.pgm", half);
    write_mask("ones.pgm", Mask::ones(32, 32));
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write_ppm(const std::string& name, const Tensor& img) {
    const auto bytes = encode_ppm(img);
    write_file_atomic(path(name), std::span<const std::uint8_t>(bytes));
  }
  void write_mask(const std::string& name, const Mask& m) {
    const auto bytes = encode_pgm_binary(gray_from_mask(m));
    write_file_atomic(path(name), std::span<const std::uint8_t>(bytes));
  }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "lmask");
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  std::vector<std::string> model_args() const {
    return {"--graph", std::string(LMASK_MODEL_DIR) + "/toy_resnet.json",
            "--weights", std::string(LMASK_MODEL_DIR) + "/toy_resnet.lmw"};
  }

  std::vector<std::string> with_model(std::vector<std::string> args) const {
    const auto m = model_args();
    args.insert(args.begin() + 1, m.begin(), m.end());
    return args;
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, ForwardAndFullMaskForwardAgree) {
  ASSERT_EQ(run(with_model({"forward", "--image", path("img0.ppm"), "--features"})), 0)
      << err_.str();
  const json plain = json::parse(out_.str());
  EXPECT_EQ(plain["logits"].size(), 10u);
  EXPECT_EQ(plain["top5"].size(), 5u);
  EXPECT_EQ(plain["features"].size(), 16u);
  for (const char* s : {"layermask", "blackout", "layermask:zero:prefix=4"}) {
    ASSERT_EQ(run(with_model({"mask-forward", "--image", path("img0.ppm"), "--mask",
                              path("ones.pgm"), "--strategy", s})),
              0)
        << err_.str();
    EXPECT_EQ(json::parse(out_.str())["logits"], plain["logits"]) << s;
  }
}

TEST_F(CliTest, ExitCodes) {
  auto args = with_model({"forward", "--image", path("img0.ppm")});
  args[4] = path("missing.lmw");
  EXPECT_EQ(run(args), cli::kIoError);
  EXPECT_NE(err_.str().find("missing.lmw"), std::string::npos);
  EXPECT_EQ(run(with_model({"mask-forward", "--image", path("img0.ppm"), "--mask",
                            path("half.pgm"), "--strategy", "sparkle"})),
            cli::kValidationError);
  EXPECT_EQ(run(with_model({"forward"})), cli::kValidationError);
  EXPECT_EQ(run({"no-such-command"}), cli::kValidationError);
  EXPECT_EQ(run({"--help"}), 0);
  write_file_atomic(path("empty.jsonl"), "");
  EXPECT_EQ(run(with_model({"ablate", "--manifest", path("empty.jsonl")})),
            cli::kValidationError);
  EXPECT_EQ(run(with_model({"mask-forward", "--image", path("img0.ppm"), "--mask",
                            path("half.pgm"), "--std", "0.2", "0", "0.2"})),
            cli::kValidationError);
}

TEST_F(CliTest, SegmentWritesLabelsAndSidecar) {
  Rng rng(2);
  write_ppm("big.ppm", testing::natural_image(rng, 224, 224));
  ASSERT_EQ(run({"segment", "--image", path("big.ppm"), "--alg", "grid", "--patch",
                 "16", "--out", path("grid.pgm")}),
            0)
      << err_.str();
  const json side = json::parse(read_text_file(path("grid.pgm.json")));
  EXPECT_EQ(side["count"], 196);
  EXPECT_EQ(side["algorithm"], "grid");
  const GrayImage labels = read_pgm_file(path("grid.pgm"));
  EXPECT_EQ(labels.values.back(), 195u);

  ASSERT_EQ(run({"segment", "--image", path("big.ppm"), "--alg", "quickshift",
                 "--out", path("qs.pgm")}),
            0);
  const json qs = json::parse(read_text_file(path("qs.pgm.json")));
  EXPECT_EQ(qs["params"]["kernel_size"], 2.0);
  EXPECT_EQ(qs["params"]["max_dist"], 200.0);
  EXPECT_EQ(qs["params"]["ratio"], 0.2);

  ASSERT_EQ(run({"segment", "--image", path("big.ppm"), "--alg", "slic",
                 "--n-segments", "196", "--out", path("slic.pgm")}),
            0);
  const json sl = json::parse(read_text_file(path("slic.pgm.json")));
  EXPECT_GE(sl["count"].get<int>(), 147);
  EXPECT_LE(sl["count"].get<int>(), 245);
}

TEST_F(CliTest, AblateThenAuc) {
  std::string manifest;
  for (int i = 0; i < 4; ++i) {
    manifest += "{\"image\": \"img" + std::to_string(i) + ".ppm\", \"label\": " +
                std::to_string(i) + "}\n";
  }
  write_file_atomic(path("data.jsonl"), manifest);
  ASSERT_EQ(run(with_model({"ablate", "--manifest", path("data.jsonl"), "--patch", "8",
                            "--strategy", "greyout", "--grid", "0,0.5,1", "--out",
                            path("grey.csv")})),
            0)
      << err_.str();
  ASSERT_EQ(run(with_model({"ablate", "--manifest", path("data.jsonl"), "--patch", "8",
                            "--grid", "0,0.5,1", "--threads", "3", "--out",
                            path("lm.csv")})),
            0);
  const auto grey = parse_ablation_csv(read_text_file(path("grey.csv")));
  const auto lm = parse_ablation_csv(read_text_file(path("lm.csv")));
  ASSERT_EQ(grey.size(), 3u);
  EXPECT_EQ(grey[0].accuracy, lm[0].accuracy);  // nothing masked at 0

  ASSERT_EQ(run({"auc", "greyout:" + path("grey.csv"), "layermask:" + path("lm.csv"),
                 "layermask:" + path("lm.csv")}),
            0)
      << err_.str();
  std::istringstream table(out_.str());
  std::string header, row1, row2;
  std::getline(table, header);
  std::getline(table, row1);
  std::getline(table, row2);
  EXPECT_EQ(header.substr(0, 17), "strategy,n_runs,a");
  EXPECT_EQ(row1.substr(0, 10), "greyout,1,");
  EXPECT_EQ(row2.substr(0, 12), "layermask,2,");
  EXPECT_EQ(run({"auc", "nolabel"}), cli::kValidationError);
}

TEST_F(CliTest, ExplainAndAlign) {
  ASSERT_EQ(run(with_model({"explain", "--image", path("img0.ppm"), "--patch", "8",
                            "--n-samples", "60", "--out", path("e.json"),
                            "--overlay", path("o.ppm")})),
            0)
      << err_.str();
  const Explanation e = explanation_from_json(read_text_file(path("e.json")));
  EXPECT_EQ(e.scores.size(), 16u);
  EXPECT_EQ(e.n_samples, 60u);
  EXPECT_GE(e.target_class, 0);
  EXPECT_EQ(read_ppm_file(path("o.ppm")).shape(), (Shape{3, 32, 32}));

  ASSERT_EQ(run(with_model({"explain", "--image", path("img0.ppm"), "--patch", "8",
                            "--n-samples", "60", "--top-k", "0", "--overlay",
                            path("o0.ppm"), "--out", path("e0.json")})),
            0);
  EXPECT_EQ(read_file(path("o0.ppm")), read_file(path("img0.ppm")));

  ASSERT_EQ(run({"segment", "--image", path("img0.ppm"), "--alg", "grid", "--patch",
                 "8", "--out", path("seg.pgm")}),
            0);
  Mask obj = Mask::zeros(32, 32);
  for (std::size_t y = 8; y < 24; ++y) {
    for (std::size_t x = 8; x < 24; ++x) obj.set(y, x, true);
  }
  write_mask("obj.pgm", obj);
  write_file_atomic(path("align.jsonl"),
                    "{\"segments\": \"seg.pgm\", \"object_mask\": \"obj.pgm\", "
                    "\"explanations\": {\"a\": \"e.json\", \"b\": \"e.json\"}}\n");
  ASSERT_EQ(run({"align", "--manifest", path("align.jsonl")}), 0) << err_.str();
  std::istringstream table(out_.str());
  std::string header, a, b;
  std::getline(table, header);
  std::getline(table, a);
  std::getline(table, b);
  EXPECT_EQ(header, "strategy,mean_alignment,win_rate,n_items");
  EXPECT_NE(a.find(",0.5,1"), std::string::npos) << a;
  EXPECT_NE(b.find(",0.5,1"), std::string::npos) << b;
}

TEST_F(CliTest, Diagnostics) {
  ASSERT_EQ(run(with_model({"diagnostics", "--mode", "linearity", "--patch", "32",
                            "--images", path("img0.ppm"), path("img1.ppm")})),
            0)
      << err_.str();
  EXPECT_EQ(out_.str(), "image,cosine\n0,1\n1,1\n");
  ASSERT_EQ(run(with_model({"diagnostics", "--mode", "collapse", "--sizes", "8,32",
                            "--images", path("img0.ppm"), path("img1.ppm")})),
            0);
  EXPECT_NE(out_.str().find("\n32,0\n"), std::string::npos) << out_.str();
  ASSERT_EQ(run(with_model({"diagnostics", "--mode", "magnitude", "--sizes", "0,16",
                            "--images", path("img0.ppm")})),
            0);
  EXPECT_EQ(out_.str().substr(0, 22), "size,mean_norm\n0,0\n16,");
  EXPECT_EQ(run(with_model({"diagnostics", "--mode", "wobble", "--images",
                            path("img0.ppm")})),
            cli::kValidationError);
}

TEST_F(CliTest, PadDemo) {
  ASSERT_EQ(run({"pad-demo", "--image", path("img0.ppm"), "--mask", path("half.pgm"),
                 "--k", "0", "--prefix", path("k0")}),
            0);
  EXPECT_TRUE(fs::exists(path("k0_0.ppm")));
  EXPECT_FALSE(fs::exists(path("k0_1.ppm")));
  const Tensor frame = read_ppm_file(path("k0_0.ppm"));
  EXPECT_EQ(frame.at(0, 5, 20), 0.0f);

  ASSERT_EQ(run({"pad-demo", "--image", path("img0.ppm"), "--mask", path("ones.pgm"),
                 "--k", "3", "--prefix", path("full")}),
            0);
  for (int i = 0; i <= 3; ++i) {
    EXPECT_EQ(read_file(path("full_" + std::to_string(i) + ".ppm")),
              read_file(path("img0.ppm")));
  }

  write_ppm("flat.ppm", Tensor({3, 32, 32}, 0.6f));
  ASSERT_EQ(run({"pad-demo", "--image", path("flat.ppm"), "--mask", path("half.pgm"),
                 "--k", "4", "--prefix", path("flat")}),
            0);
  const Tensor last = read_ppm_file(path("flat_4.ppm"));
  const Tensor first = read_ppm_file(path("flat.ppm"));
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t x = 0; x < 20; ++x) EXPECT_EQ(last.at(1, y, x), first.at(1, y, x));
  }
}

TEST_F(CliTest, MakeToyMatchesShippedModel) {
  ASSERT_EQ(run({"make-toy", "--prefix", path("toy")}), 0);
  EXPECT_EQ(read_file(path("toy.lmw")),
            read_file(std::string(LMASK_MODEL_DIR) + "/toy_resnet.lmw"));
  EXPECT_EQ(read_text_file(path("toy.json")),
            read_text_file(std::string(LMASK_MODEL_DIR) + "/toy_resnet.json"));
}

}  // namespace
}  // namespace lmask
