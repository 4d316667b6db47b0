// Copyright 2026 The plantmon Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "json.hpp"
#include "plantmon/cli.hpp"
#include "plantmon/csv.hpp"
#include "plantmon/raster.hpp"
#include "test_util.hpp"

namespace plantmon::cli {
namespace {

using nlohmann::json;
using plantmon::testing::slurp;
using plantmon::testing::spit;
using plantmon::testing::TempDir;

int call(std::vector<std::string> args, std::string* log_text = nullptr) {
  std::ostringstream log;
  const int rc = run(args, log);
  if (log_text) *log_text = log.str();
  return rc;
}

std::string small_config(const TempDir& dir) {
  const std::string path = (dir / "small.json").string();
  spit(path, R"({"seed": 5,
    "synth": {"preset": "separated", "feature_count": 8, "plants_per_tank": 40},
    "rf": {"n_trees": 6}, "ae": {"epochs": 3}})");
  return path;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("PLANTMON_SEED"); }
  void TearDown() override { unsetenv("PLANTMON_SEED"); }

  std::string gen(const std::string& out) {
    EXPECT_EQ(call({"--config", cfg_, "--quiet", "--out", out, "gen"}), kExitOk);
    return out;
  }

  TempDir tmp_;
  std::string cfg_ = small_config(tmp_);
};

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(call({"--help"}), kExitOk);
  EXPECT_EQ(call({}), kExitConfig);
  EXPECT_EQ(call({"frobnicate"}), kExitConfig);
  EXPECT_EQ(call({"--seed", "abc", "gen"}), kExitConfig);
  EXPECT_EQ(call({"--config", (tmp_ / "absent.json").string(), "gen"}), kExitConfig);
  spit(tmp_ / "bad.json", "{not json");
  EXPECT_EQ(call({"--config", (tmp_ / "bad.json").string(), "gen"}), kExitConfig);
  EXPECT_EQ(call({"--out", (tmp_ / "o").string(), "gen", "--preset", "loud"}), kExitConfig);
}

TEST_F(CliTest, GenIsReproducible) {
  const std::string a = gen((tmp_ / "a").string());
  const std::string b = gen((tmp_ / "b").string());
  for (const char* f : {"features.csv", "ground_truth.csv", "latent.csv", "truth.json",
                        "gen_run.json"}) {
    EXPECT_EQ(slurp(a + "/" + f), slurp(b + "/" + f)) << f;
  }
  const json run = json::parse(slurp(a + "/gen_run.json"));
  EXPECT_EQ(run["command"], "gen");
  EXPECT_EQ(run["seed"], 5);
  EXPECT_EQ(run["config"]["plants_per_tank"], 40);
}

TEST_F(CliTest, SeedPrecedence) {
  const auto seed_of = [&](const std::string& dir) {
    return json::parse(slurp(dir + "/gen_run.json"));
  };
  const std::string out = (tmp_ / "s").string();
  gen(out);
  EXPECT_EQ(seed_of(out)["seed_source"], "config");
  setenv("PLANTMON_SEED", "17", 1);
  gen(out);
  EXPECT_EQ(seed_of(out)["seed"], 17);
  EXPECT_EQ(seed_of(out)["seed_source"], "environment");
  ASSERT_EQ(call({"--config", cfg_, "--quiet", "--seed", "23", "--out", out, "gen"}), kExitOk);
  EXPECT_EQ(seed_of(out)["seed"], 23);
  EXPECT_EQ(seed_of(out)["seed_source"], "flag");
  setenv("PLANTMON_SEED", "x1", 1);
  EXPECT_EQ(call({"--config", cfg_, "--out", out, "gen"}), kExitConfig);
}

TEST_F(CliTest, EarlywarnDefaultsToSeventeenLengths) {
  const std::string out = gen((tmp_ / "e").string());
  ASSERT_EQ(call({"--config", cfg_, "--quiet", "--out", out, "earlywarn", "--features",
                  out + "/features.csv", "--select", "NDVI_mean"}),
            kExitOk);
  const csv::Table t = csv::read(out + "/earlywarn.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"feature", "length", "target_treatment",
                                                "net_detection"}));
  EXPECT_EQ(t.rows.size(), 17u * 2);
  EXPECT_EQ(t.rows.front()[1], "6");
  EXPECT_EQ(t.rows.back()[1], "22");
  const std::string svg = slurp(out + "/earlywarn.svg");
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(call({"--config", cfg_, "--out", out, "earlywarn", "--features",
                  out + "/features.csv", "--lengths", "5..9"}),
            kExitConfig);
  EXPECT_EQ(call({"--config", cfg_, "--out", out, "earlywarn", "--features",
                  out + "/features.csv", "--select", "NOPE_mean"}),
            kExitConfig);
}

TEST_F(CliTest, TimestampCommentIsOptional) {
  const std::string out = gen((tmp_ / "t").string());
  const std::vector<std::string> base = {"--config", cfg_, "--quiet", "--out", out};
  auto args = base;
  args.insert(args.end(), {"--no-timestamp", "earlywarn", "--features", out + "/features.csv",
                           "--select", "NDVI_mean", "--lengths", "6"});
  ASSERT_EQ(call(args), kExitOk);
  EXPECT_EQ(slurp(out + "/earlywarn.svg").find("<!--"), std::string::npos);
  args = base;
  args.insert(args.end(), {"earlywarn", "--features", out + "/features.csv", "--select",
                           "NDVI_mean", "--lengths", "6"});
  ASSERT_EQ(call(args), kExitOk);
  EXPECT_NE(slurp(out + "/earlywarn.svg").find("<!--"), std::string::npos);
}

TEST_F(CliTest, EstimateRfaeMemPipeline) {
  const std::string out = gen((tmp_ / "p").string());
  ASSERT_EQ(call({"--config", cfg_, "--quiet", "--out", out, "estimate", "--features",
                  out + "/features.csv", "--labels", out + "/ground_truth.csv", "--variables",
                  "fw,s"}),
            kExitOk);
  const csv::Table m = csv::read(out + "/cv_metrics.csv");
  EXPECT_EQ(m.header, (std::vector<std::string>{"variable", "fold", "r2", "rmse"}));
  EXPECT_EQ(m.rows.size(), 2u * 27);
  const json summary = json::parse(slurp(out + "/cv_summary.json"));
  EXPECT_TRUE(summary.contains("run"));
  EXPECT_EQ(summary["run"]["seed"], 5);
  ASSERT_EQ(call({"--config", cfg_, "--quiet", "--out", out, "rfae", "--estimates",
                  out + "/estimated_trajectories.csv", "--variables", "fw,s", "--lengths",
                  "6..8"}),
            kExitOk);
  EXPECT_EQ(csv::read(out + "/rfae.csv").rows.size(), 2u * 3 * 2);
  // Default variable list needs all eight estimates.
  EXPECT_EQ(call({"--config", cfg_, "--out", out, "rfae", "--estimates",
                  out + "/estimated_trajectories.csv"}),
            kExitConfig);
  ASSERT_EQ(call({"--config", cfg_, "--quiet", "--out", out, "mem", "--labels",
                  out + "/ground_truth.csv", "--estimated",
                  out + "/estimated_trajectories.csv"}),
            kExitOk);
  EXPECT_EQ(csv::read(out + "/mem.csv").rows.size(), 8u * 7);
  EXPECT_EQ(csv::read(out + "/mem_estimated.csv").rows.size(), 2u * 7);
  const csv::Table mem = csv::read(out + "/mem.csv");
  for (const auto& r : mem.rows) {
    if (r[0] == "fw") {
      EXPECT_EQ(r[mem.require("dominant")], "treatment");
    }
  }
}

TEST_F(CliTest, MissingInputsAreConfigErrors) {
  const std::string out = gen((tmp_ / "m").string());
  EXPECT_EQ(call({"--out", out, "estimate", "--features", out + "/features.csv", "--labels",
                  out + "/nope.csv"}),
            kExitConfig);
  EXPECT_EQ(call({"--out", out, "estimate", "--features", out + "/features.csv"}), kExitConfig);
  EXPECT_EQ(call({"--out", out, "mem"}), kExitConfig);
  EXPECT_EQ(call({"--out", out, "energy"}), kExitConfig);
}

TEST_F(CliTest, UnbalancedMemInputNamesTankAndDay) {
  const std::string out = gen((tmp_ / "u").string());
  std::string gt = slurp(out + "/ground_truth.csv");
  gt.erase(gt.find_last_of('\n', gt.size() - 2) + 1);  // drop the last row
  spit(out + "/gt_short.csv", gt);
  std::string log;
  EXPECT_EQ(call({"--out", out, "mem", "--labels", out + "/gt_short.csv"}, &log), kExitConfig);
  EXPECT_NE(log.find("26"), std::string::npos) << log;
  EXPECT_NE(log.find("T3-3"), std::string::npos) << log;
}

TEST_F(CliTest, EnergyReportAndEmptyLedger) {
  const std::string out = (tmp_ / "en").string();
  const std::string ledger = std::string(PLANTMON_SOURCE_DIR) + "/data/energy_ledger.json";
  std::string log;
  ASSERT_EQ(call({"--out", out, "--no-timestamp", "energy", "--ledger", ledger}, &log), kExitOk);
  EXPECT_NE(log.find("93"), std::string::npos);
  const json rep = json::parse(slurp(out + "/energy_report.json"));
  EXPECT_TRUE(rep.contains("run"));
  const std::string first = slurp(out + "/energy_report.json");
  ASSERT_EQ(call({"--out", out, "--no-timestamp", "energy", "--ledger", ledger}), kExitOk);
  EXPECT_EQ(slurp(out + "/energy_report.json"), first);
  EXPECT_NE(slurp(out + "/energy_tables.md").find("RF+AE"), std::string::npos);
  spit(tmp_ / "empty.json", "");
  EXPECT_EQ(call({"--out", out, "energy", "--ledger", (tmp_ / "empty.json").string()}),
            kExitConfig);
  spit(tmp_ / "blank.json", "{}");
  EXPECT_EQ(call({"--out", out, "energy", "--ledger", (tmp_ / "blank.json").string()}),
            kExitConfig);
}

void write_sample(const std::filesystem::path& dir, std::size_t w, std::size_t h,
                  std::size_t mask_w) {
  std::vector<std::vector<float>> planes(10, std::vector<float>(w * h));
  for (std::size_t c = 0; c < 10; ++c) {
    for (std::size_t i = 0; i < w * h; ++i) planes[c][i] = 0.1f + 0.05f * c + 0.001f * i;
  }
  raster::save_cube(raster::MsiCube(w, h, raster::default_channels(), planes), dir / "cube");
  std::vector<bool> bits(mask_w * h, false);
  for (std::size_t i = 0; i < bits.size(); i += 2) bits[i] = true;
  raster::save_mask(raster::FoliarMask(mask_w, h, bits), dir / "mask");
}

TEST_F(CliTest, ExtractFromManifest) {
  const auto in = tmp_ / "in";
  write_sample(in / "a", 6, 4, 6);
  write_sample(in / "b", 6, 4, 5);  // mask does not match the cube
  spit(in / "manifest.csv",
       "sample_id,tank,treatment,dat,cube,mask\n"
       "P01-T1-1,T1-1,T1,4,a/cube,a/mask\n"
       "P02-T1-1,T1-1,T1,4,b/cube,b/mask\n");
  const std::string out = (tmp_ / "x").string();
  std::string log;
  ASSERT_EQ(call({"--out", out, "extract", "--input", in.string()}, &log), kExitOk);
  EXPECT_NE(log.find("P02-T1-1"), std::string::npos);
  const csv::Table t = csv::read(out + "/features.csv");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_GE(t.header.size(), 4u + 106u);
  EXPECT_EQ(t.rows[0][0], "P01-T1-1");
  const json run = json::parse(slurp(out + "/extract_run.json"));
  EXPECT_EQ(run["inputs"]["skipped"].size(), 1u);

  std::filesystem::create_directories(tmp_ / "empty");
  EXPECT_EQ(call({"--out", out, "extract", "--input", (tmp_ / "empty").string()}), kExitData);
  EXPECT_EQ(call({"--out", out, "extract", "--input", (tmp_ / "none").string()}), kExitConfig);
}

}  // namespace
}  // namespace plantmon::cli
