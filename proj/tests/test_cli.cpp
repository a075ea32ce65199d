// Copyright 2026 The pgac Authors
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

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "pgac/checkpoint.hpp"
#include "pgac/io.hpp"
#include "test_util.hpp"

namespace pgac {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pgac");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const std::string kSample = std::string(PGAC_SOURCE_DIR) + "/data/sample_box.xyz";

TEST(Cli, VersionAndUsage) {
  Result v = run_cli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("checkpoint format 1"), std::string::npos);
  EXPECT_EQ(run_cli({}).code, cli::kExitInvalid);
  Result bad = run_cli({"segment", "--bogus"});
  EXPECT_EQ(bad.code, cli::kExitInvalid);
  EXPECT_FALSE((bad.out + bad.err).empty());
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitInvalid);
}

TEST(Cli, SegmentBundledSample) {
  const std::string dir = testing::scratch_dir("cli_seg");
  Result r = run_cli({"segment", kSample, dir + "/out.xyz"});
  ASSERT_EQ(r.code, 0) << r.err;
  PointCloud in = load_cloud(kSample), out = load_cloud(dir + "/out.xyz");
  EXPECT_TRUE(out.has_labels());
  EXPECT_EQ(out.points, in.points);
  EXPECT_EQ(run_cli({"segment", dir + "/missing.xyz", dir + "/o.xyz"}).code, cli::kExitInvalid);
  EXPECT_EQ(run_cli({"segment", kSample, dir + "/o.xyz", "--mu", "-1"}).code, cli::kExitInvalid);
}

TEST(Cli, PartitionWritesTableAndSidecar) {
  const std::string dir = testing::scratch_dir("cli_part");
  for (const char* g : {"gap", "knn"}) {
    const std::string out = dir + "/p_" + g + ".txt";
    Result r = run_cli({"partition", kSample, out, "--groups", "16", "--grouping", g});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(out + ".json"));
    EXPECT_NE(read_file(out + ".json").find("\"num_patches\": 16"), std::string::npos);
  }
  const std::string a = read_file(dir + "/p_gap.txt");
  run_cli({"partition", kSample, dir + "/again.txt", "--groups", "16"});
  EXPECT_EQ(read_file(dir + "/again.txt"), a);
  EXPECT_EQ(run_cli({"partition", kSample, dir + "/x.txt", "--grouping", "voronoi"}).code,
            cli::kExitInvalid);
  EXPECT_EQ(run_cli({"partition", kSample, dir + "/x.txt", "--groups", "5000"}).code,
            cli::kExitInvalid);
}

TEST(Cli, PretrainProbeHeatmapSmoke) {
  const std::string dir = testing::scratch_dir("cli_pre");
  Result r = run_cli({"--threads", "1", "pretrain", "--preset", "micro", "--out", dir + "/run",
                      "--epochs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("probe_accuracy"), std::string::npos);
  for (const char* f : {"checkpoint.bin", "metrics.csv", "config.txt", "heatmaps/epoch_000.pgm"}) {
    EXPECT_TRUE(fs::exists(dir + "/run/" + f)) << f;
  }
  EXPECT_EQ(read_file(dir + "/run/metrics.csv").rfind("step,epoch,loss,lr,tau_t,", 0), 0u);

  Result p = run_cli({"probe", "--checkpoint", dir + "/run/checkpoint.bin"});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(p.out.rfind("accuracy ", 0), 0u);

  Result h = run_cli({"heatmap", "--checkpoint", dir + "/run/checkpoint.bin", "--hw", "4x4",
                      "--out", dir + "/h.pgm"});
  ASSERT_EQ(h.code, 0) << h.err;
  EXPECT_TRUE(fs::exists(dir + "/h.pgm"));
  EXPECT_TRUE(fs::exists(dir + "/h.csv"));
  EXPECT_EQ(run_cli({"heatmap", "--checkpoint", dir + "/run/checkpoint.bin", "--hw", "3x3",
                     "--out", dir + "/h2.pgm"})
                .code,
            cli::kExitInvalid);
  EXPECT_EQ(run_cli({"heatmap", "--checkpoint", dir + "/run/checkpoint.bin", "--hw", "wide",
                     "--out", dir + "/h2.pgm"})
                .code,
            cli::kExitInvalid);
}

TEST(Cli, PretrainIsByteIdenticalAcrossRuns) {
  const std::string dir = testing::scratch_dir("cli_det");
  for (const char* run : {"a", "b"}) {
    Result r = run_cli({"--threads", "1", "pretrain", "--preset", "micro", "--out",
                        dir + "/" + run, "--epochs", "2", "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* f : {"checkpoint.bin", "metrics.csv", "config.txt"}) {
    EXPECT_EQ(read_file(dir + "/a/" + f), read_file(dir + "/b/" + f)) << f;
  }
}

TEST(Cli, ConfigFileAndOverrides) {
  const std::string dir = testing::scratch_dir("cli_cfg");
  write_file_atomic(dir + "/c.txt", "[run]\npreset = micro\n[train]\nepochs = 1\n");
  Result r = run_cli({"pretrain", "--config", dir + "/c.txt", "--out", dir + "/run", "--set",
                      "codebook.maintenance=off", "--mask-ratio", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string canon = read_file(dir + "/run/config.txt");
  EXPECT_NE(canon.find("codebook.maintenance = off"), std::string::npos) << canon;
  EXPECT_NE(canon.find("train.mask_ratio = 0.5"), std::string::npos) << canon;

  write_file_atomic(dir + "/bad.txt", "[train]\nepochs = 1\nbroken\n");
  Result bad = run_cli({"pretrain", "--config", dir + "/bad.txt", "--out", dir + "/x"});
  EXPECT_EQ(bad.code, cli::kExitInvalid);
  EXPECT_NE(bad.err.find("line 3"), std::string::npos) << bad.err;
  EXPECT_EQ(run_cli({"pretrain", "--preset", "micro", "--out", dir + "/y", "--set",
                     "train.mask_ratio=1.5"})
                .code,
            cli::kExitInvalid);
  EXPECT_EQ(run_cli({"pretrain", "--preset", "micro", "--out", dir + "/y", "--set",
                     "codebook.format=queue"})
                .code,
            cli::kExitInvalid);
}

TEST(Cli, ProbeRejectsTamperedCheckpoint) {
  const std::string dir = testing::scratch_dir("cli_tamper");
  ASSERT_EQ(run_cli({"pretrain", "--preset", "micro", "--out", dir, "--epochs", "1"}).code, 0);
  Checkpoint c = load_checkpoint(dir + "/checkpoint.bin");
  c.config_digest = "0000";
  save_checkpoint(dir + "/bad.bin", c);
  EXPECT_EQ(run_cli({"probe", "--checkpoint", dir + "/bad.bin"}).code, cli::kExitInvalid);
  write_file_atomic(dir + "/junk.bin", "not a checkpoint");
  EXPECT_EQ(run_cli({"probe", "--checkpoint", dir + "/junk.bin"}).code, cli::kExitInvalid);
}

TEST(Cli, GradcheckMicroPasses) {
  Result r = run_cli({"gradcheck"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  Result strict = run_cli({"gradcheck", "--tolerance", "1e-30"});
  EXPECT_EQ(strict.code, cli::kExitFault);
}

}  // namespace
}  // namespace pgac
