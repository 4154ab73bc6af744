#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace transtrack::cli {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "transtrack");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("transtrack_cli_" + std::string(::testing::UnitTest::GetInstance()
                                                 ->current_test_info()
                                                 ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void simulate(const std::vector<std::string>& sets = {}) {
    std::vector<std::string> args{"simulate", "-o", dir_.string(), "-s", "num_frames=20"};
    for (const auto& s : sets) {
      args.push_back("-s");
      args.push_back(s);
    }
    const CliRun r = run_cli(args);
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }

  fs::path dir_;
};

TEST_F(CliTest, SimulateWritesAllOutputs) {
  simulate();
  for (const char* f : {"gt.txt", "det.txt", "scenario.txt", "features.bin"}) {
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  }
}

TEST_F(CliTest, GtAsDetectionsScoresPerfectly) {
  simulate();
  CliRun r = run_cli({"track", "--det", path("gt.txt"), "--provider", "none", "-o", path("res.txt")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  r = run_cli({"eval", "--gt", path("gt.txt"), "--result", path("res.txt"), "--kv",
               path("m.txt")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string kv = slurp(dir_ / "m.txt");
  EXPECT_NE(kv.find("mota 100"), std::string::npos) << kv;
  EXPECT_NE(kv.find("idsw 0"), std::string::npos) << kv;
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  simulate({"center_noise=1.5", "miss_prob=0.05"});
  for (const char* prov : {"replay", "kalman"}) {
    const CliRun a = run_cli({"track", "--det", path("det.txt"), "--provider", prov});
    const CliRun b = run_cli({"track", "--det", path("det.txt"), "--provider", prov});
    ASSERT_EQ(a.code, kExitOk) << a.err;
    EXPECT_FALSE(a.out.empty());
    EXPECT_EQ(a.out, b.out) << prov;
  }
}

TEST_F(CliTest, EmptyDetectionFileGivesEmptyOutput) {
  std::ofstream(path("empty.txt")).close();
  const CliRun r = run_cli({"track", "--det", path("empty.txt")});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run_cli({"track", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
  simulate();
  EXPECT_EQ(run_cli({"track", "--det", path("det.txt"), "-s", "no_such_key=1"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"track", "--det", path("det.txt"), "--provider", "psychic"}).code,
            kExitUsage);
  EXPECT_EQ(run_cli({"track", "--det", path("missing.txt")}).code, kExitRuntime);
  std::ofstream(path("bad.txt")) << "1,-1,0,zero,1,1,1\n";
  const CliRun bad = run_cli({"track", "--det", path("bad.txt")});
  EXPECT_EQ(bad.code, kExitRuntime);
  EXPECT_NE(bad.err.find("line 1"), std::string::npos) << bad.err;
}

TEST_F(CliTest, ConfigFileAndOverride) {
  simulate();
  std::ofstream(path("cfg.txt")) << "# tracker settings\nrebirth_k = 5\nassociation = nms\n";
  const CliRun a = run_cli({"track", "--det", path("gt.txt"), "-c", path("cfg.txt")});
  EXPECT_EQ(a.code, kExitOk) << a.err;
  const CliRun b = run_cli(
      {"track", "--det", path("gt.txt"), "-c", path("cfg.txt"), "--association", "hungarian"});
  EXPECT_EQ(b.code, kExitOk) << b.err;
}

TEST_F(CliTest, GradcheckPasses) {
  const CliRun r = run_cli({"gradcheck"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos) << r.out;
}

TEST_F(CliTest, TrainWritesCheckpointUsableByTrack) {
  simulate({"grid_h=4", "grid_w=4"});
  CliRun r = run_cli({"train", "-o", path("model.bin"), "--epochs", "2", "-s", "data.count=4", "-s",
                   "eval.count=2", "-s", "data.grid_h=4", "-s", "data.grid_w=4", "-s",
                   "eval.grid_h=4", "-s", "eval.grid_w=4", "-s", "model.d_model=8", "-s",
                   "model.ffn_dim=8", "-s", "model.num_queries=4"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  ASSERT_TRUE(fs::exists(dir_ / "model.bin"));
  r = run_cli({"track", "--provider", "toynet", "--checkpoint", path("model.bin"), "--features",
               path("features.bin"), "-s", "num_frames=20"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
}

TEST_F(CliTest, AblateRunsOnSmallScenario) {
  std::ofstream(path("spec.txt")) << "num_frames = 24\nnum_objects = 3\n";
  const CliRun r = run_cli({"ablate", "--scenario", path("spec.txt"), "-s", "count=2"});
  EXPECT_TRUE(r.code == kExitOk || r.code == kExitCheckFailed) << r.err;
  EXPECT_NE(r.out.find("kalman"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace transtrack::cli
