#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "ple/image.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "ple");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = ple::cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("ple_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    clean = (dir / "clean.pgm").string();
    ple::write_image(ple::read_image(PLE_TEST_DATA "/camera_head.pgm").crop(40, 40, 32, 32), clean);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  fs::path dir;
  std::string clean;
};

}  // namespace

TEST(CliParse, InpaintOptions) {
  std::ostringstream out, err;
  const char* argv[] = {"ple", "inpaint", "--keep", "0.5", "--seed", "7", PLE_TEST_DATA "/camera_head.pgm", "out.pgm"};
  const auto r = ple::cli::parse_args(8, argv, out, err);
  ASSERT_TRUE(r.spec);
  EXPECT_EQ(r.spec->command, "inpaint");
  EXPECT_EQ(r.spec->keep, 0.5);
  EXPECT_EQ(r.spec->seed, 7u);
  EXPECT_EQ(r.spec->config.seed, 7u);
  EXPECT_EQ(r.spec->output, "out.pgm");
}

TEST(CliParse, DeblurKernelAndNoise) {
  std::ostringstream out, err;
  const char* argv[] = {"ple", "deblur", "--kernel", "gauss:1.0:5", "--noise", "5", PLE_TEST_DATA "/camera_head.pgm", "o.pgm"};
  const auto r = ple::cli::parse_args(8, argv, out, err);
  ASSERT_TRUE(r.spec);
  EXPECT_EQ(r.spec->noise, 5.0);
  const auto k = ple::cli::parse_kernel(r.spec->kernel);
  EXPECT_EQ(k.side(), 5);
  const auto expect = ple::Kernel::gaussian(1.0, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_EQ(k.at(i, j), expect.at(i, j));
}

TEST(CliParse, UsageErrorsExitTwo) {
  EXPECT_EQ(call({"inpaint", "out.pgm"}).code, 2);
  EXPECT_EQ(call({"inpaint", "/nonexistent/in.pgm", "out.pgm"}).code, 2);
  EXPECT_EQ(call({"inpaint", "--bogus", PLE_TEST_DATA "/camera_head.pgm", "o.pgm"}).code, 2);
  EXPECT_EQ(call({"inpaint", "--keep", "1.5", PLE_TEST_DATA "/camera_head.pgm", "o.pgm"}).code, 2);
  EXPECT_EQ(call({}).code, 2);
  const auto r = call({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(CliParse, HelpListsDefaults) {
  const auto r = call({"inpaint", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--iterations"), std::string::npos);
  EXPECT_NE(r.out.find("[5]"), std::string::npos);
  EXPECT_NE(r.out.find("[30]"), std::string::npos);
}

TEST(CliParse, BadKernelSpec) {
  EXPECT_THROW(ple::cli::parse_kernel("gauss:x:5"), std::exception);
  EXPECT_THROW(ple::cli::parse_kernel("box"), std::exception);
}

TEST_F(CliTest, PipelineFailureExitsOne) {
  const auto r = call({"deblur", "--kernel", "gauss:2:7", clean, path("o.pgm")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("margin"), std::string::npos);
}

TEST_F(CliTest, DegradeInpaintReport) {
  ASSERT_EQ(call({"degrade", "--mode", "mask", "--keep", "0.5", "--seed", "3", "--mask-out", path("mask.pgm"), clean,
                  path("y.pgm")})
                .code,
            0);
  const auto r = call({"inpaint", "--mask", path("mask.pgm"), "--iterations", "3", "--reference", clean, "--report",
                       path("report.csv"), path("y.pgm"), path("x.pgm")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(path("report.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  const auto x = ple::read_image(path("x.pgm"));
  EXPECT_GT(ple::psnr(x, ple::read_image(clean)), ple::psnr(ple::read_image(path("y.pgm")), ple::read_image(clean)));
}

TEST_F(CliTest, RepeatRunsAreByteIdentical) {
  for (const char* name : {"a", "b"}) {
    const std::string stem = path(name);
    ASSERT_EQ(call({"degrade", "--mode", "mask", "--keep", "0.4", "--noise", "2", "--seed", "9", clean, stem + "_y.pgm"}).code, 0);
    ASSERT_EQ(call({"inpaint", "--keep", "0.4", "--seed", "9", "--iterations", "2", "--reference", clean, "--report",
                    stem + ".csv", stem + "_y.pgm", stem + "_x.pgm"})
                  .code,
              0);
  }
  EXPECT_EQ(slurp(path("a_y.pgm")), slurp(path("b_y.pgm")));
  EXPECT_EQ(slurp(path("a_x.pgm")), slurp(path("b_x.pgm")));
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
}

TEST_F(CliTest, EvalPrintsAverageRow) {
  const std::string second = path("second.pgm");
  const std::string third = path("third.pgm");
  ple::write_image(ple::read_image(PLE_TEST_DATA "/camera_tripod.pgm").crop(50, 50, 32, 32), second);
  ple::write_image(ple::read_image(PLE_TEST_DATA "/astronaut_face.pgm").crop(20, 20, 32, 32), third);
  const auto r = call({"eval", "--task", "zoom", "--iterations", "1", clean, second, third});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "image,input_psnr_db,output_psnr_db,isnr_db");
  EXPECT_EQ(rows[1].rfind("clean.pgm,", 0), 0u);
  EXPECT_EQ(rows[4].rfind("Average,", 0), 0u);
}

TEST_F(CliTest, DumpBasesWritesModels) {
  const auto r = call({"dump-bases", "--num-models", "4", path("bases")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("bases/models.plemset")));
  EXPECT_TRUE(fs::exists(path("bases/model_03.pgm")));
}

TEST_F(CliTest, ToolBinaryExitCodes) {
  const std::string tool = PLE_TOOL;
  EXPECT_EQ(std::system((tool + " --help > /dev/null").c_str()), 0);
  const int bad = std::system((tool + " inpaint 2> /dev/null").c_str());
  ASSERT_TRUE(WIFEXITED(bad));
  EXPECT_EQ(WEXITSTATUS(bad), 2);
  const int ok = std::system((tool + " zoom --factor 3 " + clean + " " + path("z.pgm") + " --iterations 1 > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(ok));
  EXPECT_EQ(WEXITSTATUS(ok), 0);
}

TEST(CliParse, EdgeBlurReachesTheConfig) {
  std::ostringstream out, err;
  const char* argv[] = {"ple", "zoom", "--edge-blur", "0", PLE_TEST_DATA "/camera_head.pgm", "o.pgm"};
  const auto r = ple::cli::parse_args(6, argv, out, err);
  ASSERT_TRUE(r.spec);
  EXPECT_EQ(r.spec->config.edge_blur, 0.0);
  const char* bad[] = {"ple", "zoom", "--edge-blur", "-1", PLE_TEST_DATA "/camera_head.pgm", "o.pgm"};
  EXPECT_EQ(ple::cli::parse_args(6, bad, out, err).exit_code, 2);
}
