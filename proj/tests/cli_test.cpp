#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" JACDIFF_CLI_PATH "\" " + args + " 2>/dev/null";
  Run r{0, {}};
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {-1, {}};
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("jacdiff_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, KernelDumpIsJson) {
  const auto r = run("kernel dump --n 1 --alpha 5 --q 4");
  ASSERT_EQ(r.code, 0);
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc.at("n"), 1);
  EXPECT_EQ(doc.at("q"), 4);
}

TEST_F(CliTest, EstimateFromCsvWithFixedWindow) {
  std::string csv = "x,y\n";
  for (int i = 0; i <= 400; ++i) {
    const double x = -1.0 + 0.005 * i;
    csv += std::to_string(x) + "," + std::to_string(x * x * x) + "\n";
  }
  const auto in = write("cubic.csv", csv);
  const auto r = run("estimate --input " + in.string() + " --n 1 --alpha 4 --q 2 --m 80 --range -0.5 0.5");
  ASSERT_EQ(r.code, 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("x,value", 0), 0u);
  int rows = 0;
  while (std::getline(lines, line)) {
    const auto comma = line.find(',');
    const double x = std::stod(line.substr(0, comma));
    const double v = std::stod(line.substr(comma + 1));
    EXPECT_NEAR(v, 3.0 * x * x, 1e-3) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 201);
}

TEST_F(CliTest, MalformedCsvExitsWithFormatError) {
  const auto in = write("bad.csv", "x,y\n0,1\n0.1,abc\n0.2,3\n");
  EXPECT_EQ(run("estimate --input " + in.string() + " --n 1 --m 1").code, 2);
}

TEST_F(CliTest, NonUniformCsvExitsWithFormatError) {
  const auto in = write("gap.csv", "0,0\n0.1,1\n0.3,2\n0.4,3\n");
  EXPECT_EQ(run("estimate --input " + in.string() + " --n 1 --m 1").code, 2);
}

TEST_F(CliTest, BadParametersExitWithParameterError) {
  EXPECT_EQ(run("kernel dump --n 1 --alpha -1 --q 2").code, 3);
  EXPECT_EQ(run("estimate --fn f4 --m 10").code, 3);
  EXPECT_EQ(run("estimate --fn f1").code, 3);
  EXPECT_EQ(run("estimate --fn f1 --m 10 --auto-window").code, 3);
  EXPECT_EQ(run("no-such-command").code, 3);
}

TEST_F(CliTest, WindowTooLargeIsAnError) {
  const auto in = write("short.csv", "0,0\n0.1,1\n0.2,2\n0.3,3\n");
  EXPECT_NE(run("estimate --input " + in.string() + " --n 1 --m 50").code, 0);
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  const std::string args =
      "estimate --fn f2 --n 1 --alpha 5 --q 4 --auto-window --sigma 0.05 --seed 7 --step 0.002"
      " --domain -3 3 --range -1 1";
  const auto a = run(args + " --report " + (dir_ / "a.json").string());
  const auto b = run(args + " --report " + (dir_ / "b.json").string());
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_FALSE(a.out.empty());
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(dir_ / "a.json"), slurp(dir_ / "b.json"));
  const auto report = nlohmann::json::parse(slurp(dir_ / "a.json"));
  EXPECT_EQ(report.at("window").at("mode"), "global");
  EXPECT_GT(report.at("window").at("m").get<int>(), 0);
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  const auto r = run("kernel dump --n 2 --alpha 3 --q 2 --output k.json", "JACDIFF_OUTPUT_DIR=" + dir_.string());
  ASSERT_EQ(r.code, 0);
  ASSERT_TRUE(fs::exists(dir_ / "k.json"));
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "k.json")).at("n"), 2);
}

TEST_F(CliTest, SweepChecksPass) {
  const auto r = run("sweep --n 1 --q 0,2,4 --alpha 0,2,4");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("n,q,alpha,c3,c4\n", 0), 0u);
}

TEST_F(CliTest, ValidatePasses) {
  const auto r = run("validate");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(nlohmann::json::parse(r.out).at("passed").get<bool>());
}
