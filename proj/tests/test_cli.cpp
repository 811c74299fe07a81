#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

CliRun cli(const std::string& args) {
  const std::string cmd = std::string(CURVEDBODY_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string corpus(const std::string& name) { return std::string(CURVEDBODY_CORPUS_DIR) + "/" + name; }

std::string last_line(const std::string& s) {
  std::string t = s;
  while (!t.empty() && t.back() == '\n') t.pop_back();
  const auto pos = t.rfind('\n');
  return pos == std::string::npos ? t : t.substr(pos + 1);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("curvedbody_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string out() const { return "--output-dir " + dir_.string(); }
  fs::path dir_;
};

TEST_F(CliTest, SimulateFlatCircularOrbit) {
  const CliRun r = cli("simulate " + corpus("two_body_flat.scn") + " " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(last_line(r.out), "STATUS 0 ok");
  const auto meta = nlohmann::json::parse(slurp(dir_ / "two_body_flat.meta.json"));
  EXPECT_EQ(meta["termination"], "Completed");
  EXPECT_LT(meta["drift"]["energy_relative"].get<double>(), 1e-8);
  EXPECT_TRUE(fs::exists(dir_ / "two_body_flat.csv"));
}

TEST_F(CliTest, SimulateIsByteIdenticalAcrossRuns) {
  const std::string args = "simulate " + corpus("sphere_three_body.scn") + " --t-end 1 " + out();
  ASSERT_EQ(cli(args).code, 0);
  const std::string a = slurp(dir_ / "sphere_three_body.csv");
  const std::string ma = slurp(dir_ / "sphere_three_body.meta.json");
  ASSERT_EQ(cli(args).code, 0);
  EXPECT_EQ(slurp(dir_ / "sphere_three_body.csv"), a);
  EXPECT_EQ(slurp(dir_ / "sphere_three_body.meta.json"), ma);
  EXPECT_FALSE(a.empty());
}

TEST_F(CliTest, JsonlOutputAndOverridesEcho) {
  const CliRun r = cli("simulate " + corpus("hyperbolic_two_body.scn") + " --t-end 0.5 --sample-dt 0.25 --format jsonl " +
                    out());
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream in(slurp(dir_ / "hyperbolic_two_body.jsonl"));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_TRUE(nlohmann::json::accept(line)) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 3);
  const auto meta = nlohmann::json::parse(slurp(dir_ / "hyperbolic_two_body.meta.json"));
  EXPECT_EQ(meta["overrides"]["t_end"], "0.5");
  EXPECT_EQ(meta["scenario"]["t_end"].get<double>(), 0.5);
}

TEST_F(CliTest, HeadOnCollisionIsReported) {
  const CliRun r = cli("simulate " + corpus("headon_flat.scn") + " " + out());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_EQ(last_line(r.out).rfind("STATUS 2 CollisionNear at t = ", 0), 0u) << last_line(r.out);
  // Whatever was integrated is still written.
  EXPECT_TRUE(fs::exists(dir_ / "headon_flat.csv"));
}

TEST_F(CliTest, MissingFileExitsWithUsageCode) {
  const CliRun r = cli("simulate /no/such/scenario.scn " + out());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("/no/such/scenario.scn"), std::string::npos);
  EXPECT_EQ(last_line(r.out).rfind("STATUS 1 ", 0), 0u);
}

TEST_F(CliTest, LiftOutOfRangeNamesTheBody) {
  const CliRun r = cli("simulate " + corpus("asymmetric_two_body.scn") + " --kappa 4 " + out());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("flat_positions[0]"), std::string::npos) << r.out;
}

TEST_F(CliTest, BadArguments) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("simulate").code, 1);
  EXPECT_EQ(cli("simulate " + corpus("two_body_flat.scn") + " --format xml").code, 1);
  EXPECT_EQ(cli("check " + corpus("two_body_flat.scn") + " --formulation Bogus").code, 1);
  EXPECT_EQ(cli("check " + corpus("two_body_flat.scn") + " --formulation CenteredExtrinsic").code, 1);
}

TEST_F(CliTest, CheckCountsIntegrals) {
  const CliRun flat = cli("check " + corpus("two_body_flat.scn"));
  EXPECT_EQ(flat.code, 0);
  EXPECT_NE(flat.out.find("conserved: 10/10"), std::string::npos) << flat.out;
  const CliRun curved = cli("check " + corpus("asymmetric_two_body.scn") + " --kappa 1");
  EXPECT_EQ(curved.code, 0);
  EXPECT_NE(curved.out.find("conserved: 7/7"), std::string::npos) << curved.out;
}

TEST_F(CliTest, SweepWritesMembersAndSummary) {
  const CliRun r = cli("sweep " + corpus("asymmetric_two_body.scn") + " --kappas=-0.1,0,0.1 " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string summary = slurp(dir_ / "asymmetric_two_body.sweep.csv");
  std::istringstream in(summary);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("kappa,status,", 0), 0u) << line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
  int members = 0;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (e.path().filename().string().find(".kappa_") != std::string::npos && e.path().extension() == ".csv") ++members;
  }
  EXPECT_EQ(members, 3);
}

TEST_F(CliTest, CompareUnifiedWithCentered) {
  const CliRun r = cli("compare " + corpus("sphere_two_body.scn") + " " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  const fs::path file = dir_ / "sphere_two_body.compare_Unified_CenteredExtrinsic.csv";
  ASSERT_TRUE(fs::exists(file));
  std::istringstream in(slurp(file));
  std::string line;
  std::getline(in, line);
  double worst = 0.0;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string t, state;
    std::getline(ls, t, ',');
    std::getline(ls, state, ',');
    worst = std::max(worst, std::stod(state));
  }
  EXPECT_LT(worst, 1e-7);
}

TEST_F(CliTest, CompareAtZeroCurvatureNeedsFlatFormulations) {
  const CliRun r = cli("compare " + corpus("three_body.scn") + " " + out());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("CenteredExtrinsic"), std::string::npos);
  const CliRun ok = cli("compare " + corpus("three_body.scn") + " --formulation-b Newtonian " + out());
  EXPECT_EQ(ok.code, 0) << ok.out;
}

TEST_F(CliTest, LiftPrintsConstrainedState) {
  const CliRun r = cli("lift " + corpus("sphere_two_body.scn"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("body,x,y,z,w,vx,vy,vz,vw\n0,0.59999999999999998,", 0), 0u) << r.out;
}

}  // namespace
