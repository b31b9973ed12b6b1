// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "gwlab/cli.hpp"

using namespace gwlab;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "gwlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gwlab_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  for (std::string t; std::getline(ss, t, ',');) f.push_back(t);
  return f;
}

}  // namespace

TEST(Cli, FormatDoubleRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 2.0, 1e-300, -4.5e17}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0 / 0.0), "inf");
}

TEST(Cli, EnergyMomentsTableAndRerun) {
  const auto d1 = fresh_dir("em1"), d2 = fresh_dir("em2");
  const std::vector<std::string> args{"energy-moments", "--surface", "sphere", "--n-grid", "2,5",
                                      "--replicas", "300", "--seed", "7", "--out"};
  auto a1 = args, a2 = args;
  a1.push_back(d1.string());
  a2.push_back(d2.string());
  ASSERT_EQ(run(a1).code, kExitOk);
  ASSERT_EQ(run(a2).code, kExitOk);
  const std::string csv = slurp(d1 / "energy-moments.csv");
  EXPECT_EQ(csv, slurp(d2 / "energy-moments.csv"));
  std::stringstream ss(csv);
  std::string header, row;
  std::getline(ss, header);
  EXPECT_EQ(header,
            "n,replicas,mean_S,se_S,mean_S2,se_S2,predicted_S2,ratio,ratio_ci_low,ratio_ci_high");
  std::getline(ss, row);
  const auto f = split(row);
  ASSERT_EQ(f.size(), 10u);
  EXPECT_EQ(f[0], "2");
  EXPECT_EQ(f[1], "300");
  EXPECT_NEAR(std::stod(f[6]), 4.0, 1e-12);

  const auto j = nlohmann::json::parse(slurp(d1 / "energy-moments.json"));
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["version"], std::string(version()));
  EXPECT_TRUE(j.contains("config"));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({"energy-moments", "--out", "/nonexistent/gwlab/dir"}).code, kExitUsage);
  const auto d = fresh_dir("usage");
  EXPECT_EQ(run({"green-check", "--surface", "unknown", "--out", d.string()}).code, kExitUsage);
  EXPECT_EQ(run({"w2-scan", "--solver", "magic", "--out", d.string()}).code, kExitUsage);
  EXPECT_EQ(run({"energy-moments", "--bogus", "1", "--out", d.string()}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"energy-moments", "--n-grid", "1", "--out", d.string()}).code, kExitUsage);
}

TEST(Cli, VersionFlag) {
  const auto r = run({"--version"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find(std::string(version())), std::string::npos);
}

TEST(Cli, OffsetSphereGreenCheckFails) {
  const auto d = fresh_dir("gc");
  const auto r = run({"green-check", "--surface", "sphere", "--kernel-offset", "0.1",
                      "--grid-res", "20000", "--out", d.string()});
  EXPECT_EQ(r.code, kExitCheckFailed);
  EXPECT_NE((r.out + r.err).find("mean_zero"), std::string::npos);
  const std::string csv = slurp(d / "green-check.csv");
  EXPECT_NE(csv.find("mean_zero"), std::string::npos);
}

TEST(Cli, FalsifyWritesTablesAndManifest) {
  const auto d = fresh_dir("fals");
  const auto r = run({"falsify", "--n-grid", "8,16,32,64", "--replicas", "10", "--grid-res", "16",
                      "--solver", "exact", "--out", d.string()});
  EXPECT_TRUE(r.code == kExitOk || r.code == kExitCheckFailed) << r.err;
  const std::string csv = slurp(d / "falsify.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "n,replicas,mean_W2sq,ci_low,ci_high,bias_bound,mean_abs_S,L_n,L_ci_low,L_ci_high");
  EXPECT_FALSE(slurp(d / "falsify-replicas.csv").empty());
  const auto j = nlohmann::json::parse(slurp(d / "falsify.json"));
  for (const char* key : {"version", "seed", "config", "rows", "fit", "falsifier", "partial"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["partial"], false);
  EXPECT_EQ(j["rows"].size(), 4u);
}

TEST(Cli, EnvironmentOverride) {
  const auto d = fresh_dir("env");
  setenv("GWLAB_REPLICAS", "150", 1);
  const auto r = run({"energy-moments", "--n-grid", "3", "--out", d.string()});
  unsetenv("GWLAB_REPLICAS");
  ASSERT_EQ(r.code, kExitOk);
  const std::string csv = slurp(d / "energy-moments.csv");
  EXPECT_NE(csv.find("\n3,150,"), std::string::npos);
}

TEST(Cli, ManifestRoundTripsAndIgnoresWorkerCount) {
  const auto d1 = fresh_dir("wk1"), d2 = fresh_dir("wk2");
  const std::vector<std::string> args{"w2-scan", "--n-grid", "8,16,32,64", "--replicas", "8",
                                      "--grid-res", "12", "--out"};
  auto a1 = args, a2 = args;
  a1.insert(a1.end(), {d1.string(), "--workers", "1"});
  a2.insert(a2.end(), {d2.string(), "--workers", "3"});
  ASSERT_EQ(run(a1).code, kExitOk);
  ASSERT_EQ(run(a2).code, kExitOk);
  const std::string text = slurp(d1 / "w2-scan.json");
  auto j1 = nlohmann::ordered_json::parse(text);
  EXPECT_EQ(j1.dump(2) + "\n", text);
  auto j2 = nlohmann::ordered_json::parse(slurp(d2 / "w2-scan.json"));
  j1.erase("wall_clock");
  j2.erase("wall_clock");
  j1["config"].erase("workers");
  j2["config"].erase("workers");
  EXPECT_EQ(j1, j2);
  EXPECT_EQ(slurp(d1 / "w2-scan.csv"), slurp(d2 / "w2-scan.csv"));
  EXPECT_EQ(slurp(d1 / "w2-scan-replicas.csv"), slurp(d2 / "w2-scan-replicas.csv"));
}
