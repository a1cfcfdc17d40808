#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"

using hubfield::testing::data_path;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "hubfield");
  std::ostringstream out, err;
  const int code = hubfield::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir = hubfield::testing::scratch_dir("cli"); }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, SolveWritesDensityAndManifest) {
  const auto r = run({"solve", "--rho", data_path("step_benchmark.csv"), "--eps", "1e-2", "--p", "1", "--d", "1", "--q",
                      "2", "--out", path("mu.csv"), "--log", path("log.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto mu = hubfield::read_density_csv(path("mu.csv"));
  EXPECT_NEAR(hubfield::integrate(mu), 1.0, 1e-10);
  const auto man = nlohmann::json::parse(slurp(path("mu.csv.manifest.json")));
  EXPECT_EQ(man["subcommand"], "solve");
  EXPECT_EQ(man["config"]["eps"], 1e-2);
  EXPECT_EQ(man["config"]["mult"], "renorm");
  EXPECT_TRUE(man["convergence"]["converged"].get<bool>());
  EXPECT_EQ(man["outputs"].size(), 2u);
  EXPECT_EQ(slurp(path("log.csv")).substr(0, 33), "iter,change,F,location,routing,c\n");
}

TEST_F(Cli, SolveIsDeterministicAndReplayableFromManifest) {
  ASSERT_EQ(run({"solve", "--rho", data_path("step_benchmark.csv"), "--eps", "3e-3", "--mult", "bisect", "--out",
                 path("a.csv")})
                .code,
            0);
  ASSERT_EQ(run({"solve", "--rho", data_path("step_benchmark.csv"), "--eps", "3e-3", "--mult", "bisect", "--out",
                 path("b.csv")})
                .code,
            0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  // Rerun from the manifest; --out overrides the recorded path.
  ASSERT_EQ(run({"solve", "--config", path("a.csv.manifest.json"), "--out", path("c.csv")}).code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  std::ofstream(path("cfg.json")) << R"({"eps": 0.05, "mult": "bisect", "tol": 0.001})";
  ASSERT_EQ(run({"solve", "--rho", data_path("step_benchmark.csv"), "--config", path("cfg.json"), "--tol", "0.01",
                 "--out", path("mu.csv")})
                .code,
            0);
  const auto man = nlohmann::json::parse(slurp(path("mu.csv.manifest.json")));
  EXPECT_EQ(man["config"]["eps"], 0.05);
  EXPECT_EQ(man["config"]["mult"], "bisect");
  EXPECT_EQ(man["config"]["tol"], 0.01);
}

TEST_F(Cli, SolvePeakModel2D) {
  const auto r = run({"solve", "--rho", data_path("peaks_2d.json"), "--bounds", "-1,1,-1,1", "--n", "20,20",
                      "--polygon", data_path("region_polygon.json"), "--p", "2", "--out", path("mu.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto mu = hubfield::read_density_csv(path("mu.csv"));
  EXPECT_TRUE(mu.grid().has_mask());
  EXPECT_NEAR(hubfield::integrate(mu), 1.0, 1e-10);
}

TEST_F(Cli, Hub) {
  const auto r = run({"hub", "--rho", data_path("step_benchmark.csv"), "--out", path("scan.csv"), "--json",
                      path("hub.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("hub.json")));
  EXPECT_NEAR(j["x0"][0].get<double>(), -0.1464, 1e-3);
  EXPECT_NEAR(j["value"].get<double>(), 1.17678, 1e-3);
  EXPECT_EQ(hubfield::read_density_csv(path("scan.csv")).size(), 200u);
}

TEST_F(Cli, Hexconst) {
  auto r = run({"hexconst", "--p", "1"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, 5), "0.377");
  r = run({"hexconst", "--sweep", "0:2:0.05"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 42);
  EXPECT_EQ(r.out.substr(0, 4), "p,C\n");
  EXPECT_EQ(run({"hexconst"}).code, 2);
  EXPECT_EQ(run({"hexconst", "--p", "1", "--sweep", "0:1:0.5"}).code, 2);
}

TEST_F(Cli, MassCoupled) {
  const auto r = run({"masscoupled1d", "--rho", data_path("step_benchmark.csv"), "--out", path("mc.csv"), "--nu-out",
                      path("nu.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto body = slurp(path("mc.csv"));
  EXPECT_EQ(body.substr(0, 7), "x,T,nu\n");
  const auto nu = hubfield::read_density_csv(path("nu.csv"));
  EXPECT_NEAR(hubfield::integrate(nu), 3.0, 3e-6);  // unnormalized step: 2 + 1
  EXPECT_EQ(run({"masscoupled1d", "--rho", data_path("step_benchmark.csv"), "--q", "1", "--out", path("x.csv")}).code,
            1);
}

TEST_F(Cli, Scaling) {
  const auto r = run({"scaling", "--rho", data_path("step_benchmark.csv"), "--eps-list", "0.1,0.01,0.001", "--out",
                      path("s.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("slope 0.4"), std::string::npos) << r.out;
  EXPECT_EQ(run({"scaling", "--rho", data_path("step_benchmark.csv"), "--eps-list", "0.1,0.01"}).code, 2);
  EXPECT_EQ(run({"scaling", "--rho", data_path("step_benchmark.csv"), "--eps-list", "0.1,0.01,0.001", "--max-iter",
                 "1"})
                .code,
            1);
}

TEST_F(Cli, DemandAndCostCurve) {
  auto r = run({"demand", "--centroids", data_path("centroids_sample.csv"), "--coeffs",
                data_path("demand_coefficients.json"), "--bounds", "-1,1,-1,1", "--n", "30,30", "--polygon",
                data_path("region_polygon.json"), "--bandwidth", "0.15", "--out", path("d.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GT(hubfield::integrate(hubfield::read_density_csv(path("d.csv"))), 0.0);

  r = run({"cost-curve", "--aircraft", data_path("aircraft_example.json"), "--out", path("c.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("q 0.7"), std::string::npos) << r.out;
  EXPECT_EQ(slurp(path("c.csv")).substr(0, 30), "R,cost_per_ton_km,cost_per_ton");
}

TEST_F(Cli, Pureloc) {
  ASSERT_EQ(run({"pureloc", "--rho", data_path("step_benchmark.csv"), "--out", path("p.csv")}).code, 0);
  const auto mu = hubfield::read_density_csv(path("p.csv"));
  EXPECT_NEAR(mu[0] / mu[199], std::sqrt(2.0), 1e-10);
}

TEST_F(Cli, ErrorExitCodes) {
  EXPECT_EQ(run({"solve", "--rho", data_path("step_benchmark.csv"), "--eps", "-1", "--out", path("x.csv")}).code, 2);
  EXPECT_EQ(run({"solve", "--rho", path("missing.csv"), "--out", path("x.csv")}).code, 2);
  EXPECT_EQ(run({"solve", "--rho", data_path("step_benchmark.csv")}).code, 2);
  EXPECT_EQ(run({"solve", "--bogus"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"solve", "--rho", data_path("step_benchmark.csv"), "--mode", "other", "--out", path("x.csv")}).code,
            2);
  EXPECT_EQ(run({"solve", "--rho", data_path("step_benchmark.csv"), "--mode", "paper", "--mult", "bisect", "--out",
                 path("x.csv")})
                .code,
            2);
  std::ofstream(path("bad.csv")) << "# dim=1 bounds=0,1 n=2\n0,1\n1,-1\n";
  const auto r = run({"hub", "--rho", path("bad.csv"), "--out", path("x.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.csv:3"), std::string::npos) << r.err;
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"solve", "--help"}).code, 0);
}
