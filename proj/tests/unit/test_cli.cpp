#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(LRFID_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lrfid_cli_" + name);
  fs::remove_all(p);
  return p;
}

const std::string kSmall = " --simulate.n_samples=1200 --mcmc.n_accept=30 --mcmc.burn_in=5 --fit.n_state_samples=2"
                           " --diagnostics.psd_segment=256";

}  // namespace

TEST(Cli, HelpAndVersionSucceed) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("--version"), 0);
  EXPECT_EQ(run("identify --help"), 0);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("simulate"), 1);                                // --seed missing
  EXPECT_EQ(run("simulate --seed 1 --mcmc.nope=3 -o /tmp/x"), 1);  // unknown key
  EXPECT_EQ(run("simulate --seed 1 --bogus 3"), 1);
  EXPECT_EQ(run("identify --seed 1 --mcmc.burn_in=100 --mcmc.n_accept=50"), 1);
}

TEST(Cli, DataErrors) {
  const auto dir = scratch("data");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.csv") << "u,y_noisy\n1,2\n3,nan\n";
  EXPECT_EQ(run("identify --seed 1 --data " + (dir / "bad.csv").string() + " -o " + (dir / "out").string()), 2);
  EXPECT_EQ(run("identify --seed 1 --data " + (dir / "missing.csv").string() + " -o " + (dir / "out").string()), 2);
  fs::remove_all(dir);
}

TEST(Cli, NumericalFailure) {
  // A strongly softening quintic plant makes the integrator's Newton solve fail.
  const auto dir = scratch("num");
  const std::string nl = R"('--simulate.nonlinear=[{"z_degree":5,"zdot_degree":0,"coefficient":-1e8}]')";
  EXPECT_EQ(run("simulate --seed 1 --simulate.n_samples=2000 --simulate.noise_fraction=null " + nl + " -o " +
                dir.string()),
            3);
  fs::remove_all(dir);
}

TEST(Cli, SimulateIdentifyPredictRoundTrip) {
  const auto sim = scratch("sim"), id = scratch("id"), pred = scratch("pred");
  ASSERT_EQ(run("simulate --seed 3" + kSmall + " -o " + sim.string()), 0);
  ASSERT_TRUE(fs::exists(sim / "dataset.csv"));
  ASSERT_TRUE(fs::exists(sim / "manifest.json"));
  ASSERT_EQ(run("identify --seed 3" + kSmall + " --data " + (sim / "dataset.csv").string() +
                " --data.truth_path=" + (sim / "truth.csv").string() + " -o " + id.string()),
            0);
  ASSERT_TRUE(fs::exists(id / "model.json"));
  std::ifstream in(id / "manifest.json");
  const auto manifest = nlohmann::json::parse(in);
  EXPECT_EQ(manifest.at("status"), "ok");
  EXPECT_EQ(manifest.at("command"), "identify");
  ASSERT_EQ(run("predict --model " + (id / "model.json").string() + " --excitation " + (sim / "truth.csv").string() +
                " --truth-column z -o " + pred.string()),
            0);
  EXPECT_TRUE(fs::exists(pred / "response.csv"));
  EXPECT_EQ(run("predict --model " + (id / "model.json").string() + " --excitation /nonexistent.csv -o " +
                pred.string()),
            1);
  for (const auto& d : {sim, id, pred}) fs::remove_all(d);
}
