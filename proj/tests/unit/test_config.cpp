#include "lrf/config.hpp"
#include "lrf/errors.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace lrf;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const auto p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST(RunConfig, DuffingDefaults) {
  const auto cfg = RunConfig::defaults(CaseKind::Duffing);
  EXPECT_EQ(cfg.kind(), CaseKind::Duffing);
  EXPECT_EQ(cfg.get<long>("mcmc.n_accept"), 2000);
  EXPECT_EQ(cfg.get<long>("mcmc.burn_in"), 200);
  EXPECT_EQ(cfg.get<std::string>("system.observation"), "acceleration");
  EXPECT_EQ(cfg.get<int>("fit.n_state_samples"), 50);
  EXPECT_TRUE(cfg.at("fit.order").is_null());
  EXPECT_FALSE(cfg.at("priors.m.free").get<bool>());
  EXPECT_NO_THROW(cfg.validate());
}

TEST(RunConfig, SilverboxDefaultsAndPaperScale) {
  auto cfg = RunConfig::defaults(CaseKind::Silverbox);
  EXPECT_EQ(cfg.get<std::string>("system.observation"), "displacement");
  EXPECT_EQ(cfg.get<long>("silverbox.train_start"), 49278);
  EXPECT_NEAR(cfg.get<double>("silverbox.fs"), 610.35, 1e-12);
  cfg.use_paper_scale();
  EXPECT_EQ(cfg.get<long>("mcmc.n_accept"), 10000);
  EXPECT_EQ(cfg.get<long>("mcmc.burn_in"), 2000);
  auto duff = RunConfig::defaults(CaseKind::Duffing);
  duff.use_paper_scale();
  EXPECT_EQ(duff.get<long>("mcmc.n_accept"), 20000);
}

TEST(RunConfig, OverridesParseJsonValues) {
  auto cfg = RunConfig::defaults(CaseKind::Duffing);
  cfg.apply_override("mcmc.n_accept", "5000");
  cfg.apply_override("kernel.smoothness", "3/2");
  cfg.apply_override("fit.order", "3");
  cfg.apply_override("priors.k.mean", "101.5");
  EXPECT_EQ(cfg.get<long>("mcmc.n_accept"), 5000);
  EXPECT_EQ(cfg.get<std::string>("kernel.smoothness"), "3/2");
  EXPECT_EQ(cfg.get<int>("fit.order"), 3);
  EXPECT_DOUBLE_EQ(cfg.get<double>("priors.k.mean"), 101.5);
  EXPECT_THROW(cfg.apply_override("mcmc.nope", "1"), InvalidArgument);
  EXPECT_THROW(cfg.apply_override("mcmc..n_accept", "1"), InvalidArgument);
}

TEST(RunConfig, LoadMergesOverCaseDefaults) {
  const auto p = write_temp("lrfid_cfg_ok.json",
                            "{\n  // comments are allowed\n  \"case\": \"silverbox\",\n"
                            "  \"mcmc\": {\"n_accept\": 300, \"burn_in\": 30}\n}\n");
  const auto cfg = RunConfig::load(p);
  EXPECT_EQ(cfg.kind(), CaseKind::Silverbox);
  EXPECT_EQ(cfg.get<long>("mcmc.n_accept"), 300);
  EXPECT_EQ(cfg.get<int>("fit.order"), 3);
  fs::remove(p);
}

TEST(RunConfig, LoadRejectsBadFiles) {
  const auto unknown = write_temp("lrfid_cfg_unknown.json", "{\"mcmc\": {\"n_acept\": 3}}");
  EXPECT_THROW(RunConfig::load(unknown), InvalidArgument);
  const auto broken = write_temp("lrfid_cfg_broken.json", "{\"mcmc\": ");
  EXPECT_THROW(RunConfig::load(broken), InvalidArgument);
  const auto bad_case = write_temp("lrfid_cfg_case.json", "{\"case\": \"vanderpol\"}");
  EXPECT_THROW(RunConfig::load(bad_case), InvalidArgument);
  const auto invalid = write_temp("lrfid_cfg_invalid.json", "{\"mcmc\": {\"n_accept\": 10, \"burn_in\": 20}}");
  EXPECT_THROW(RunConfig::load(invalid), InvalidArgument);
  EXPECT_THROW(RunConfig::load("/nonexistent/lrfid.json"), InvalidArgument);
  for (const auto& p : {unknown, broken, bad_case, invalid}) fs::remove(p);
}

TEST(RunConfig, ValidateCatchesWrongTypes) {
  auto cfg = RunConfig::defaults(CaseKind::Duffing);
  cfg.apply_override("mcmc.n_accept", "\"many\"");
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = RunConfig::defaults(CaseKind::Duffing);
  cfg.apply_override("mcmc.init", "random");
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}
