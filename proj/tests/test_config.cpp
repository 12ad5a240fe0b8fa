#include "formnav/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "formnav/experiment.hpp"

using namespace formnav;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST(ConfigDoc, SectionsCommentsAndRepeatedKeys) {
  const ConfigDoc doc = ConfigDoc::parse_string(
      "top = 1\n"
      "# comment line\n"
      "[alpha]\n"
      "x = 2   # trailing comment\n"
      "x = 3\n"
      "[beta]\n"
      "name = hello world\n",
      "test");
  ASSERT_EQ(doc.entries().size(), 4u);
  EXPECT_EQ(doc.entries()[0].key, "top");
  EXPECT_EQ(doc.entries()[1].key, "alpha.x");
  EXPECT_EQ(doc.entries()[1].value, "2");
  EXPECT_EQ(doc.entries()[2].value, "3");
  EXPECT_EQ(doc.entries()[3].key, "beta.name");
  EXPECT_EQ(doc.entries()[3].value, "hello world");
}

TEST(ConfigDoc, MalformedLinesReportLineNumbers) {
  try {
    ConfigDoc::parse_string("a = 1\nno equals sign here\n", "f.cfg");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("f.cfg:2"), std::string::npos);
  }
}

TEST(ConfigBinder, TypedReadsAndLastValueWins) {
  const ConfigDoc doc = ConfigDoc::parse_string(
      "[t]\nx = 1.5\nn = 42\nflag = true\nname = run7\nx = 2.5\n", "test");
  ConfigBinder b(doc);
  double x = 0;
  int n = 0;
  bool flag = false;
  std::string name;
  b.bind("t.x", &x);
  b.bind("t.n", &n);
  b.bind("t.flag", &flag);
  b.bind("t.name", &name);
  b.finish();
  EXPECT_EQ(x, 2.5);
  EXPECT_EQ(n, 42);
  EXPECT_TRUE(flag);
  EXPECT_EQ(name, "run7");
}

TEST(ConfigBinder, UnknownKeyRejectedWithLine) {
  const ConfigDoc doc = ConfigDoc::parse_string("[t]\ngood = 1\nbad_key = 2\n", "cfg");
  ConfigBinder b(doc);
  int good = 0;
  b.bind("t.good", &good);
  try {
    b.finish();
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("cfg:3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("t.bad_key"), std::string::npos);
  }
}

TEST(ConfigBinder, TypeErrorsNameTheKey) {
  const ConfigDoc doc = ConfigDoc::parse_string("x = pretzel\n", "cfg");
  ConfigBinder b(doc);
  double x = 0;
  try {
    b.bind("x", &x);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("pretzel"), std::string::npos);
  }
}

TEST(ExperimentConfig, DefaultsLoadFromEmptyDoc) {
  const ExperimentConfig cfg = experiment_from_doc(ConfigDoc::parse_string("", "empty"));
  EXPECT_EQ(cfg.train.batch, 128);
  EXPECT_EQ(cfg.train.lr, 3e-4);
  EXPECT_EQ(cfg.train.buffer_capacity, 1000000);
  EXPECT_EQ(cfg.mpc.horizon, 20);
  EXPECT_EQ(cfg.sim.dt, 0.1);
  EXPECT_EQ(cfg.mpc.dt, 0.1);
  EXPECT_TRUE(cfg.train.mpc_enabled);
}

TEST(ExperimentConfig, OverridesFlipSingleKeys) {
  const ConfigDoc doc = ConfigDoc::parse_string("seed = 3\n[train]\nepisodes = 10\n", "cfg");
  const ExperimentConfig cfg =
      experiment_from_doc(doc, {"train.mpc_enabled=false", "reward.c_dev=0.25"});
  EXPECT_FALSE(cfg.train.mpc_enabled);
  EXPECT_EQ(cfg.reward.c_dev, 0.25);
  EXPECT_EQ(cfg.train.episodes, 10);
  EXPECT_EQ(cfg.seed, 3u);
  // Untouched keys keep their defaults.
  EXPECT_EQ(cfg.train.batch, 128);
}

TEST(ExperimentConfig, UnknownKeyAnywhereFails) {
  const ConfigDoc doc = ConfigDoc::parse_string("[train]\nlearning = 0.1\n", "cfg");
  EXPECT_THROW(experiment_from_doc(doc), std::runtime_error);
}

TEST(ExperimentConfig, MissingFileNamesThePath) {
  try {
    load_experiment_config("/nonexistent/exp.cfg");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/exp.cfg"), std::string::npos);
  }
}

TEST(ExperimentConfig, SnapshotRoundTripsExactly) {
  const ConfigDoc doc = ConfigDoc::parse_string(
      "seed = 11\n[scenario]\nkind = random-obstacles\nn_obstacles = 4\n[train]\n"
      "episodes = 25\nmax_steps = 120\n[reward]\nc_dev = 0.75\n",
      "cfg");
  const ExperimentConfig cfg = experiment_from_doc(doc);
  const std::string snapshot = config_snapshot_text(cfg);
  const ExperimentConfig reloaded =
      experiment_from_doc(ConfigDoc::parse_string(snapshot, "snapshot"));
  EXPECT_EQ(config_snapshot_text(reloaded), snapshot);
  EXPECT_EQ(reloaded.seed, 11u);
  EXPECT_EQ(reloaded.scenario.n_obstacles, 4);
  EXPECT_EQ(reloaded.train.episodes, 25);
  EXPECT_EQ(reloaded.reward.c_dev, 0.75);
}

TEST(ExperimentConfig, ScenarioFileReferenceLoads) {
  const std::string scen = write_temp("exp_scen.cfg",
                                      "kind = named-config\nnamed_config = centerline\n");
  const std::string exp = write_temp("exp_main.cfg",
                                     "[scenario]\nfile = " + scen + "\n");
  const ExperimentConfig cfg = load_experiment_config(exp);
  EXPECT_EQ(cfg.scenario.kind, ScenarioKind::kNamedConfig);
  EXPECT_EQ(cfg.scenario.fixed_poses.size(), 3u);
}

TEST(ExperimentConfig, OutDirRootEnvOverride) {
  ::setenv("FORMNAV_OUT_ROOT", "/tmp/fn_root", 1);
  EXPECT_EQ(resolve_out_dir("runs/x"), "/tmp/fn_root/runs/x");
  EXPECT_EQ(resolve_out_dir("/abs/path"), "/abs/path");
  ::unsetenv("FORMNAV_OUT_ROOT");
  EXPECT_EQ(resolve_out_dir("runs/x"), "runs/x");
}
