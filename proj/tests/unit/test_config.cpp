#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cascadet/config.hpp"

using namespace cascadet;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const RunConfig c;
  std::istringstream in(serialize_config(c));
  EXPECT_EQ(parse_config(in), c);
}

TEST(Config, EditedValuesRoundTripExactly) {
  RunConfig c;
  c.seed = 99;
  c.out_dir = "runs/a";
  c.model.strides = {4, 8};
  c.model.rfe_enabled = false;
  c.train.lr_peak = 0.1 / 3.0;
  c.train.milestones = {5, 7};
  c.train.epochs = 9;
  c.cascade.str_levels = {};
  c.cascade.stc_levels = {0};
  c.cascade.sml_alpha = 1.0 / 7.0;
  c.data.scale_mix = 0.3;
  std::istringstream in(serialize_config(c));
  const RunConfig back = parse_config(in);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, EveryKeyIsWritten) {
  const std::string text = "\n" + serialize_config(RunConfig{});
  for (const auto& key : config_keys()) EXPECT_NE(text.find("\n" + key + " = "), std::string::npos) << key;
}

TEST(Config, CommentsBlankLinesAndSpacing) {
  std::istringstream in("# header\n\n  epochs=4   # trailing\nstc_levels = [ 0 , 1 ]\nfsm = false\n");
  const RunConfig c = parse_config(in);
  EXPECT_EQ(c.train.epochs, 4);
  EXPECT_EQ(c.cascade.stc_levels, (std::vector<int>{0, 1}));
  EXPECT_FALSE(c.model.fsm_enabled);
}

TEST(Config, EmptyListClearsLevels) {
  RunConfig c;
  apply_setting(c, "str_levels=[]");
  EXPECT_TRUE(c.cascade.str_levels.empty());
}

TEST(Config, UnknownKeyNamesSourceAndLine) {
  std::istringstream in("epochs = 3\n\nlearning_rate = 0.1\n");
  const std::string msg = error_of([&] { parse_config(in, "my.cfg"); });
  EXPECT_NE(msg.find("my.cfg:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("learning_rate"), std::string::npos) << msg;
}

TEST(Config, MalformedValuesAreErrors) {
  RunConfig c;
  EXPECT_FALSE(error_of([&] { apply_setting(c, "epochs=three"); }).empty());
  EXPECT_FALSE(error_of([&] { apply_setting(c, "fsm=maybe"); }).empty());
  EXPECT_FALSE(error_of([&] { apply_setting(c, "strides=[4,8"); }).empty());
  EXPECT_FALSE(error_of([&] { apply_setting(c, "epochs"); }).empty());
  EXPECT_FALSE(error_of([&] { apply_setting(c, "momentum=0.9x"); }).empty());
}

TEST(Config, InvalidCombinationRejected) {
  std::istringstream in("milestones = [1, 2]\nwarmup_epochs = 3\n");
  EXPECT_FALSE(error_of([&] { parse_config(in); }).empty());
}

TEST(Config, MissingFileNamesThePath) {
  const std::string msg = error_of([] { load_config("/nonexistent/dir/run.cfg"); });
  EXPECT_NE(msg.find("/nonexistent/dir/run.cfg"), std::string::npos) << msg;
}

TEST(Config, LoadsWrittenFile) {
  const auto path = std::filesystem::temp_directory_path() / "cascadet_config_test.cfg";
  RunConfig c;
  c.train.batch_size = 4;
  {
    std::ofstream out(path);
    write_config(out, c);
  }
  EXPECT_EQ(load_config(path), c);
  std::filesystem::remove(path);
}
