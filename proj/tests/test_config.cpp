#include <gtest/gtest.h>

#include <string>

#include "cagp/config.hpp"

using namespace cagp;

namespace {

std::string Problems(const std::string& text) {
  try {
    validate_config_text(text, "test.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ConfigFile, ParsesSectionsCommentsAndLists) {
  const ConfigFile f = ConfigFile::Parse(
      "# leading comment\n[a]\nx = 1, 2 ,3\n; other comment\n\n[a.b]\ny=hello\n");
  ASSERT_EQ(f.sections.size(), 2u);
  EXPECT_EQ(f.find("a", "x")->value, "1, 2 ,3");
  EXPECT_EQ(f.find("a", "x")->line, 3);
  EXPECT_EQ(f.find("a.b", "y")->value, "hello");
  EXPECT_EQ(f.find("a", "y"), nullptr);
}

TEST(ConfigFile, SyntaxErrorsCarryLines) {
  EXPECT_THROW(ConfigFile::Parse("x = 1\n"), ConfigError);
  EXPECT_THROW(ConfigFile::Parse("[a]\n[a]\n"), ConfigError);
  EXPECT_THROW(ConfigFile::Parse("[a]\nx = 1\nx = 2\n"), ConfigError);
  try {
    ConfigFile::Parse("[a]\nno equals sign\n", "f.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("f.cfg:2"), std::string::npos) << e.what();
  }
}

TEST(ConfigFile, SerializeParseRoundTrip) {
  const ConfigFile f = ConfigFile::Parse("[s]\nk = v\n[s.t]\nz = 1,2\n");
  EXPECT_TRUE(ConfigFile::Parse(f.Serialize()) == f);
}

TEST(ExperimentConfig, DefaultsRoundTripForEveryScenario) {
  for (const std::string& name : ExperimentConfig::Scenarios()) {
    const ExperimentConfig d = ExperimentConfig::Defaults(name);
    const ExperimentConfig back = validate_config_text(d.Serialize());
    EXPECT_TRUE(back == d) << name;
    EXPECT_EQ(back.Serialize(), d.Serialize()) << name;
  }
}

TEST(ExperimentConfig, SampleConfigsParseToDefaults) {
  for (const std::string& name : ExperimentConfig::Scenarios()) {
    const ExperimentConfig c = validate_config(std::string(CAGP_CONFIG_DIR) + "/" + name + ".cfg");
    EXPECT_EQ(c.scenario(), name);
    EXPECT_TRUE(c == ExperimentConfig::Defaults(name)) << name;
  }
}

TEST(ExperimentConfig, PartialFileOverlaysDefaults) {
  const ExperimentConfig c =
      validate_config_text("[experiment]\nscenario = exp1d\ncg_iters = 3, 7\nseed = 4\n");
  EXPECT_EQ(c.integers("experiment", "cg_iters"), (std::vector<int>{3, 7}));
  EXPECT_EQ(c.integer("experiment", "seed"), 4);
  EXPECT_DOUBLE_EQ(c.number("experiment", "tau"), 0.005);
  EXPECT_TRUE(c.is_auto("bounds", "B_fg"));
}

TEST(ExperimentConfig, MissingScenarioIsNamed) {
  EXPECT_NE(Problems("[experiment]\nseed = 1\n").find("experiment.scenario"), std::string::npos);
  EXPECT_NE(Problems("[experiment]\nscenario = cartpole\n").find("unknown scenario"),
            std::string::npos);
}

TEST(ExperimentConfig, UnknownKeyReportsLine) {
  const std::string p = Problems("[experiment]\nscenario = exp1d\n\n[data]\npointz = 5\n");
  EXPECT_NE(p.find("test.cfg:5"), std::string::npos) << p;
  EXPECT_NE(p.find("data.pointz"), std::string::npos) << p;
}

TEST(ExperimentConfig, UnknownSectionAndKernelRoot) {
  EXPECT_NE(Problems("[experiment]\nscenario = exp1d\n[solver]\nx = 1\n").find("[solver]"),
            std::string::npos);
  const std::string p =
      Problems("[experiment]\nscenario = exp1d\n[kernel.g]\ntype = constant\nvariance = 1\n");
  EXPECT_NE(p.find("kernel.g"), std::string::npos) << p;
}

TEST(ExperimentConfig, BadValuesAreAllReported) {
  const std::string p = Problems(
      "[experiment]\nscenario = exp1d\nmode = sometimes\ntau = -1\ncg_iters = 4, 99\n");
  EXPECT_NE(p.find("experiment.mode"), std::string::npos) << p;
  EXPECT_NE(p.find("test.cfg:4: experiment.tau"), std::string::npos) << p;
  EXPECT_NE(p.find("99"), std::string::npos) << p;
}

TEST(ExperimentConfig, KernelSubtreeReplacesDefault) {
  const ExperimentConfig c = validate_config_text(
      "[experiment]\nscenario = exp1d\n[kernel.f]\ntype = squared_exponential\n"
      "variance = 2\nlengthscale = 0.3\n");
  const auto k = c.kernel("kernel.f");
  ASSERT_TRUE(k.has_value());
  EXPECT_DOUBLE_EQ((*k)(Vector::Zero(1), Vector::Zero(1)), 2.0);
  EXPECT_EQ(c.file().find_section("kernel.f.left"), nullptr);
  // The replaced subtree keeps the default position, so the text round-trips.
  EXPECT_TRUE(validate_config_text(c.Serialize()) == c);
}

TEST(ExperimentConfig, BadKernelTypeIsReported) {
  const std::string p =
      Problems("[experiment]\nscenario = exp1d\n[kernel.f]\ntype = rbf\nvariance = 1\n");
  EXPECT_NE(p.find("unknown kernel"), std::string::npos) << p;
}

TEST(ExperimentConfig, SetRevalidates) {
  ExperimentConfig c = ExperimentConfig::Defaults("tracking3d");
  c.set("experiment", "mode", "aware");
  EXPECT_EQ(c.text("experiment", "mode"), "aware");
  EXPECT_THROW(c.set("experiment", "mode", "never"), ConfigError);
  EXPECT_THROW(c.set("experiment", "colour", "red"), ConfigError);
}
