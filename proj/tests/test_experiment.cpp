#include "fraclap/errors.hpp"
#include "fraclap/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fraclap;
namespace ex = fraclap::experiment;
using nlohmann::json;

namespace {

json defaults(const std::string& name) {
  for (const auto& f : ex::bundled_defaults()) {
    if (f.name == name + ".json") return json::parse(f.content);
  }
  throw std::logic_error("missing default " + name);
}

std::string config_error(const json& tree) {
  try {
    ex::parse_config(tree);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, BundledDefaultsRoundTrip) {
  const auto files = ex::bundled_defaults();
  ASSERT_EQ(files.size(), 5u);
  for (const auto& f : files) {
    const ex::ExperimentConfig c = ex::parse_config_text(f.content);
    EXPECT_EQ(ex::to_json(c), json::parse(f.content)) << f.name;
    EXPECT_EQ(ex::config_hash(ex::parse_config(ex::to_json(c))), ex::config_hash(c));
  }
}

TEST(Config, DefaultsCarryExperimentConstants) {
  const json sim = defaults("simultaneous").at("simultaneous");
  EXPECT_EQ(sim.at("adam").at("eta").get<double>(), 1e-3);
  EXPECT_EQ(sim.at("adam").at("gamma1").get<double>(), 0.9);
  EXPECT_EQ(sim.at("adam").at("gamma2").get<double>(), 0.999);
  EXPECT_EQ(sim.at("adam").at("delta").get<double>(), 1e-8);
  EXPECT_EQ(sim.at("adam").at("window").get<std::size_t>(), 50u);
  EXPECT_EQ(sim.at("tol").get<double>(), 1e-4);
  const json ext = defaults("exterior").at("exterior");
  EXPECT_EQ(ext.at("robin_n").get<double>(), 1e9);
  EXPECT_EQ(ext.at("kappa").get<double>(), 1.0);
  const json con = defaults("constrained").at("constrained");
  EXPECT_EQ(con.at("u_hat").get<double>(), 0.02);
}

TEST(Config, MissingSectionUsesDefaults) {
  const ex::ExperimentConfig c = ex::parse_config(json{{"experiment", "interior"}});
  const auto& in = std::get<ex::InteriorConfig>(c.section);
  EXPECT_EQ(in.M, 100u);
  EXPECT_EQ(c.seed, 0u);
}

TEST(Config, UnknownKeysAreRejectedWithPath) {
  json tree = defaults("exterior");
  tree["exterior"]["robin"] = 3;
  EXPECT_NE(config_error(tree).find("'exterior.robin': unknown key"), std::string::npos);
  tree = defaults("elliptic");
  tree["colour"] = "red";
  EXPECT_NE(config_error(tree).find("'colour'"), std::string::npos);
}

TEST(Config, TypeAndRangeErrors) {
  json tree = defaults("interior");
  tree["interior"]["M"] = "many";
  EXPECT_NE(config_error(tree).find("'interior.M'"), std::string::npos);
  tree = defaults("interior");
  tree["interior"]["s"] = json::array({0.5, 1.2});
  EXPECT_FALSE(config_error(tree).empty());
  tree = defaults("simultaneous");
  tree["simultaneous"]["omega"] = json::array({0.5, 0.1});
  EXPECT_NE(config_error(tree).find("lo < hi"), std::string::npos);
  tree = defaults("simultaneous");
  tree["simultaneous"]["algorithms"] = json::array({"newton"});
  EXPECT_FALSE(config_error(tree).empty());
  tree = defaults("elliptic");
  tree["elliptic"]["halvings"] = 1;
  EXPECT_NE(config_error(tree).find("'elliptic.halvings'"), std::string::npos);
  EXPECT_FALSE(config_error(json{{"experiment", "weather"}}).empty());
  EXPECT_THROW(ex::parse_config_text("{not json"), ConfigError);
  EXPECT_THROW(ex::load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, OverridesApplyToMatchingKindOnly) {
  ex::ExperimentConfig c = ex::parse_config(defaults("simultaneous"));
  ex::Overrides o;
  o.sizes = std::vector<std::size_t>{3, 4};
  o.algorithm = "cg";
  o.seed = 9;
  ex::apply_overrides(c, o);
  const auto& sim = std::get<ex::SimultaneousConfig>(c.section);
  EXPECT_EQ(sim.sizes, (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(sim.algorithms, std::vector<std::string>{"cg"});
  EXPECT_EQ(c.seed, 9u);

  ex::ExperimentConfig e = ex::parse_config(defaults("elliptic"));
  ex::Overrides t;
  t.T = 0.5;
  EXPECT_THROW(ex::apply_overrides(e, t), ConfigError);

  ex::ExperimentConfig con = ex::parse_config(defaults("constrained"));
  ex::apply_overrides(con, t);
  const auto& cc = std::get<ex::ConstrainedConfig>(con.section);
  EXPECT_EQ(cc.T, std::vector<double>{0.5});
  EXPECT_FALSE(cc.min_time);
}

TEST(Config, HashTracksContent) {
  ex::ExperimentConfig a = ex::parse_config(defaults("elliptic"));
  ex::ExperimentConfig b = a;
  EXPECT_EQ(ex::config_hash(a), ex::config_hash(b));
  EXPECT_EQ(ex::config_hash(a).size(), 16u);
  b.output_dir = "elsewhere";
  EXPECT_EQ(ex::config_hash(a), ex::config_hash(b));
  b.seed = 1;
  EXPECT_NE(ex::config_hash(a), ex::config_hash(b));
  EXPECT_EQ(ex::fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(ex::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Config, RealFormattingRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(ex::format_real(v)), v);
  EXPECT_EQ(ex::format_real(NAN), "nan");
  EXPECT_EQ(ex::format_real(INFINITY), "inf");
}

TEST(Run, EllipticOutputsCarryHashAndSummary) {
  json tree = defaults("elliptic");
  tree["elliptic"]["halvings"] = 2;
  const ex::ExperimentConfig c = ex::parse_config(tree);
  const ex::RunOutput out = ex::run(c);
  ASSERT_GE(out.files.size(), 2u);
  EXPECT_EQ(out.files.back().name, "summary.json");
  const std::string& csv = out.files.front().content;
  EXPECT_EQ(csv.rfind("# config_hash=" + ex::config_hash(c) + "\n", 0), 0u);
  EXPECT_EQ(out.summary.at("config_hash"), ex::config_hash(c));
  EXPECT_EQ(out.summary.at("provenance").at("config"), ex::to_json(c));
  EXPECT_EQ(json::parse(out.files.back().content), out.summary);
}

TEST(Run, WriteOutputsCreatesAllFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "fraclap_write_test";
  std::filesystem::remove_all(dir);
  ex::RunOutput out;
  out.files = {{"a.csv", "1\n"}, {"b.csv", "2\n"}};
  ex::write_outputs(dir, out);
  std::ifstream in(dir / "b.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "2\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "a.csv.partial"));
  std::filesystem::remove_all(dir);
}
