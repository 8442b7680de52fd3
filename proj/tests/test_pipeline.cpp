#include <string>

#include "doctest.h"

#include "annolens/csv.hpp"
#include "annolens/error.hpp"
#include "annolens/pipeline.hpp"
#include "test_support.hpp"

using namespace annolens;
using nlohmann::json;

namespace {

std::string toy_config() { return testing::source_dir() + "/data/toy/config.json"; }

json minimal() {
  return json::parse(R"({"seed": 3, "data": {"annotations": "a.csv", "profiles": "p.csv",
                         "items": "i.csv", "schema": "s.json"}})");
}

}  // namespace

TEST_CASE("config parsing is strict") {
  auto c = pipeline::parse_config(minimal(), "/base");
  CHECK(c.seed == 3);
  CHECK(c.annotations == "/base/a.csv");
  CHECK(c.out == "/base/out");
  CHECK(c.sampler.chains == 4);
  CHECK(c.sampler.draws == 7500);
  CHECK(c.sampler.seed == 3);

  auto j = minimal();
  j.erase("seed");
  CHECK_THROWS_AS(pipeline::parse_config(j, "."), ConfigError);
  pipeline::Overrides o;
  o.seed = 9;
  CHECK(pipeline::parse_config(j, ".", o).seed == 9);

  j = minimal();
  j["sampler"] = {{"chain", 2}};
  CHECK_THROWS_AS(pipeline::parse_config(j, "."), ConfigError);
  j = minimal();
  j["scenario"] = "halves";
  CHECK_THROWS_AS(pipeline::parse_config(j, "."), ConfigError);
  j = minimal();
  j["select"] = {{"threshold", "high"}};
  CHECK_THROWS_AS(pipeline::parse_config(j, "."), ConfigError);
  j = minimal();
  j["data"].erase("schema");
  CHECK_THROWS_AS(pipeline::parse_config(j, "."), ConfigError);
}

TEST_CASE("config hash ignores output directory and thread count") {
  auto a = minimal();
  auto b = minimal();
  b["out"] = "elsewhere";
  b["jobs"] = 8;
  CHECK(pipeline::parse_config(a, ".").config_hash() == pipeline::parse_config(b, ".").config_hash());
  b["seed"] = 4;
  CHECK(pipeline::parse_config(a, ".").config_hash() != pipeline::parse_config(b, ".").config_hash());
}

TEST_CASE("toy fixture validates") {
  const testing::TempDir tmp("pipeline");
  pipeline::Overrides o;
  o.out = tmp.file("out");
  CHECK_NOTHROW(pipeline::run_stage("validate", pipeline::load_config(toy_config(), o)));
}

TEST_CASE("stages name their missing prerequisite") {
  const testing::TempDir tmp("pipeline");
  pipeline::Overrides o;
  o.out = tmp.file("out");
  const auto cfg = pipeline::load_config(toy_config(), o);
  try {
    pipeline::run_stage("fit", cfg);
    FAIL("fit ran without inputs");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'preprocess'") != std::string::npos);
  }
  pipeline::run_stage("preprocess", cfg);
  try {
    pipeline::run_stage("fit", cfg);
    FAIL("fit ran without a design");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'design'") != std::string::npos);
  }
  CHECK_THROWS_AS(pipeline::run_stage("plot", cfg), ConfigError);
}

TEST_CASE("select stops when clusters have no picks") {
  const testing::TempDir tmp("pipeline");
  auto j = json::parse(csv::read_text(toy_config()));
  j["select"].erase("picks");
  const auto cfg = pipeline::parse_config(j, testing::source_dir() + "/data/toy", {std::nullopt, tmp.file("out")});
  pipeline::run_stage("preprocess", cfg);
  pipeline::run_stage("features", cfg);
  CHECK_THROWS_AS(pipeline::run_stage("select", cfg), ConfigError);
  CHECK(csv::read_text(tmp.file("out/select/picks_template.tsv")).find("sentiment_score") != std::string::npos);
}

TEST_CASE("manifest records config, version and output hashes") {
  const testing::TempDir tmp("pipeline");
  pipeline::Overrides o;
  o.out = tmp.file("out");
  const auto cfg = pipeline::load_config(toy_config(), o);
  pipeline::run_stage("preprocess", cfg);
  const auto m = json::parse(csv::read_text(tmp.file("out/manifest.json")));
  CHECK(m.at("config_hash") == cfg.config_hash());
  CHECK(m.at("config").at("seed") == cfg.seed);
  CHECK(m.at("stages").at("preprocess").at("outputs").contains("preprocess/full/annotations.csv"));
  CHECK(csv::read_text(tmp.file("out/run.log")).find("done preprocess") != std::string::npos);
}
