#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "annolens/error.hpp"
#include "annolens/pipeline.hpp"
#include "annolens/version.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("annolens"));
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");

  CLI::App app{"Annotator-characteristic analysis with a horseshoe multilevel model"};
  app.set_version_flag("--version", std::string(annolens::kVersion));
  app.require_subcommand(1, 1);

  std::string config;
  annolens::pipeline::Overrides o;
  bool verbose = false;
  bool quiet = false;

  const auto add_stage = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override the global seed");
    sub->add_option("--out", o.out, "Override the output directory");
    sub->add_option("--jobs", o.jobs, "Maximum parallel workers")->check(CLI::PositiveNumber);
    sub->add_option("--scenario", o.scenario, "full, annotator-split or batch-subsets")
        ->check(CLI::IsMember({"full", "annotator-split", "batch-subsets"}));
    sub->add_flag("-v,--verbose", verbose, "Debug logging");
    sub->add_flag("-q,--quiet", quiet, "Warnings and errors only");
  };
  add_stage("validate", "Check inputs against the schema");
  add_stage("preprocess", "Clean, filter and split annotations");
  add_stage("features", "Extract and standardize item features");
  add_stage("select", "Cluster correlated features and keep representatives");
  add_stage("design", "Build the design matrix");
  add_stage("fit", "Sample the posterior");
  add_stage("summarize", "Posterior summaries and survivors");
  add_stage("predict", "Prediction grids for interaction effects");
  add_stage("report", "Plain-text report");
  add_stage("simcheck", "Synthetic recovery and calibration checks");
  add_stage("all", "Run preprocess through report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);
  if (quiet) spdlog::set_level(spdlog::level::warn);

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = annolens::pipeline::load_config(config, o);
    spdlog::debug("config {} seed {} out {}", cfg.config_hash(), cfg.seed, cfg.out);
    annolens::pipeline::run_stage(stage, cfg);
    spdlog::info("{}: done", stage);
    return 0;
  } catch (const annolens::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const annolens::DataError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const annolens::NumericalError& e) {
    spdlog::error("{}", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return kNumeric;
  }
}
