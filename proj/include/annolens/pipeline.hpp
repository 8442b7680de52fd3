#pragma once

// Stage-wise pipeline behind the command-line tool. Every stage reads the
// previous stage's files under the output directory and writes its own.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "annolens/hsmlm/nuts.hpp"
#include "annolens/posterior.hpp"
#include "annolens/simcheck.hpp"
#include "json.hpp"

namespace annolens::pipeline {

struct LexiconRef {
  std::string name;
  std::string path;
};

struct RunConfig {
  std::string base_dir;  ///< relative paths resolve against this
  std::uint64_t seed = 0;
  std::string out;
  int jobs = 1;
  std::string scenario = "full";  ///< full | annotator-split | batch-subsets

  std::string annotations, profiles, items, schema;
  char delimiter = ',';
  std::string recode;
  std::string conllu;

  std::vector<LexiconRef> norms, emotions, domain;
  std::string sentiment, synsets, hedges;

  std::size_t min_items_per_annotator = 10;
  std::size_t min_annotators_per_item = 3;
  std::vector<std::string> drop_multi;
  double split_fraction = 0.5;
  std::size_t batch_size = 0;
  std::size_t n_batches = 0;

  std::vector<std::string> feature_include;  ///< empty = all
  double threshold = 0.5;
  double cut = 0.5;
  std::string picks;

  hsmlm::SamplerConfig sampler;
  bool save_latent = false;

  posterior::SurvivorRule rule;
  std::vector<std::string> grids;  ///< empty = every surviving L:S effect

  simcheck::SyntheticSpec recovery;
  bool run_sbc = false;
  simcheck::SbcSpec sbc;

  /// Effective settings without the output directory and thread count,
  /// which do not change results. Hashed into the manifest.
  nlohmann::ordered_json canonical;

  std::string resolve(const std::string& path) const;
  std::string config_hash() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::optional<std::string> scenario;
};

/// Parses the JSON run configuration. Unknown keys, a missing seed and bad
/// values raise ConfigError.
RunConfig parse_config(const nlohmann::json& j, const std::string& base_dir, const Overrides& o = {});
RunConfig load_config(const std::string& path, const Overrides& o = {});

const std::vector<std::string>& stage_names();

/// Runs one stage (or `all` for preprocess through report).
void run_stage(std::string_view stage, const RunConfig& cfg);

}  // namespace annolens::pipeline
