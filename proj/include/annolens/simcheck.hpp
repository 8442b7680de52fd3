#pragma once

// Synthetic cross-classified data with known truth, recovery scoring and
// simulation-based calibration.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "annolens/hsmlm/draws.hpp"
#include "annolens/hsmlm/model.hpp"
#include "annolens/hsmlm/nuts.hpp"
#include "annolens/posterior.hpp"
#include "json.hpp"

namespace annolens::simcheck {

struct SyntheticSpec {
  int n_annotators = 200;
  int n_items = 200;
  int annotations_per_item = 10;
  int p = 50;
  std::vector<int> support;  ///< 0-based effect indices with non-zero truth
  std::vector<double> magnitudes;
  double intercept = 0;
  double sigma = 1;
  double sd_annotator = 0.3;
  double sd_item = 0.3;
  std::uint64_t seed = 1;

  /// Throws ConfigError on out-of-range support, negative scales or more
  /// annotations per item than annotators.
  void validate() const;
};

struct Truth {
  double intercept = 0;
  Eigen::VectorXd beta;
  Eigen::VectorXd u;  ///< annotator intercepts
  Eigen::VectorXd v;  ///< item intercepts
  double sigma = 0;
  double sd_annotator = 0;
  double sd_item = 0;
};

struct Synthetic {
  hsmlm::ModelData<double> data;
  Truth truth;
  std::vector<std::string> effects;  ///< x1, x2, ...
};

/// Each item is labelled by `annotations_per_item` distinct random
/// annotators; X is iid standard normal per observation. Pure in `spec`.
Synthetic generate(const SyntheticSpec& spec);

struct EffectRecovery {
  std::string effect;
  double truth = 0;
  double median = 0;
  posterior::Interval ci90;
  bool survivor = false;
  bool sign_match = false;
  bool covered = false;
};

struct RecoveryReport {
  std::vector<EffectRecovery> support;  ///< true non-zero effects
  int recovered = 0;                    ///< survivors with the right sign
  int sign_matches = 0;
  int sign_mismatches = 0;
  int covered = 0;
  int false_positives = 0;  ///< survivors among true zeros
  int n_zero = 0;
  std::vector<std::string> false_positive_effects;
};

/// Scores `b_<effect>` draws against the truth.
RecoveryReport recovery_report(const hsmlm::PosteriorDraws& draws, const std::vector<std::string>& effects,
                               const Truth& truth, const posterior::SurvivorRule& rule = {});
nlohmann::ordered_json to_json(const RecoveryReport& r);

/// Draws of b_Intercept, sigma, sd_annotator and sd_item are what SBC ranks.
using Fitter = std::function<hsmlm::PosteriorDraws(const hsmlm::ModelData<double>& data,
                                                   const hsmlm::HorseshoeHyper& hyper, std::uint64_t seed)>;

struct SbcSpec {
  int n_sims = 200;
  int p = 3;
  int n_annotators = 10;
  int n_items = 10;
  int n_obs = 50;
  int n_ranks = 99;  ///< thinned posterior draws per simulation
  int bins = 20;
  double rhat_threshold = 1.1;
  std::uint64_t seed = 1;
  int jobs = 1;
  hsmlm::SamplerConfig sampler = default_sampler();

  static hsmlm::SamplerConfig default_sampler();
  void validate() const;
};

/// Intercept prior fixed at t(3, 0, 2.5) so that the prior does not depend
/// on the simulated outcome.
hsmlm::HorseshoeHyper sbc_hyper();

/// One draw of every parameter from the prior, plus data simulated from it.
Synthetic prior_predictive(const SbcSpec& spec, const hsmlm::HorseshoeHyper& hyper, std::mt19937_64& rng);

struct SbcReport {
  std::vector<std::string> params;
  std::vector<std::vector<int>> ranks;      ///< per parameter, per used simulation
  std::vector<std::vector<int>> histogram;  ///< per parameter, `bins` counts
  std::vector<double> chi2;
  std::vector<double> p_value;
  int n_sims = 0;
  int excluded = 0;  ///< fits with R-hat above the threshold
  std::vector<int> excluded_sims;
};

/// Chi-square uniformity test of ranks in 0..n_ranks over `bins` bins.
double uniformity_chi2(const std::vector<int>& hist, int n);
double chi2_p_value(double chi2, int df);
std::vector<int> rank_histogram(const std::vector<int>& ranks, int n_ranks, int bins);

/// NUTS fit with `spec.sampler`.
Fitter nuts_fitter(const hsmlm::SamplerConfig& sampler);
SbcReport sbc(const SbcSpec& spec, const Fitter& fitter);
nlohmann::ordered_json to_json(const SbcReport& r);

}  // namespace annolens::simcheck
