#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "annolens/hsmlm/draws.hpp"

namespace annolens::hsmlm {

// Every function takes a draws x chains matrix and returns NaN when the
// input is constant, non-finite or has fewer than 4 draws per chain.

/// Each chain cut into two halves (the middle draw is dropped when odd).
Eigen::MatrixXd split_chains(const Eigen::MatrixXd& x);
/// Normal scores of average ranks over all entries, (r - 3/8) / (S + 1/4).
Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& x);
/// Classic potential scale reduction on the given (already split) chains.
double rhat_basic(const Eigen::MatrixXd& x);
/// max of bulk and folded-tail rank-normalized split R-hat.
double rhat(const Eigen::MatrixXd& x);
/// Geyer initial-monotone-sequence ESS on the given chains.
double ess_basic(const Eigen::MatrixXd& x);
double ess_bulk(const Eigen::MatrixXd& x);
/// min of the ESS for the 5% and 95% quantile indicators.
double ess_tail(const Eigen::MatrixXd& x);

struct ParamDiagnostics {
  std::string name;
  double rhat = 0;
  double ess_bulk = 0;
  double ess_tail = 0;
};

struct DiagnosticsReport {
  std::vector<ParamDiagnostics> params;
  int divergences = 0;
  int treedepth_hits = 0;
  int total_draws = 0;

  double divergence_rate() const { return total_draws ? static_cast<double>(divergences) / total_draws : 0.0; }
  /// Largest finite R-hat (NaN entries are skipped).
  double max_rhat() const;
  double min_ess_bulk() const;
};

/// Requires at least two chains.
DiagnosticsReport diagnose(const PosteriorDraws& d, int max_depth);

}  // namespace annolens::hsmlm
