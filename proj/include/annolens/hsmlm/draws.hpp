#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "annolens/hsmlm/nuts.hpp"

namespace annolens::hsmlm {

/// Post-warmup draws of every chain with their sampler statistics.
struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<ChainResult> chains;

  int n_chains() const { return static_cast<int>(chains.size()); }
  /// Draws per chain; throws DataError when chains differ in length.
  int n_draws() const;
  Eigen::Index index(std::string_view name) const;  ///< -1 if absent
  /// draws x chains for one parameter.
  Eigen::MatrixXd by_chain(Eigen::Index param) const;
  /// All chains concatenated in chain order.
  Eigen::VectorXd pooled(Eigen::Index param) const;
  Eigen::VectorXd pooled(std::string_view name) const;
  int divergences() const;
  int treedepth_hits(int max_depth) const;
};

/// Long CSV: chain, draw, sampler statistics (`__` suffix), then parameters.
void write_draws_csv(const PosteriorDraws& d, const std::string& path);
PosteriorDraws read_draws_csv(const std::string& path);

void write_checkpoint(const ChainResult& r, const std::string& fingerprint, const std::string& path);
/// nullopt when the file does not exist; ConfigError when it belongs to a
/// different configuration.
std::optional<ChainResult> read_checkpoint(const std::string& path, const std::string& fingerprint);
std::string checkpoint_path(const std::string& dir, int chain);
/// Hooks that save to and resume from `dir`.
ChainHooks checkpoint_hooks(const std::string& dir, const std::string& fingerprint);

}  // namespace annolens::hsmlm
