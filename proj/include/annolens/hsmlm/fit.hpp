#pragma once

#include <string>
#include <vector>

#include "annolens/design.hpp"
#include "annolens/hsmlm/diagnostics.hpp"
#include "annolens/hsmlm/draws.hpp"
#include "annolens/hsmlm/model.hpp"
#include "annolens/hsmlm/nuts.hpp"

namespace annolens::hsmlm {

/// HorseshoeModel<double> seen through the sampler's density interface.
struct ModelDensity {
  const HorseshoeModel<double>& model;
  bool include_latent = false;

  Eigen::Index dimension() const { return model.dimension(); }
  double log_density_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& g) const {
    return model.log_density_gradient(q, g);
  }
  Eigen::VectorXd outputs(const Eigen::VectorXd& q) const { return model.outputs(q, include_latent); }
};

struct FitOptions {
  SamplerConfig sampler;
  bool include_latent = false;
  std::string checkpoint_dir;  ///< empty = no checkpoints
  bool log_progress = true;
};

struct FitResult {
  PosteriorDraws draws;
  DiagnosticsReport diagnostics;
  HorseshoeHyper hyper;
  std::vector<std::string> warnings;
};

ModelData<double> model_data(const design::DesignMatrix& d);

/// Samples the posterior; warns (does not fail) above 10% divergences.
FitResult fit(const ModelData<double>& data, const std::vector<std::string>& effects, const HorseshoeHyper& hyper,
              const FitOptions& opts);
/// Uses the outcome-centred intercept prior and design column names.
FitResult fit_design(const design::DesignMatrix& d, const FitOptions& opts);

}  // namespace annolens::hsmlm
