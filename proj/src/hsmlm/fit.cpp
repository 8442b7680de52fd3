#include "annolens/hsmlm/fit.hpp"

#include <filesystem>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace annolens::hsmlm {

ModelData<double> model_data(const design::DesignMatrix& d) {
  ModelData<double> m;
  m.x = d.x;
  m.y = d.y;
  m.annotator = d.annotator;
  m.item = d.item;
  m.n_annotators = static_cast<int>(d.annotator_ids.size());
  m.n_items = static_cast<int>(d.item_ids.size());
  return m;
}

FitResult fit(const ModelData<double>& data, const std::vector<std::string>& effects, const HorseshoeHyper& hyper,
              const FitOptions& opts) {
  opts.sampler.validate();
  const HorseshoeModel<double> model(data, hyper);
  const ModelDensity density{model, opts.include_latent};

  ChainHooks hooks;
  if (!opts.checkpoint_dir.empty()) {
    std::filesystem::create_directories(opts.checkpoint_dir);
    hooks = checkpoint_hooks(opts.checkpoint_dir, opts.sampler.fingerprint());
  }
  if (opts.log_progress) {
    hooks.progress = [](int chain, int it, int total) {
      const int step = std::max(1, total / 10);
      if (it % step == 0 || it == total) spdlog::debug("chain {}: iteration {}/{}", chain, it, total);
    };
  }

  FitResult out;
  out.hyper = hyper;
  out.draws.names = model.output_names(effects, opts.include_latent);
  out.draws.chains = run_chains(density, opts.sampler, hooks);
  if (out.draws.n_chains() >= 2 && out.draws.n_draws() >= 4) {
    out.diagnostics = diagnose(out.draws, opts.sampler.max_depth);
  } else {
    out.diagnostics.divergences = out.draws.divergences();
    out.diagnostics.treedepth_hits = out.draws.treedepth_hits(opts.sampler.max_depth);
    out.diagnostics.total_draws = out.draws.n_chains() * out.draws.n_draws();
  }
  const double rate = out.diagnostics.divergence_rate();
  if (rate > 0.10) {
    auto msg = fmt::format("{} of {} post-warmup transitions diverged ({:.1f}%); raise target acceptance",
                           out.diagnostics.divergences, out.diagnostics.total_draws, 100 * rate);
    spdlog::warn("{}", msg);
    out.warnings.push_back(std::move(msg));
  }
  return out;
}

FitResult fit_design(const design::DesignMatrix& d, const FitOptions& opts) {
  std::vector<std::string> effects;
  for (const auto& c : d.columns) effects.push_back(c.name);
  return fit(model_data(d), effects, HorseshoeHyper::for_outcome(d.y), opts);
}

}  // namespace annolens::hsmlm
