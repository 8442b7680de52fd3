#include "annolens/simcheck.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "annolens/error.hpp"
#include "annolens/hsmlm/diagnostics.hpp"
#include "annolens/hsmlm/fit.hpp"
#include "annolens/util.hpp"

namespace annolens::simcheck {

namespace {

const std::vector<std::string> kSbcParams{"b_Intercept", "sigma", "sd_annotator", "sd_item"};

std::vector<std::string> effect_names(int p) {
  std::vector<std::string> out;
  for (int j = 0; j < p; ++j) out.push_back(fmt::format("x{}", j + 1));
  return out;
}

void fill_outcome(Synthetic& s, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  auto& d = s.data;
  const auto& t = s.truth;
  d.y.resize(d.x.rows());
  for (Eigen::Index r = 0; r < d.x.rows(); ++r) {
    const double mu = t.intercept + d.x.row(r).dot(t.beta) + t.u(d.annotator[static_cast<std::size_t>(r)]) +
                      t.v(d.item[static_cast<std::size_t>(r)]);
    d.y(r) = mu + t.sigma * n01(rng);
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_annotators < 1 || n_items < 1 || annotations_per_item < 1 || p < 0) {
    throw ConfigError("synthetic spec: sizes must be positive");
  }
  if (annotations_per_item > n_annotators) throw ConfigError("synthetic spec: more annotations per item than annotators");
  if (support.size() != magnitudes.size()) throw ConfigError("synthetic spec: support and magnitudes differ in length");
  for (int j : support) {
    if (j < 0 || j >= p) throw ConfigError(fmt::format("synthetic spec: support index {} outside 0..{}", j, p - 1));
  }
  for (double s : {sigma, sd_annotator, sd_item}) {
    if (!(s >= 0) || !std::isfinite(s)) throw ConfigError("synthetic spec: scales must be non-negative");
  }
}

Synthetic generate(const SyntheticSpec& spec) {
  spec.validate();
  auto rng = make_stream(spec.seed, 0);
  std::normal_distribution<double> n01;
  Synthetic s;
  s.effects = effect_names(spec.p);
  auto& t = s.truth;
  t.intercept = spec.intercept;
  t.sigma = spec.sigma;
  t.sd_annotator = spec.sd_annotator;
  t.sd_item = spec.sd_item;
  t.beta = Eigen::VectorXd::Zero(spec.p);
  for (std::size_t k = 0; k < spec.support.size(); ++k) t.beta(spec.support[k]) = spec.magnitudes[k];
  t.u.resize(spec.n_annotators);
  t.v.resize(spec.n_items);
  for (auto& x : t.u) x = spec.sd_annotator * n01(rng);
  for (auto& x : t.v) x = spec.sd_item * n01(rng);

  auto& d = s.data;
  d.n_annotators = spec.n_annotators;
  d.n_items = spec.n_items;
  std::vector<int> pool(static_cast<std::size_t>(spec.n_annotators));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < spec.n_items; ++i) {
    // partial Fisher-Yates for k distinct annotators
    for (int k = 0; k < spec.annotations_per_item; ++k) {
      std::uniform_int_distribution<int> pick(k, spec.n_annotators - 1);
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(rng))]);
      d.annotator.push_back(pool[static_cast<std::size_t>(k)]);
      d.item.push_back(i);
    }
  }
  const auto n = static_cast<Eigen::Index>(d.item.size());
  d.x.resize(n, spec.p);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index j = 0; j < spec.p; ++j) d.x(r, j) = n01(rng);
  }
  fill_outcome(s, rng);
  return s;
}

RecoveryReport recovery_report(const hsmlm::PosteriorDraws& draws, const std::vector<std::string>& effects,
                               const Truth& truth, const posterior::SurvivorRule& rule) {
  if (static_cast<Eigen::Index>(effects.size()) != truth.beta.size()) throw DataError("effects and truth differ in length");
  RecoveryReport r;
  for (std::size_t j = 0; j < effects.size(); ++j) {
    const double b = truth.beta(static_cast<Eigen::Index>(j));
    const auto s = posterior::summarize_effect(effects[j], "L", draws.pooled("b_" + effects[j]), rule);
    if (b == 0) {
      ++r.n_zero;
      if (s.survivor) {
        ++r.false_positives;
        r.false_positive_effects.push_back(effects[j]);
      }
      continue;
    }
    EffectRecovery e;
    e.effect = effects[j];
    e.truth = b;
    e.median = s.median;
    e.ci90 = s.ci90;
    e.survivor = s.survivor;
    e.sign_match = (s.median > 0) == (b > 0) && s.median != 0;
    e.covered = !s.ci90.excludes(b);
    r.sign_matches += e.sign_match;
    r.sign_mismatches += !e.sign_match;
    r.covered += e.covered;
    r.recovered += e.survivor && e.sign_match;
    r.support.push_back(e);
  }
  return r;
}

nlohmann::ordered_json to_json(const RecoveryReport& r) {
  nlohmann::ordered_json j;
  j["recovered"] = r.recovered;
  j["support_size"] = r.support.size();
  j["sign_matches"] = r.sign_matches;
  j["sign_mismatches"] = r.sign_mismatches;
  j["covered"] = r.covered;
  j["false_positives"] = r.false_positives;
  j["n_zero"] = r.n_zero;
  j["false_positive_effects"] = r.false_positive_effects;
  auto& s = j["support"] = nlohmann::ordered_json::array();
  for (const auto& e : r.support) {
    s.push_back({{"effect", e.effect},
                 {"truth", format_number(e.truth)},
                 {"median", format_number(e.median)},
                 {"ci90_lo", format_number(e.ci90.lo)},
                 {"ci90_hi", format_number(e.ci90.hi)},
                 {"survivor", e.survivor},
                 {"sign_match", e.sign_match},
                 {"covered", e.covered}});
  }
  return j;
}

hsmlm::SamplerConfig SbcSpec::default_sampler() {
  hsmlm::SamplerConfig c;
  c.chains = 2;
  c.warmup = 500;
  c.draws = 500;
  c.target_accept = 0.95;
  c.jobs = 1;
  return c;
}

void SbcSpec::validate() const {
  if (n_sims < 1 || p < 0 || n_annotators < 1 || n_items < 1 || n_obs < 1) throw ConfigError("sbc: sizes must be positive");
  if (n_ranks < 1 || bins < 2 || (n_ranks + 1) % bins != 0) {
    throw ConfigError("sbc: bins must divide the number of possible ranks (n_ranks + 1)");
  }
  if (sampler.chains < 2) throw ConfigError("sbc: at least two chains are needed for the R-hat screen");
  if (sampler.chains * sampler.draws < n_ranks) throw ConfigError("sbc: fewer posterior draws than ranks");
  sampler.validate();
}

hsmlm::HorseshoeHyper sbc_hyper() {
  hsmlm::HorseshoeHyper h;
  h.intercept_loc = 0;
  h.intercept_scale = 2.5;
  return h;
}

Synthetic prior_predictive(const SbcSpec& spec, const hsmlm::HorseshoeHyper& h, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::student_t_distribution<double> t_sd(h.sd_df), t_local(h.local_df), t_global(h.global_df), t_icpt(h.intercept_df);
  std::gamma_distribution<double> gamma(h.slab_df / 2, 2.0 / h.slab_df);  // rate slab_df / 2

  Synthetic s;
  s.effects = effect_names(spec.p);
  auto& t = s.truth;
  t.intercept = h.intercept_loc + h.intercept_scale * t_icpt(rng);
  t.sigma = h.sd_scale * std::abs(t_sd(rng));
  t.sd_annotator = h.sd_scale * std::abs(t_sd(rng));
  t.sd_item = h.sd_scale * std::abs(t_sd(rng));
  const double tau = h.global_scale * t.sigma * std::abs(t_global(rng));
  const double c2 = h.slab_scale * h.slab_scale / gamma(rng);
  t.beta.resize(spec.p);
  for (auto& b : t.beta) {
    const double lam = std::abs(t_local(rng));
    const double lt = std::sqrt(c2 * lam * lam / (c2 + tau * tau * lam * lam));
    b = n01(rng) * tau * lt;
  }
  t.u.resize(spec.n_annotators);
  t.v.resize(spec.n_items);
  for (auto& x : t.u) x = t.sd_annotator * n01(rng);
  for (auto& x : t.v) x = t.sd_item * n01(rng);

  auto& d = s.data;
  d.n_annotators = spec.n_annotators;
  d.n_items = spec.n_items;
  d.x.resize(spec.n_obs, spec.p);
  for (int r = 0; r < spec.n_obs; ++r) {
    // balanced crossing: every annotator and item appears
    d.annotator.push_back(r % spec.n_annotators);
    d.item.push_back((r / spec.n_annotators + 3 * (r % spec.n_annotators)) % spec.n_items);
    for (int j = 0; j < spec.p; ++j) d.x(r, j) = n01(rng);
  }
  fill_outcome(s, rng);
  return s;
}

std::vector<int> rank_histogram(const std::vector<int>& ranks, int n_ranks, int bins) {
  std::vector<int> h(static_cast<std::size_t>(bins), 0);
  const int width = (n_ranks + 1) / bins;
  for (int r : ranks) {
    if (r < 0 || r > n_ranks) throw DataError("rank outside 0..n_ranks");
    ++h[static_cast<std::size_t>(r / width)];
  }
  return h;
}

double uniformity_chi2(const std::vector<int>& hist, int n) {
  const double e = static_cast<double>(n) / static_cast<double>(hist.size());
  double chi2 = 0;
  for (int o : hist) chi2 += (o - e) * (o - e) / e;
  return chi2;
}

double chi2_p_value(double chi2, int df) { return boost::math::gamma_q(df / 2.0, chi2 / 2.0); }

Fitter nuts_fitter(const hsmlm::SamplerConfig& sampler) {
  return [sampler](const hsmlm::ModelData<double>& data, const hsmlm::HorseshoeHyper& hyper, std::uint64_t seed) {
    hsmlm::FitOptions o;
    o.sampler = sampler;
    o.sampler.seed = seed;
    o.log_progress = false;
    std::vector<std::string> effects;
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) effects.push_back(fmt::format("x{}", j + 1));
    return hsmlm::fit(data, effects, hyper, o).draws;
  };
}

SbcReport sbc(const SbcSpec& spec, const Fitter& fitter) {
  spec.validate();
  const auto hyper = sbc_hyper();
  const auto n = static_cast<std::size_t>(spec.n_sims);
  std::vector<std::vector<int>> sim_ranks(n);
  std::vector<char> excluded(n, 0);
  std::vector<std::exception_ptr> errors(n);

  auto run_one = [&](std::size_t s) {
    auto rng = make_stream(spec.seed, s);
    const auto sim = prior_predictive(spec, hyper, rng);
    const auto draws = fitter(sim.data, hyper, spec.seed + 1'000'003ULL * (s + 1));
    const double truth[] = {sim.truth.intercept, sim.truth.sigma, sim.truth.sd_annotator, sim.truth.sd_item};
    std::vector<int> ranks;
    for (std::size_t k = 0; k < kSbcParams.size(); ++k) {
      const auto idx = draws.index(kSbcParams[k]);
      if (idx < 0) throw DataError(fmt::format("fitter returned no '{}' draws", kSbcParams[k]));
      if (draws.n_chains() >= 2) {
        const double r = hsmlm::rhat(draws.by_chain(idx));
        if (!(r <= spec.rhat_threshold)) excluded[s] = 1;
      }
      const auto pooled = draws.pooled(idx);
      const auto total = pooled.size();
      int rank = 0;
      for (int l = 0; l < spec.n_ranks; ++l) {
        const auto at = static_cast<Eigen::Index>(static_cast<long long>(l) * total / spec.n_ranks);
        rank += pooled(at) < truth[k] ? 1 : 0;
      }
      ranks.push_back(rank);
    }
    sim_ranks[s] = std::move(ranks);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t s = next++; s < n; s = next++) {
      try {
        run_one(s);
      } catch (const NumericalError& e) {
        spdlog::warn("sbc simulation {} failed: {}", s, e.what());
        excluded[s] = 1;
      } catch (...) {
        errors[s] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(spec.jobs, spec.n_sims));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SbcReport r;
  r.params = kSbcParams;
  r.n_sims = spec.n_sims;
  r.ranks.resize(kSbcParams.size());
  for (std::size_t s = 0; s < n; ++s) {
    if (excluded[s]) {
      ++r.excluded;
      r.excluded_sims.push_back(static_cast<int>(s));
      continue;
    }
    for (std::size_t k = 0; k < kSbcParams.size(); ++k) r.ranks[k].push_back(sim_ranks[s][k]);
  }
  for (std::size_t k = 0; k < kSbcParams.size(); ++k) {
    r.histogram.push_back(rank_histogram(r.ranks[k], spec.n_ranks, spec.bins));
    const double chi2 = uniformity_chi2(r.histogram.back(), static_cast<int>(r.ranks[k].size()));
    r.chi2.push_back(chi2);
    r.p_value.push_back(chi2_p_value(chi2, spec.bins - 1));
  }
  return r;
}

nlohmann::ordered_json to_json(const SbcReport& r) {
  nlohmann::ordered_json j;
  j["n_sims"] = r.n_sims;
  j["excluded"] = r.excluded;
  j["excluded_sims"] = r.excluded_sims;
  auto& ps = j["params"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < r.params.size(); ++k) {
    ps.push_back({{"name", r.params[k]},
                  {"chi2", format_number(r.chi2[k])},
                  {"p_value", format_number(r.p_value[k])},
                  {"histogram", r.histogram[k]}});
  }
  return j;
}

}  // namespace annolens::simcheck
