#include <cmath>
#include <random>

#include "doctest.h"

#include "annolens/error.hpp"
#include "annolens/simcheck.hpp"
#include "annolens/util.hpp"

using namespace annolens;
using namespace annolens::simcheck;

namespace {

// Posterior = prior when the fitter ignores the data, so these draws are
// exactly calibrated; `shrink` < 1 narrows them around their mean.
Fitter prior_fitter(double shrink) {
  return [shrink](const hsmlm::ModelData<double>&, const hsmlm::HorseshoeHyper& h, std::uint64_t seed) {
    SbcSpec tiny;
    tiny.p = 0;
    auto rng = make_stream(seed, 7);
    hsmlm::PosteriorDraws d;
    d.names = {"b_Intercept", "sigma", "sd_annotator", "sd_item"};
    for (int c = 0; c < 2; ++c) {
      hsmlm::ChainResult r;
      r.chain = c;
      r.draws.resize(200, 4);
      for (int i = 0; i < 200; ++i) {
        const auto s = prior_predictive(tiny, h, rng).truth;
        r.draws.row(i) << s.intercept, s.sigma, s.sd_annotator, s.sd_item;
      }
      r.stats.resize(200);
      d.chains.push_back(r);
    }
    if (shrink != 1) {
      for (Eigen::Index k = 0; k < 4; ++k) {
        const auto pooled = d.pooled(k);
        const double m = pooled.mean();
        for (auto& c : d.chains) c.draws.col(k) = (m + shrink * (c.draws.col(k).array() - m)).matrix();
      }
    }
    return d;
  };
}

hsmlm::PosteriorDraws point_draws(const Synthetic& s, int n) {
  hsmlm::PosteriorDraws d;
  d.names.push_back("b_Intercept");
  for (const auto& e : s.effects) d.names.push_back("b_" + e);
  hsmlm::ChainResult r;
  r.draws.resize(n, static_cast<Eigen::Index>(d.names.size()));
  r.draws.col(0).setConstant(s.truth.intercept);
  for (Eigen::Index j = 0; j < s.truth.beta.size(); ++j) r.draws.col(j + 1).setConstant(s.truth.beta(j));
  r.stats.resize(static_cast<std::size_t>(n));
  d.chains.push_back(r);
  return d;
}

}  // namespace

TEST_CASE("generator degenerate case and determinism") {
  SyntheticSpec spec;
  spec.n_annotators = 8;
  spec.n_items = 5;
  spec.annotations_per_item = 3;
  spec.p = 4;
  spec.intercept = 2.5;
  spec.sigma = spec.sd_annotator = spec.sd_item = 0;
  const auto s = generate(spec);
  CHECK(s.data.y.size() == 15);
  CHECK((s.data.y.array() == 2.5).all());

  SyntheticSpec real;
  real.n_annotators = 30;
  real.n_items = 20;
  real.annotations_per_item = 5;
  real.p = 6;
  real.support = {1, 4};
  real.magnitudes = {0.5, -0.5};
  const auto a = generate(real), b = generate(real);
  CHECK(a.data.y == b.data.y);
  CHECK(a.data.x == b.data.x);
  CHECK(a.data.annotator == b.data.annotator);
  CHECK(a.truth.beta(4) == -0.5);
  // distinct annotators per item
  for (int i = 0; i < 20; ++i) {
    std::vector<int> who(a.data.annotator.begin() + i * 5, a.data.annotator.begin() + i * 5 + 5);
    std::sort(who.begin(), who.end());
    CHECK(std::adjacent_find(who.begin(), who.end()) == who.end());
  }
  real.seed = 2;
  CHECK(generate(real).data.y != a.data.y);
  real.support = {9};
  real.magnitudes = {1};
  CHECK_THROWS_AS(generate(real), ConfigError);
}

TEST_CASE("simulated annotator intercepts have the requested spread") {
  SyntheticSpec spec;
  spec.n_annotators = 10000;
  spec.n_items = 1;
  spec.annotations_per_item = 1;
  spec.p = 0;
  spec.sd_annotator = 0.3;
  const auto s = generate(spec);
  const auto& u = s.truth.u;
  const double sd = std::sqrt((u.array() - u.mean()).square().sum() / (u.size() - 1));
  CHECK(std::abs(sd - 0.3) / 0.3 < 0.03);
}

TEST_CASE("recovery report") {
  SyntheticSpec spec;
  spec.n_annotators = 10;
  spec.n_items = 10;
  spec.annotations_per_item = 2;
  spec.p = 6;
  spec.support = {0, 3};
  spec.magnitudes = {0.5, -0.7};
  const auto s = generate(spec);
  const auto perfect = recovery_report(point_draws(s, 50), s.effects, s.truth);
  CHECK(perfect.covered == 2);
  CHECK(perfect.recovered == 2);
  CHECK(perfect.false_positives == 0);
  CHECK(perfect.n_zero == 4);
  CHECK(perfect.sign_matches + perfect.sign_mismatches == 2);

  auto flipped = point_draws(s, 50);
  flipped.chains[0].draws.col(1) *= -1;               // x1 wrong sign
  flipped.chains[0].draws.col(3).setConstant(0.2);  // x3 false positive
  const auto r = recovery_report(flipped, s.effects, s.truth);
  CHECK(r.sign_mismatches == 1);
  CHECK(r.recovered == 1);
  CHECK(r.false_positives == 1);
  CHECK(r.false_positive_effects == std::vector<std::string>{"x3"});
  CHECK(to_json(r)["false_positives"] == 1);

  spec.support.clear();
  spec.magnitudes.clear();
  const auto empty = generate(spec);
  const auto e = recovery_report(point_draws(empty, 50), empty.effects, empty.truth);
  CHECK(e.support.empty());
  CHECK(e.false_positives == 0);
  CHECK(e.n_zero == 6);
}

TEST_CASE("rank histogram and chi-square") {
  std::vector<int> ranks;
  for (int r = 0; r < 100; ++r) ranks.push_back(r);
  const auto h = rank_histogram(ranks, 99, 20);
  CHECK(h.size() == 20);
  for (int c : h) CHECK(c == 5);
  CHECK(uniformity_chi2(h, 100) == 0);
  CHECK(chi2_p_value(0, 19) == 1);
  // reference value of the chi-square(19) upper tail at its 1% point
  CHECK(chi2_p_value(36.19087, 19) == doctest::Approx(0.01).epsilon(1e-4));
  CHECK_THROWS_AS(rank_histogram({100}, 99, 20), DataError);
}

TEST_CASE("sbc accepts a calibrated fitter and rejects a narrow one") {
  SbcSpec spec;
  spec.n_sims = 200;
  spec.seed = 5;
  const auto good = sbc(spec, prior_fitter(1.0));
  CHECK(good.excluded == 0);
  for (std::size_t k = 0; k < good.params.size(); ++k) {
    CHECK(good.ranks[k].size() == 200);
    CHECK(good.p_value[k] > 0.01);
  }
  const auto bad = sbc(spec, prior_fitter(0.5));
  for (std::size_t k = 0; k < bad.params.size(); ++k) {
    CHECK(bad.p_value[k] < 0.01);
    // U shape: the outer bins collect the excess
    CHECK(bad.histogram[k].front() + bad.histogram[k].back() > 2 * 10);
  }
  spec.bins = 7;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("sbc with the sampler on a few simulations") {
  SbcSpec spec;
  spec.n_sims = 4;
  spec.seed = 11;
  const auto r = sbc(spec, nuts_fitter(spec.sampler));
  CHECK(r.n_sims == 4);
  CHECK(r.ranks[0].size() + static_cast<std::size_t>(r.excluded) == 4);
  for (const auto& ranks : r.ranks) {
    for (int x : ranks) CHECK((x >= 0 && x <= 99));
  }
}
