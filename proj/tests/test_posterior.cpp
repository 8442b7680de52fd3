#include <cmath>
#include <map>
#include <random>

#include "doctest.h"

#include "annolens/csv.hpp"
#include "annolens/error.hpp"
#include "annolens/posterior.hpp"
#include "test_support.hpp"

using namespace annolens;
using namespace annolens::posterior;

namespace {

Eigen::VectorXd normal_draws(int n, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(mean, sd);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

// Constant-per-parameter draws over two chains.
hsmlm::PosteriorDraws fixed_draws(const std::vector<std::pair<std::string, Eigen::VectorXd>>& params) {
  hsmlm::PosteriorDraws d;
  const auto n = params.front().second.size();
  for (int c = 0; c < 2; ++c) {
    hsmlm::ChainResult r;
    r.chain = c;
    r.draws.resize(n / 2, static_cast<Eigen::Index>(params.size()));
    r.stats.resize(static_cast<std::size_t>(n / 2));
    for (std::size_t k = 0; k < params.size(); ++k) r.draws.col(static_cast<Eigen::Index>(k)) = params[k].second.segment(c * (n / 2), n / 2);
    d.chains.push_back(r);
  }
  for (const auto& p : params) d.names.push_back(p.first);
  return d;
}

design::DesignMatrix grid_meta() {
  design::DesignMatrix m;
  m.features = {"n_hedges"};
  m.encodings.push_back(design::ordinal_encoding("age", {"young", "old"}));
  m.encodings.push_back(design::nominal_encoding("gender", {"male", "female", "other"}, "male"));
  m.columns = {{"n_hedges", design::Origin::L, {}},
               {"age.L", design::Origin::S, {}},
               {"genderfemale", design::Origin::S, {}},
               {"genderother", design::Origin::S, {}},
               {"age.L:n_hedges", design::Origin::LS, {"n_hedges", "age.L"}},
               {"genderfemale:n_hedges", design::Origin::LS, {"n_hedges", "genderfemale"}}};
  return m;
}

}  // namespace

TEST_CASE("hdi on an even grid and edge masses") {
  Eigen::VectorXd v(100);
  for (int i = 0; i < 100; ++i) v(i) = i + 1;
  const auto h = hdi(v, 0.95);
  CHECK(h.lo == 1);
  CHECK(h.hi == 95);
  Eigen::VectorXd small(12);
  for (int i = 0; i < 12; ++i) small(i) = i * i;
  const auto all = hdi(small, 0.9999);
  CHECK(all.lo == 0);
  CHECK(all.hi == 121);
  CHECK_THROWS_AS(hdi(v, 1.0), ConfigError);
  CHECK_THROWS_AS(hdi(v.head(5), 0.5), DataError);

  // skewed sample: the HDI hugs the mode
  Eigen::VectorXd skew(10);
  skew << 0, 0.1, 0.2, 0.3, 0.4, 0.5, 3, 6, 9, 12;
  const auto hs = hdi(skew, 0.5);
  CHECK(hs.lo == 0);
  CHECK(hs.hi == 0.4);
}

TEST_CASE("hdi and equal-tailed intervals on normal draws") {
  const auto v = normal_draws(40000, 1.0, 2.0, 3);
  const auto h = hdi(v, 0.95);
  const auto e = equal_tailed(v, 0.95);
  CHECK(h.width() <= e.width());
  CHECK(h.lo == doctest::Approx(e.lo).epsilon(0.03));
  CHECK(h.hi == doctest::Approx(e.hi).epsilon(0.03));
  CHECK(e.lo == doctest::Approx(1 - 1.959964 * 2).epsilon(0.02));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto w = normal_draws(200, 0, 1, s).array().exp().matrix().eval();
    CHECK(hdi(w, 0.8).width() <= equal_tailed(w, 0.8).width() + 1e-15);
  }
  Eigen::VectorXd q(4);
  q << 4, 1, 3, 2;
  CHECK(quantile(q, 0.25) == 1.75);
  CHECK(median(q) == 2.5);
}

TEST_CASE("survivor rule") {
  Eigen::VectorXd pos = normal_draws(1000, 0, 1, 1).cwiseAbs().array() + 0.01;
  CHECK(summarize_effect("a", "L", pos).survivor);
  Eigen::VectorXd sym(1000);
  sym.head(500) = pos.head(500);
  sym.tail(500) = -pos.head(500);
  CHECK_FALSE(summarize_effect("b", "L", sym).survivor);

  // 6% of mass below zero: the 5% quantile is negative
  Eigen::VectorXd six(1000);
  for (int i = 0; i < 1000; ++i) six(i) = i < 60 ? -1.0 - i : 1.0 + i;
  const auto s6 = summarize_effect("c", "L", six);
  CHECK(s6.ci90.lo < 0);
  CHECK_FALSE(s6.survivor);
  Eigen::VectorXd four = six;
  for (int i = 40; i < 60; ++i) four(i) = 1.0 + i;
  CHECK(summarize_effect("d", "L", four).survivor);

  // sign symmetry
  const auto v = normal_draws(3000, 0.4, 0.2, 8);
  const auto a = summarize_effect("x", "L", v), b = summarize_effect("x", "L", -v);
  CHECK(a.survivor == b.survivor);
  CHECK(a.median == -b.median);
  CHECK(a.ci90.lo == doctest::Approx(-b.ci90.hi).epsilon(1e-14));

  // draw order does not matter
  Eigen::VectorXd shuffled = v;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.data(), shuffled.data() + shuffled.size(), rng);
  const auto c = summarize_effect("x", "L", shuffled);
  CHECK(c.median == a.median);
  CHECK(c.hdi95.lo == a.hdi95.lo);
  CHECK(c.ci90.hi == a.ci90.hi);

  SurvivorRule hdi_rule;
  hdi_rule.use_hdi = true;
  CHECK(summarize_effect("x", "L", v, hdi_rule).ci90.width() <= a.ci90.width());
}

TEST_CASE("prediction grid closed form") {
  const int n = 20;
  auto constant = [&](double v) { return Eigen::VectorXd::Constant(n, v).eval(); };
  const auto draws = fixed_draws({{"b_Intercept", constant(2)},
                                  {"b_n_hedges", constant(0.3)},
                                  {"b_age.L", constant(0.5)},
                                  {"b_genderfemale", constant(0)},
                                  {"b_genderother", constant(0)},
                                  {"b_age.L:n_hedges", constant(0.2)},
                                  {"b_genderfemale:n_hedges", constant(0)}});
  const auto meta = grid_meta();
  const auto g = predict_grid(draws, meta, "age.L:n_hedges");
  CHECK(g.feature == "n_hedges");
  CHECK(g.characteristic == "age");
  REQUIRE(g.points.size() == 6);
  const double r = 1 / std::sqrt(2.0);
  for (const auto& p : g.points) {
    const double code = p.level == "young" ? -r : r;
    const double expect = 2 + 0.3 * p.feature_sd + code * 0.5 + p.feature_sd * code * 0.2;
    CHECK(p.mean == doctest::Approx(expect).epsilon(1e-14));
    CHECK(p.hdi95.lo == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK(predict_grid(draws, meta, "n_hedges:age").points.size() == 6);
  CHECK(predict_grid(draws, meta, "gender:n_hedges").points.size() == 9);
  CHECK_THROWS_AS(predict_grid(draws, meta, "n_hedges:height"), ConfigError);
}

TEST_CASE("grid geometry without interactions") {
  const int n = 400;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  auto noisy = [&](double m) {
    Eigen::VectorXd v(n);
    for (auto& x : v) x = m + 0.1 * z(rng);
    return v;
  };
  const auto zero = Eigen::VectorXd::Zero(n).eval();
  const auto draws = fixed_draws({{"b_Intercept", noisy(1)},
                                  {"b_n_hedges", noisy(0.4)},
                                  {"b_age.L", noisy(0.3)},
                                  {"b_genderfemale", noisy(-0.2)},
                                  {"b_genderother", noisy(0.1)},
                                  {"b_age.L:n_hedges", zero},
                                  {"b_genderfemale:n_hedges", zero}});
  const auto g = predict_grid(draws, grid_meta(), "gender:n_hedges");
  // parallel curves: the slope over feature_sd is the same for every level
  std::map<std::string, std::vector<double>> by_level;
  for (const auto& p : g.points) by_level[p.level].push_back(p.mean);
  for (const auto& [level, m] : by_level) {
    CHECK(m[2] - m[1] == doctest::Approx(by_level["male"][2] - by_level["male"][1]).epsilon(1e-12));
  }

  // x = 0 does not depend on beta_L
  auto altered = draws;
  for (auto& c : altered.chains) c.draws.col(1).array() += 5;
  const auto g2 = predict_grid(altered, grid_meta(), "gender:n_hedges");
  for (std::size_t k = 0; k < g.points.size(); ++k) {
    if (g.points[k].feature_sd == 0) CHECK(g2.points[k].mean == g.points[k].mean);
  }

  // all beta_S and interactions zero: identical curves across levels
  auto flat = draws;
  for (auto& c : flat.chains) c.draws.rightCols(5).setZero();
  const auto g3 = predict_grid(flat, grid_meta(), "gender:n_hedges");
  for (std::size_t k = 3; k < g3.points.size(); ++k) CHECK(g3.points[k].mean == g3.points[k % 3].mean);
}

TEST_CASE("summary export and report text") {
  std::vector<EffectSummary> s;
  s.push_back(summarize_effect("ttr", "L", normal_draws(500, -0.8, 0.1, 1)));
  s.push_back(summarize_effect("genderfemale", "S", normal_draws(500, 0.01, 1, 2)));
  s.push_back(summarize_effect("age.L:ttr", "L:S", normal_draws(500, 0.3, 0.05, 3)));
  s.push_back(summarize_effect("n_hedges", "L", normal_draws(500, 1.2, 0.1, 4)));

  const auto surv = survivors(s);
  REQUIRE(surv.size() == 3);
  CHECK(surv[0].effect == "n_hedges");
  CHECK(surv[1].effect == "ttr");
  CHECK(surv[2].effect == "age.L:ttr");

  annolens::testing::TempDir dir("posterior");
  write_summary_csv(s, dir.file("summary.csv"));
  const auto back = read_summary_csv(dir.file("summary.csv"));
  REQUIRE(back.size() == 4);
  CHECK(back[0].hdi95.lo == s[0].hdi95.lo);
  CHECK(back[1].survivor == s[1].survivor);
  CHECK(csv::read_text(dir.file("summary.csv")).rfind("effect,origin,median,hdi95_lo,hdi95_hi,ci90_lo,ci90_hi,survivor\n", 0) == 0);

  const auto text = format_report(s, nullptr);
  CHECK(text.find("[L] 2 survivors") != std::string::npos);
  CHECK(text.find("n_hedges") < text.find("  ttr"));
  CHECK(text.find("genderfemale") == std::string::npos);

  hsmlm::DiagnosticsReport diag;
  diag.divergences = 3;
  diag.total_draws = 1000;
  CHECK(format_report(s, &diag).rfind("WARNING: 3 divergent", 0) == 0);

  std::vector<EffectSummary> none{s[1]};
  CHECK(format_report(none, nullptr).find("No effects survived.") != std::string::npos);
}
