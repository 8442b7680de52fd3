#include <cmath>
#include <random>

#include "doctest.h"

#include "annolens/design.hpp"
#include "annolens/error.hpp"
#include "test_support.hpp"

using namespace annolens;
using namespace annolens::design;
using corpus::CharType;

namespace {

lexfeat::FeatureMatrix features_for(const std::vector<std::string>& items, const std::vector<std::string>& names,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  lexfeat::FeatureMatrix f;
  f.item_ids = items;
  for (const auto& n : names) f.columns.push_back({n, lexfeat::FeatureGroup::surface, false});
  f.values.resize(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(names.size()));
  for (Eigen::Index i = 0; i < f.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < f.values.cols(); ++j) f.values(i, j) = z(rng);
  }
  f.state = lexfeat::MatrixState::standardized;
  return f;
}

corpus::Dataset small_dataset() {
  corpus::Dataset ds;
  ds.schema.characteristics.push_back({"gender", CharType::nominal, {"male", "female"}, "male", {}});
  for (int i = 0; i < 4; ++i) ds.items.push_back({"i" + std::to_string(i), ""});
  ds.annotators = {{"a1", {{"gender", "male"}}}, {"a2", {{"gender", "female"}}}, {"a3", {{"gender", "female"}}}};
  int label = 1;
  for (const auto& it : ds.items) {
    for (const auto& a : ds.annotators) ds.annotations.push_back({it.item_id, a.annotator_id, 1 + (label++ % 5)});
  }
  return ds;
}

}  // namespace

TEST_CASE("polynomial contrasts") {
  auto c3 = poly_contrasts(3);
  CHECK(c3(0, 0) == doctest::Approx(-1 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(std::abs(c3(1, 0)) < 1e-15);
  CHECK(c3(2, 0) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(c3(0, 1) == doctest::Approx(1 / std::sqrt(6.0)).epsilon(1e-15));
  CHECK(c3(1, 1) == doctest::Approx(-2 / std::sqrt(6.0)).epsilon(1e-15));
  CHECK(c3(2, 1) == doctest::Approx(1 / std::sqrt(6.0)).epsilon(1e-15));

  auto c2 = poly_contrasts(2);
  CHECK(c2(0, 0) == doctest::Approx(-1 / std::sqrt(2.0)));
  CHECK(c2(1, 0) == doctest::Approx(1 / std::sqrt(2.0)));

  for (int k = 2; k <= 12; ++k) {
    auto c = poly_contrasts(k);
    CHECK((c.transpose() * c - Eigen::MatrixXd::Identity(k - 1, k - 1)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(c.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(poly_suffixes(6) == std::vector<std::string>{".L", ".Q", ".C", "^4", "^5"});
  CHECK_THROWS_AS(poly_contrasts(1), ConfigError);
}

TEST_CASE("nominal and ordinal encoders") {
  auto m = encode_nominal({"male", "female", "diverse", "female"}, {"male", "female", "diverse"}, "male");
  CHECK(m.cols() == 2);
  CHECK(m.row(0).sum() == 0);
  CHECK(m(1, 0) == 1);
  CHECK(m(2, 1) == 1);
  auto allref = encode_nominal({"male", "male"}, {"male", "female", "diverse"}, "male");
  CHECK(allref.isZero());
  CHECK(encode_nominal({"yes", "no"}, {"no", "yes"}, "no").cols() == 1);
  CHECK_THROWS_AS(encode_nominal({"other"}, {"male", "female"}, "male"), DataError);
  CHECK_THROWS_AS(encode_nominal({"male"}, {"male", "female"}, "x"), ConfigError);

  auto o = encode_ordinal({"low", "mid", "high"}, {"low", "mid", "high"});
  CHECK(o.cols() == 2);
  CHECK(o(2, 0) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK_THROWS_AS(encode_ordinal({"top"}, {"low", "high"}), DataError);

  auto e = nominal_encoding("gender", {"male", "female", "diverse"}, "male");
  CHECK(e.columns == std::vector<std::string>{"genderfemale", "genderdiverse"});
  CHECK(ordinal_encoding("age", {"a", "b", "c"}).columns == std::vector<std::string>{"age.L", "age.Q"});
}

TEST_CASE("design with two features and one binary characteristic") {
  auto ds = small_dataset();
  auto f = features_for({"i0", "i1", "i2", "i3"}, {"n_hedges", "ttr"}, 1);
  auto d = build_design(f, ds);
  CHECK(count_effects(d) == 5);
  CHECK(effect_formula(2, {1}) == 5);
  std::vector<std::string> names;
  for (const auto& c : d.columns) names.push_back(c.name);
  CHECK(names == std::vector<std::string>{"n_hedges", "ttr", "genderfemale", "genderfemale:n_hedges", "genderfemale:ttr"});
  CHECK(d.x.rows() == 12);
  CHECK(d.annotator_ids == std::vector<std::string>{"a1", "a2", "a3"});
  CHECK(d.dropped.empty());

  for (const auto& c : d.columns) {
    if (c.parents.size() != 2) continue;
    const auto prod = d.x.col(d.column(c.parents[0])).cwiseProduct(d.x.col(d.column(c.parents[1])));
    CHECK(d.x.col(d.column(c.name)) == prod);
  }
  for (Eigen::Index r = 0; r < d.x.rows(); ++r) {
    const auto& a = ds.annotations[static_cast<std::size_t>(r)];
    CHECK(d.y(r) == a.label);
    CHECK(d.annotator_ids[static_cast<std::size_t>(d.annotator[static_cast<std::size_t>(r)])] == a.annotator_id);
    CHECK(d.item_ids[static_cast<std::size_t>(d.item[static_cast<std::size_t>(r)])] == a.item_id);
  }

  auto no_chars = ds;
  no_chars.schema.characteristics.clear();
  CHECK(count_effects(build_design(f, no_chars)) == 2);

  lexfeat::FeatureMatrix empty;
  empty.item_ids = f.item_ids;
  empty.values.resize(4, 0);
  CHECK(count_effects(build_design(empty, no_chars)) == 0);
}

TEST_CASE("constant columns and their interactions are dropped") {
  auto ds = small_dataset();
  ds.schema.characteristics.push_back({"edu", CharType::ordinal, {"lo", "mid", "hi"}, "", {}});
  for (auto& a : ds.annotators) a.characteristics["edu"] = "mid";  // constant
  auto f = features_for({"i0", "i1", "i2", "i3"}, {"x"}, 2);
  auto d = build_design(f, ds);
  // edu.L is constant 0 and edu.Q constant: both dropped with every interaction
  CHECK(d.column("edu.L") < 0);
  CHECK(d.column("edu.Q") < 0);
  CHECK(d.column("genderfemale:edu.L") < 0);
  CHECK(count_effects(d) + d.dropped.size() == effect_formula(1, {1, 2}));
  CHECK(count_effects(d) == 3);
}

TEST_CASE("permuting annotation rows permutes design rows") {
  auto ds = small_dataset();
  auto f = features_for({"i0", "i1", "i2", "i3"}, {"x", "y"}, 3);
  auto d = build_design(f, ds);
  auto shuffled = ds;
  std::mt19937_64 rng(9);
  std::vector<std::size_t> perm(ds.annotations.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t k = 0; k < perm.size(); ++k) shuffled.annotations[k] = ds.annotations[perm[k]];
  auto p = build_design(f, shuffled);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    CHECK(p.x.row(static_cast<Eigen::Index>(k)) == d.x.row(static_cast<Eigen::Index>(perm[k])));
    CHECK(p.annotator[k] == d.annotator[perm[k]]);
    CHECK(p.item[k] == d.item[perm[k]]);
  }
}

TEST_CASE("design round trip and errors") {
  auto ds = small_dataset();
  ds.schema.characteristics.push_back({"care", CharType::interval, {}, "", {}});
  for (std::size_t k = 0; k < ds.annotators.size(); ++k) {
    ds.annotators[k].characteristics["care"] = std::to_string(1.5 + static_cast<double>(k));
  }
  auto f = features_for({"i0", "i1", "i2", "i3"}, {"x"}, 4);
  auto d = build_design(f, ds);
  CHECK(d.column("care") >= 0);
  CHECK(d.column("genderfemale:care") >= 0);
  CHECK(d.x(0, d.column("care")) == 1.5);  // passthrough

  annolens::testing::TempDir dir("design");
  write_design(d, dir.path().string());
  auto back = read_design(dir.path().string());
  CHECK(back.x == d.x);
  CHECK(back.y == d.y);
  CHECK(back.annotator == d.annotator);
  CHECK(back.encodings.size() == d.encodings.size());
  CHECK(back.encodings[0].codes == d.encodings[0].codes);
  CHECK(manifest_json(back).dump() == manifest_json(d).dump());

  auto missing = features_for({"i0", "i1"}, {"x"}, 5);
  CHECK_THROWS_AS(build_design(missing, ds), DataError);
}

TEST_CASE("effect count matches the closed form on random schemas") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    corpus::Dataset ds;
    std::uniform_int_distribution<int> n_chars(0, 4), n_levels(2, 5), type(0, 2), n_feat(0, 6);
    const int c = n_chars(rng);
    std::vector<std::size_t> widths;
    for (int k = 0; k < c; ++k) {
      const auto t = static_cast<CharType>(type(rng));
      const int lv = n_levels(rng);
      std::vector<std::string> levels;
      for (int l = 0; l < lv; ++l) levels.push_back("v" + std::to_string(l));
      ds.schema.characteristics.push_back(
          {"c" + std::to_string(k), t, t == CharType::interval ? std::vector<std::string>{} : levels,
           t == CharType::nominal ? "v0" : "", {}});
      widths.push_back(t == CharType::interval ? 1 : static_cast<std::size_t>(lv - 1));
    }
    // enough annotators that every pair of levels co-occurs
    std::uniform_real_distribution<double> u(0, 1);
    for (int a = 0; a < 400; ++a) {
      corpus::AnnotatorProfile p{"a" + std::to_string(a), {}};
      for (const auto& s : ds.schema.characteristics) {
        if (s.type == CharType::interval) {
          p.characteristics[s.name] = std::to_string(u(rng));
        } else {
          std::uniform_int_distribution<std::size_t> pick(0, s.levels.size() - 1);
          p.characteristics[s.name] = s.levels[pick(rng)];
        }
      }
      ds.annotators.push_back(std::move(p));
    }
    std::vector<std::string> items;
    for (int i = 0; i < 8; ++i) items.push_back("i" + std::to_string(i));
    for (const auto& a : ds.annotators) {
      for (const auto& i : items) ds.annotations.push_back({i, a.annotator_id, 3});
    }
    const int nf = n_feat(rng);
    std::vector<std::string> fnames;
    for (int j = 0; j < nf; ++j) fnames.push_back("f" + std::to_string(j));
    auto d = build_design(features_for(items, fnames, static_cast<std::uint64_t>(trial)), ds);
    CHECK(d.dropped.empty());
    CHECK(count_effects(d) == effect_formula(static_cast<std::size_t>(nf), widths));
  }
}
