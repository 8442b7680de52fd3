#include <algorithm>
#include <set>

#include "doctest.h"

#include "annolens/corpus.hpp"
#include "annolens/error.hpp"
#include "test_support.hpp"

using namespace annolens;
using namespace annolens::corpus;

namespace {

Schema basic_schema() {
  Schema s;
  s.scale_size = 5;
  s.characteristics.push_back({"gender", CharType::nominal, {"male", "female", "diverse"}, "male", {}});
  s.characteristics.push_back({"age", CharType::ordinal, {"18-24", "25-29", "30-34"}, "", {}});
  return s;
}

AnnotatorProfile profile(std::string id, std::string gender, std::string age) {
  return {std::move(id), {{"gender", std::move(gender)}, {"age", std::move(age)}}};
}

Dataset grid_dataset(int n_items, const std::vector<std::string>& annotators) {
  Dataset ds;
  ds.schema = basic_schema();
  for (int i = 0; i < n_items; ++i) ds.items.push_back({"i" + std::to_string(i), "text " + std::to_string(i)});
  for (const auto& a : annotators) ds.annotators.push_back(profile(a, "female", "18-24"));
  for (int i = 0; i < n_items; ++i) {
    for (const auto& a : annotators) ds.annotations.push_back({"i" + std::to_string(i), a, 1 + i % 5});
  }
  return ds;
}

std::set<std::string> items_of(const Dataset& ds) {
  std::set<std::string> s;
  for (const auto& i : ds.items) s.insert(i.item_id);
  return s;
}

struct FixtureFiles {
  testing::TempDir dir{"corpus"};
  std::string annotations, profiles, items;
  FixtureFiles(std::string_view ann, std::string_view prof, std::string_view it) {
    annotations = dir.write("annotations.csv", ann);
    profiles = dir.write("profiles.csv", prof);
    items = dir.write("items.csv", it);
  }
};

constexpr std::string_view kProfiles =
    "annotator_id,gender,age\nA1,male,18-24\nA2,female,25-29\nA3,diverse,30-34\n";
constexpr std::string_view kItems = "item_id,text\nx1,\"Hello, world\"\nx2,\"She said \"\"no\"\"\"\nx3,plain\n";

}  // namespace

TEST_CASE("load_dataset accepts a minimal well-formed input") {
  FixtureFiles f("item_id,annotator_id,label\nx1,A1,3\nx2,A2,5\nx3,A3,1\n", kProfiles, kItems);
  const auto ds = load_dataset(f.annotations, f.profiles, f.items, basic_schema());
  CHECK(ds.annotations.size() == 3);
  CHECK(ds.items[0].text == "Hello, world");
  CHECK(ds.items[1].text == "She said \"no\"");
  CHECK_NOTHROW(check_integrity(ds));
  CHECK(schema_violations(ds).empty());
}

TEST_CASE("load_dataset rejects a label outside the scale and names the row") {
  FixtureFiles f("item_id,annotator_id,label\nx1,A1,3\nx2,A2,7\n", kProfiles, kItems);
  try {
    load_dataset(f.annotations, f.profiles, f.items, basic_schema());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":3:") != std::string::npos);
    CHECK(msg.find("label 7") != std::string::npos);
  }
}

TEST_CASE("load_dataset rejects dangling references, duplicates and malformed rows") {
  SUBCASE("unknown annotator") {
    FixtureFiles f("item_id,annotator_id,label\nx1,A9,3\n", kProfiles, kItems);
    CHECK_THROWS_AS(load_dataset(f.annotations, f.profiles, f.items, basic_schema()), DataError);
  }
  SUBCASE("duplicate pair") {
    FixtureFiles f("item_id,annotator_id,label\nx1,A1,3\nx1,A1,2\n", kProfiles, kItems);
    CHECK_THROWS_AS(load_dataset(f.annotations, f.profiles, f.items, basic_schema()), DataError);
  }
  SUBCASE("wrong field count carries the line number") {
    FixtureFiles f("item_id,annotator_id,label\nx1,A1\n", kProfiles, kItems);
    CHECK_THROWS_WITH_AS(load_dataset(f.annotations, f.profiles, f.items, basic_schema()),
                         doctest::Contains(":2:"), DataError);
  }
  SUBCASE("non-integer label") {
    FixtureFiles f("item_id,annotator_id,label\nx1,A1,2.5\n", kProfiles, kItems);
    CHECK_THROWS_AS(load_dataset(f.annotations, f.profiles, f.items, basic_schema()), DataError);
  }
  SUBCASE("blank item text") {
    FixtureFiles f("item_id,annotator_id,label\n", kProfiles, "item_id,text\nx1,\"   \"\n");
    CHECK_THROWS_AS(load_dataset(f.annotations, f.profiles, f.items, basic_schema()), DataError);
  }
}

TEST_CASE("drop_missing_and_pna") {
  Dataset ds = grid_dataset(3, {"A1", "A2", "A3"});
  ds.annotators[1].characteristics["gender"] = "Prefer not to answer";

  SUBCASE("PNA annotator and annotations removed") {
    const auto out = drop_missing_and_pna(ds, {"Prefer not to answer"});
    CHECK(annotator_ids(out) == std::set<std::string>{"A1", "A3"});
    CHECK(out.annotations.size() == 6);
    CHECK(out.items.size() == 3);
    CHECK(std::none_of(out.annotations.begin(), out.annotations.end(),
                       [](const auto& r) { return r.annotator_id == "A2"; }));
  }
  SUBCASE("missing value also removes") {
    ds.annotators[1].characteristics["gender"] = "female";
    ds.annotators[2].characteristics["age"] = "";
    const auto out = drop_missing_and_pna(ds, {"Prefer not to answer"});
    CHECK(annotator_ids(out) == std::set<std::string>{"A1", "A2"});
  }
  SUBCASE("no missing values is the identity") {
    ds.annotators[1].characteristics["gender"] = "female";
    const auto out = drop_missing_and_pna(ds, {"Prefer not to answer"});
    CHECK(out.annotations.size() == ds.annotations.size());
    CHECK(out.annotators == ds.annotators);
  }
  SUBCASE("all annotators PNA leaves no annotations") {
    for (auto& a : ds.annotators) a.characteristics["gender"] = "prefer NOT to answer";
    const auto out = drop_missing_and_pna(ds, {"Prefer not to answer"});
    CHECK(out.annotations.empty());
    CHECK(out.annotators.empty());
  }
}

TEST_CASE("drop_conflicting_annotators") {
  Dataset ds = grid_dataset(2, {"A1", "A2", "A3"});
  ds.annotators.push_back(profile("A1", "female", "30-34"));  // conflicts on age
  ds.annotators.push_back(profile("A2", "female", "18-24"));  // identical repeat
  const auto out = drop_conflicting_annotators(ds);
  CHECK(annotator_ids(out) == std::set<std::string>{"A2", "A3"});
  CHECK(out.annotators.size() == 2);
  CHECK(out.annotations.size() == 4);

  const auto clean = grid_dataset(2, {"A1", "A2"});
  CHECK(drop_conflicting_annotators(clean).annotators == clean.annotators);
}

TEST_CASE("filter_by_participation at the default thresholds") {
  // A, B, C label items i1..i11; D labels 9 items including i0; i0 is also
  // labelled by A and B only.
  Dataset ds;
  ds.schema = basic_schema();
  for (int i = 0; i < 12; ++i) ds.items.push_back({"i" + std::to_string(i), "t"});
  for (auto id : {"A", "B", "C", "D"}) ds.annotators.push_back(profile(id, "male", "18-24"));
  for (int i = 1; i < 12; ++i) {
    for (auto id : {"A", "B", "C"}) ds.annotations.push_back({"i" + std::to_string(i), id, 2});
  }
  ds.annotations.push_back({"i0", "A", 1});
  ds.annotations.push_back({"i0", "B", 1});
  for (int i = 0; i < 9; ++i) ds.annotations.push_back({"i" + std::to_string(i), "D", 3});

  const auto out = filter_by_participation(ds);
  CHECK(annotator_ids(out) == std::set<std::string>{"A", "B", "C"});
  CHECK_FALSE(items_of(out).contains("i0"));
  CHECK(out.items.size() == 11);
  CHECK(out.annotations.size() == 33);
}

TEST_CASE("filter_by_participation two-stage pass on a 5-item fixture") {
  // Thresholds (3 items per annotator, 2 annotators per item).
  //   P: i1 i2 i3 i4   (4) kept
  //   Q: i1 i2 i3      (3) kept
  //   R: i4 i5         (2) removed in stage 1
  //   S: i2 i5 i3      (3) kept
  // Stage 2 counts over P, Q, S: i1=2 i2=3 i3=3 i4=1 i5=1 -> i4, i5 removed.
  // S is left with 2 annotations after stage 2 and stays: no second pass.
  Dataset ds;
  ds.schema = basic_schema();
  for (int i = 1; i <= 5; ++i) ds.items.push_back({"i" + std::to_string(i), "t"});
  for (auto id : {"P", "Q", "R", "S"}) ds.annotators.push_back(profile(id, "male", "18-24"));
  auto add = [&](std::string a, std::vector<int> items) {
    for (int i : items) ds.annotations.push_back({"i" + std::to_string(i), a, 1});
  };
  add("P", {1, 2, 3, 4});
  add("Q", {1, 2, 3});
  add("R", {4, 5});
  add("S", {2, 5, 3});

  const auto out = filter_by_participation(ds, 3, 2);
  CHECK(annotator_ids(out) == std::set<std::string>{"P", "Q", "S"});
  CHECK(items_of(out) == std::set<std::string>{"i1", "i2", "i3"});
  CHECK(out.annotations.size() == 8);

  SUBCASE("vacuous thresholds are the identity") {
    const auto same = filter_by_participation(ds, 1, 1);
    CHECK(same.annotations.size() == ds.annotations.size());
    CHECK(same.items.size() == ds.items.size());
  }
}

TEST_CASE("filter_by_participation keeps a fully compliant fixture") {
  const auto ds = grid_dataset(10, {"A1", "A2", "A3"});
  const auto out = filter_by_participation(ds, 10, 3);
  CHECK(out.annotations.size() == 30);
  CHECK(out.items.size() == 10);
}

TEST_CASE("recode") {
  Dataset ds;
  ds.schema.characteristics.push_back({"race", CharType::nominal, {}, "White", {}});
  ds.schema.characteristics.push_back({"education", CharType::ordinal, {"ISCED 3", "ISCED 6"}, "", {}});
  ds.items.push_back({"i1", "t"});
  auto add = [&](std::string id, std::string race, std::string edu) {
    ds.annotators.push_back({id, {{"race", race}, {"education", edu}}});
    ds.annotations.push_back({"i1", id, 2});
  };
  add("a1", "White;Asian;Black", "High school");
  add("a2", "Asian, White", "Bachelor's degree");
  add("a3", "White", "High school");
  add("a4", "Black;White", "High school");
  add("a5", "Black;Native", "High school");

  RecodeMap race{.characteristic = "race", .mapping = {}, .exhaustive = false,
                 .catch_all = "multiracial", .keep = {"Asian;White", "Black;White"}};
  RecodeMap edu{.characteristic = "education",
                .mapping = {{"High school", "ISCED 3"}, {"Bachelor's degree", "ISCED 6"}},
                .exhaustive = true, .catch_all = std::nullopt, .keep = {}};
  const auto out = recode(ds, {race, edu});
  REQUIRE(out.annotators.size() == 5);
  CHECK(out.annotators[0].characteristics.at("race") == "multiracial");
  CHECK(out.annotators[1].characteristics.at("race") == "Asian;White");
  CHECK(out.annotators[2].characteristics.at("race") == "White");
  CHECK(out.annotators[3].characteristics.at("race") == "Black;White");
  CHECK(out.annotators[4].characteristics.at("race") == "multiracial");
  CHECK(out.annotators[0].characteristics.at("education") == "ISCED 3");
  CHECK(out.annotators[1].characteristics.at("education") == "ISCED 6");
  CHECK(out.annotations.size() == ds.annotations.size());

  SUBCASE("empty map set is the identity") {
    CHECK(recode(ds, {}).annotators == ds.annotators);
  }
  SUBCASE("exhaustive map lists unmapped values") {
    ds.annotators[2].characteristics["education"] = "Doctorate";
    CHECK_THROWS_WITH_AS(recode(ds, {edu}), doctest::Contains("Doctorate"), DataError);
  }
  SUBCASE("DROP removes the annotator") {
    RecodeMap drop{.characteristic = "race", .mapping = {{"White", std::string(kDrop)}},
                   .exhaustive = false, .catch_all = std::nullopt, .keep = {}};
    const auto dropped = recode(ds, {drop});
    CHECK_FALSE(annotator_ids(dropped).contains("a3"));
    CHECK(dropped.annotations.size() == 4);
  }
  SUBCASE("top pairs feed the keep list") {
    const auto top = top_multi_combinations(ds, "race", 2, 5);
    CHECK(top == std::vector<std::string>{"Asian;White", "Black;Native", "Black;White"});
  }
}

TEST_CASE("load_recode_maps reads directives") {
  testing::TempDir dir("recode");
  const auto path = dir.write("recode.csv",
                              "characteristic,raw,harmonized\n"
                              "gender,Man,male\ngender,Woman,female\ngender,Non-binary,diverse\n"
                              "gender,@exhaustive,\nrace,@catch_all,multiracial\nrace,@keep,\"White;Asian\"\n");
  const auto maps = load_recode_maps(path);
  REQUIRE(maps.size() == 2);
  CHECK(maps[0].exhaustive);
  CHECK(maps[0].mapping.at("Woman") == "female");
  CHECK(maps[1].catch_all == "multiracial");
  CHECK(maps[1].keep.contains("White;Asian"));
}

TEST_CASE("drop_multi_membership") {
  Dataset ds;
  ds.schema.characteristics.push_back({"religion", CharType::nominal, {}, "Christian", {}});
  ds.schema.characteristics.push_back({"sexuality", CharType::nominal, {}, "straight", {}});
  ds.items.push_back({"i1", "t"});
  ds.annotators.push_back({"a1", {{"religion", "Buddhist, Christian and Atheist"}, {"sexuality", "straight"}}});
  ds.annotators.push_back({"a2", {{"religion", "Christian"}, {"sexuality", "bisexual;straight"}}});
  ds.annotators.push_back({"a3", {{"religion", "Atheist"}, {"sexuality", "gay"}}});
  for (auto id : {"a1", "a2", "a3"}) ds.annotations.push_back({"i1", id, 1});

  CHECK(annotator_ids(drop_multi_membership(ds, "religion")) == std::set<std::string>{"a2", "a3"});
  CHECK(annotator_ids(drop_multi_membership(ds, "sexuality")) == std::set<std::string>{"a1", "a3"});
  const auto both = drop_multi_membership(drop_multi_membership(ds, "religion"), "sexuality");
  CHECK(annotator_ids(both) == std::set<std::string>{"a3"});
  CHECK(both.annotations.size() == 1);
}

TEST_CASE("summarize") {
  const auto s = summarize(grid_dataset(4, {"A1", "A2", "A3"}));
  CHECK(s.items == 4);
  CHECK(s.annotations == 12);
  CHECK(s.annotators == 3);
  CHECK(s.mean_annotators_per_item == doctest::Approx(3.0));
  CHECK(s.sd_annotators_per_item == 0.0);

  const auto empty = summarize(Dataset{});
  CHECK(empty.items == 0);
  CHECK(empty.mean_annotators_per_item == 0.0);
  CHECK(empty.sd_annotators_per_item == 0.0);

  // population sd: counts {3, 1} -> mean 2, sd 1
  auto uneven = grid_dataset(2, {"A1", "A2", "A3"});
  uneven.annotations.erase(std::remove_if(uneven.annotations.begin(), uneven.annotations.end(),
                                          [](const auto& r) { return r.item_id == "i1" && r.annotator_id != "A1"; }),
                           uneven.annotations.end());
  const auto u = summarize(uneven);
  CHECK(u.mean_annotators_per_item == doctest::Approx(2.0));
  CHECK(u.sd_annotators_per_item == doctest::Approx(1.0));
}

TEST_CASE("split_annotators") {
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("a" + std::to_string(i));
  const auto ds = grid_dataset(3, ids);

  const auto [first, second] = split_annotators(ds, 0.5, 7);
  CHECK(annotator_ids(first).size() == 50);
  CHECK(annotator_ids(second).size() == 50);
  std::set<std::string> both = annotator_ids(first);
  for (const auto& id : annotator_ids(second)) CHECK(both.insert(id).second);
  CHECK(both == annotator_ids(ds));
  CHECK(first.annotations.size() + second.annotations.size() == ds.annotations.size());
  CHECK(first.items.size() == 3);
  CHECK(second.items.size() == 3);

  const auto [again, _] = split_annotators(ds, 0.5, 7);
  CHECK(annotator_ids(again) == annotator_ids(first));

  const auto small = grid_dataset(2, {"x", "y", "z"});
  const auto [s1, s2] = split_annotators(small, 0.5, 1);
  CHECK(annotator_ids(s1).size() == 1);  // floor(1.5)
  CHECK(annotator_ids(s2).size() == 2);

  CHECK_THROWS_AS(split_annotators(ds, 1.0, 1), ConfigError);
}

TEST_CASE("batch_subsets") {
  Dataset ds;
  ds.schema = basic_schema();
  for (auto id : {"a", "b", "c", "d"}) ds.annotators.push_back(profile(id, "male", "18-24"));
  for (int i = 0; i < 600; ++i) {
    const auto item = "i" + std::to_string(i);
    ds.items.push_back({item, "t"});
    const bool first = i < 300;
    ds.annotations.push_back({item, first ? "a" : "c", 1});
    ds.annotations.push_back({item, first ? "b" : "d", 1});
  }

  SUBCASE("two signatures of 300 pack exactly") {
    const auto result = batch_subsets(ds, 300, 2, 3);
    REQUIRE(result.subsets.size() == 2);
    CHECK(result.warnings.empty());
    for (const auto& s : result.subsets) {
      CHECK(s.items.size() == 300);
      CHECK(annotator_ids(s).size() == 2);
      CHECK(s.annotations.size() == 600);
    }
  }
  SUBCASE("three subsets of 300 from larger signature groups") {
    Dataset big = ds;
    for (int i = 600; i < 900; ++i) {
      const auto item = "i" + std::to_string(i);
      big.items.push_back({item, "t"});
      big.annotations.push_back({item, "a", 1});
      big.annotations.push_back({item, "b", 1});
    }
    const auto result = batch_subsets(big, 300, 3, 11);
    REQUIRE(result.subsets.size() == 3);
    for (const auto& s : result.subsets) CHECK(s.items.size() == 300);
    const auto again = batch_subsets(big, 300, 3, 11);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(items_of(again.subsets[k]) == items_of(result.subsets[k]));
    }
  }
  SUBCASE("a single small signature yields one subset and a warning") {
    Dataset small;
    small.schema = basic_schema();
    small.annotators.push_back(profile("a", "male", "18-24"));
    for (int i = 0; i < 10; ++i) {
      small.items.push_back({"s" + std::to_string(i), "t"});
      small.annotations.push_back({"s" + std::to_string(i), "a", 1});
    }
    const auto result = batch_subsets(small, 300, 1, 5);
    REQUIRE(result.subsets.size() == 1);
    CHECK(result.subsets[0].items.size() == 10);
    CHECK_FALSE(result.warnings.empty());
  }
}

TEST_CASE("corpus operations keep referential integrity and are pure") {
  auto ds = grid_dataset(12, {"a", "b", "c", "d", "e"});
  ds.annotators[0].characteristics["gender"] = "Prefer not to answer";
  const auto a = filter_by_participation(drop_missing_and_pna(ds, {"Prefer not to answer"}), 10, 3);
  const auto b = filter_by_participation(drop_missing_and_pna(ds, {"Prefer not to answer"}), 10, 3);
  CHECK_NOTHROW(check_integrity(a));
  CHECK(a.annotators == b.annotators);
  CHECK(a.annotations.size() == b.annotations.size());

  testing::TempDir dir("roundtrip");
  write_dataset(a, dir.path().string());
  const auto back = read_dataset_dir(dir.path().string());
  CHECK(back.annotators == a.annotators);
  CHECK(back.annotations.size() == a.annotations.size());
}

TEST_CASE("schema parsing validates declarations") {
  CHECK_THROWS_AS(schema_from_json(nlohmann::json::parse(
                      R"({"characteristics":[{"name":"g","type":"nominal","levels":["a"],"reference":"b"}]})")),
                  ConfigError);
  CHECK_THROWS_AS(schema_from_json(nlohmann::json::parse(
                      R"({"characteristics":[{"name":"age","type":"ordinal","levels":["x"]}]})")),
                  ConfigError);
  const auto s = schema_from_json(nlohmann::json::parse(
      R"({"scale_size":3,"characteristics":[{"name":"care","type":"interval"}]})"));
  CHECK(s.scale_size == 3);
  CHECK(s.characteristics[0].type == CharType::interval);
}
