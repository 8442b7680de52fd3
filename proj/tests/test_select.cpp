#include <algorithm>
#include <random>

#include "doctest.h"

#include "annolens/error.hpp"
#include "annolens/select.hpp"

using namespace annolens;
using namespace annolens::select;

namespace {

CorrelationMatrix make_corr(std::vector<std::string> names, std::initializer_list<std::tuple<int, int, double>> pairs) {
  CorrelationMatrix c;
  const auto n = static_cast<Eigen::Index>(names.size());
  c.names = std::move(names);
  c.r = Eigen::MatrixXd::Identity(n, n);
  for (auto [a, b, v] : pairs) c.r(a, b) = c.r(b, a) = v;
  return c;
}

lexfeat::FeatureMatrix matrix_of(const Eigen::MatrixXd& x, std::vector<std::string> names) {
  lexfeat::FeatureMatrix f;
  for (Eigen::Index i = 0; i < x.rows(); ++i) f.item_ids.push_back("i" + std::to_string(i));
  for (auto& n : names) f.columns.push_back({n, lexfeat::FeatureGroup::surface, false});
  f.values = x;
  f.state = lexfeat::MatrixState::standardized;
  return f;
}

}  // namespace

TEST_CASE("pearson correlation") {
  Eigen::MatrixXd x(3, 4);
  x << 1, 2, -1, 1,  //
      2, 4, -2, 3,   //
      3, 6, -3, 2;
  auto c = correlation_matrix(x, {"x", "2x", "-x", "y"});
  CHECK(c.r(0, 1) == doctest::Approx(1.0));
  CHECK(c.r(0, 2) == doctest::Approx(-1.0));
  CHECK(c.r(0, 3) == doctest::Approx(0.5));
  CHECK(c.r == c.r.transpose());
  CHECK(c.r.diagonal() == Eigen::VectorXd::Ones(4));
  CHECK_THROWS_AS(correlation_matrix(x.topRows(1), {"x", "2x", "-x", "y"}), DataError);
  Eigen::MatrixXd flat(3, 1);
  flat << 1, 1, 1;
  CHECK_THROWS_AS(correlation_matrix(flat, {"k"}), DataError);
}

TEST_CASE("threshold partition uses absolute correlation") {
  auto ortho = make_corr({"a", "b", "c"}, {{0, 1, 0.05}, {0, 2, -0.08}, {1, 2, 0.02}});
  auto p = partition_by_threshold(ortho);
  CHECK(p.independent.size() == 3);
  CHECK(p.clustered.empty());

  auto pair = make_corr({"a", "b", "c"}, {{0, 1, 0.9}, {0, 2, 0.0}, {1, 2, 0.1}});
  auto q = partition_by_threshold(pair);
  CHECK(q.independent == std::vector<std::string>{"c"});
  CHECK(q.clustered == std::vector<std::string>{"a", "b"});

  auto neg = make_corr({"a", "b"}, {{0, 1, -0.7}});
  CHECK(partition_by_threshold(neg).clustered.size() == 2);
  CHECK_THROWS_AS(partition_by_threshold(neg, 1.0), ConfigError);
}

TEST_CASE("single linkage") {
  auto ab = make_corr({"C", "A", "B"}, {{1, 2, 0.9}, {0, 1, 0.0}, {0, 2, 0.1}});
  auto r = single_linkage_clusters(ab);
  REQUIRE(r.clusters.size() == 2);
  CHECK(r.clusters[0].members == std::vector<std::string>{"A", "B"});
  CHECK(r.clusters[0].id == 1);
  CHECK(r.clusters[1].members == std::vector<std::string>{"C"});

  // A-B 0.8, B-C 0.8, A-C 0.1: merges (A,B) at 0.2 then C at 0.2 via B
  auto chain = make_corr({"A", "B", "C"}, {{0, 1, 0.8}, {1, 2, 0.8}, {0, 2, 0.1}});
  auto rc = single_linkage_clusters(chain);
  REQUIRE(rc.clusters.size() == 1);
  CHECK(rc.clusters[0].members == std::vector<std::string>{"A", "B", "C"});
  REQUIRE(rc.merges.size() == 2);
  CHECK(rc.merges[1].distance == doctest::Approx(0.2));

  auto loose = make_corr({"A", "B", "C"}, {{0, 1, 0.3}, {1, 2, 0.4}, {0, 2, 0.1}});
  CHECK(single_linkage_clusters(loose).clusters.size() == 3);
}

TEST_CASE("clustering does not depend on feature order") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(40, 8);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double f1 = z(rng), f2 = z(rng);
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = (j < 4 ? f1 : f2) * (0.5 + 0.1 * j) + z(rng) * 0.6;
  }
  std::vector<std::string> names{"h", "c", "a", "f", "b", "g", "e", "d"};
  auto base = build_report(correlation_matrix(x, names));

  std::vector<int> perm{5, 2, 7, 0, 3, 1, 6, 4};
  Eigen::MatrixXd xp(x.rows(), x.cols());
  std::vector<std::string> np;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    xp.col(static_cast<Eigen::Index>(k)) = x.col(perm[k]);
    np.push_back(names[static_cast<std::size_t>(perm[k])]);
  }
  auto other = build_report(correlation_matrix(xp, np));
  CHECK(format_report(base) == format_report(other));
  CHECK(report_to_json(base).dump() == report_to_json(other).dump());
}

TEST_CASE("picks and apply_selection") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 9);
  std::vector<std::string> names{"i1", "i2", "i3", "i4", "i5", "a", "b", "c", "d"};
  auto f = matrix_of(x, names);
  ClusterReport report;
  report.independent = {"i1", "i2", "i3", "i4", "i5"};
  report.clusters = {{1, {"a", "b"}, {}}, {2, {"c", "d"}, {}}};

  auto picks = parse_picks("cluster_id\tfeature\n# comment\n1\tb\n2\tc\n", "picks");
  auto sel = apply_selection(f, with_picks(report, picks));
  CHECK(sel.matrix.cols() == 7);
  CHECK(sel.matrix.names() == std::vector<std::string>{"i1", "i2", "i3", "i4", "i5", "b", "c"});
  REQUIRE(sel.dropped.size() == 2);
  CHECK(sel.dropped[0].feature == "a");
  CHECK(sel.dropped[0].representative == "b");

  CHECK_THROWS_AS(with_picks(report, parse_picks("1\tc\n2\tc\n", "p")), DataError);
  CHECK_THROWS_AS(with_picks(report, parse_picks("1\ta\n", "p")), DataError);
  CHECK_THROWS_AS(parse_picks("1\ta\n1\tb\n", "p"), DataError);
  CHECK_THROWS_AS(with_picks(report, parse_picks("1\ta\n2\tc\n3\tx\n", "p")), DataError);
  CHECK_THROWS_AS(apply_selection(f, report), DataError);
  try {
    with_picks(report, parse_picks("1\ta\n2\tb\n", "p"));
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("cluster 2") != std::string::npos);
  }

  auto back = report_from_json(nlohmann::json::parse(report_to_json(with_picks(report, picks)).dump()));
  CHECK(back.clusters[1].pick == std::optional<std::string>("c"));
}
