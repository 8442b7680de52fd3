#include "annolens/select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "annolens/csv.hpp"
#include "annolens/error.hpp"
#include "annolens/util.hpp"

namespace annolens::select {

Eigen::Index CorrelationMatrix::index(std::string_view name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<Eigen::Index>(it - names.begin());
}

CorrelationMatrix CorrelationMatrix::subset(const std::vector<std::string>& keep) const {
  CorrelationMatrix out;
  out.names = keep;
  std::vector<Eigen::Index> idx;
  for (const auto& k : keep) {
    const auto i = index(k);
    if (i < 0) throw DataError(fmt::format("feature '{}' not in correlation matrix", k));
    idx.push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(idx.size());
  out.r.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) out.r(a, b) = r(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
  }
  return out;
}

CorrelationMatrix correlation_matrix(const Eigen::MatrixXd& x, std::vector<std::string> names, unsigned jobs) {
  if (x.rows() < 2) throw DataError("correlation needs at least 2 items");
  if (static_cast<std::size_t>(x.cols()) != names.size()) throw DataError("correlation: name count mismatch");
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  Eigen::VectorXd norm = xc.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!(norm(j) > 0)) {
      throw DataError(fmt::format("feature '{}' has zero variance; drop it before correlating",
                                  names[static_cast<std::size_t>(j)]));
    }
  }
  const auto p = x.cols();
  CorrelationMatrix c;
  c.names = std::move(names);
  c.r = Eigen::MatrixXd::Identity(p, p);

  auto rows = [&](Eigen::Index first, Eigen::Index step) {
    for (Eigen::Index i = first; i < p; i += step) {
      for (Eigen::Index j = i + 1; j < p; ++j) {
        const double v = std::clamp(xc.col(i).dot(xc.col(j)) / (norm(i) * norm(j)), -1.0, 1.0);
        c.r(i, j) = v;
        c.r(j, i) = v;
      }
    }
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1 || p < 64) {
    rows(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(rows, static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(jobs));
    for (auto& t : pool) t.join();
  }
  return c;
}

CorrelationMatrix correlation_matrix(const lexfeat::FeatureMatrix& f, unsigned jobs) {
  return correlation_matrix(f.values, f.names(), jobs);
}

Partition partition_by_threshold(const CorrelationMatrix& c, double threshold) {
  if (!(threshold > 0 && threshold < 1)) throw ConfigError(fmt::format("threshold {} not in (0, 1)", threshold));
  Partition out;
  const auto p = c.r.rows();
  for (Eigen::Index i = 0; i < p; ++i) {
    double max_abs = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (i != j) max_abs = std::max(max_abs, std::abs(c.r(i, j)));
    }
    (max_abs < threshold ? out.independent : out.clustered).push_back(c.names[static_cast<std::size_t>(i)]);
  }
  std::sort(out.independent.begin(), out.independent.end());
  std::sort(out.clustered.begin(), out.clustered.end());
  return out;
}

ClusterReport single_linkage_clusters(const CorrelationMatrix& sub, double cut_distance) {
  // Work on name-sorted features so the result does not depend on input order.
  std::vector<std::size_t> order(sub.names.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return sub.names[a] < sub.names[b]; });
  const auto n = order.size();

  std::vector<std::vector<std::size_t>> groups(n);  // positions into `order`
  for (std::size_t k = 0; k < n; ++k) groups[k] = {k};
  Eigen::MatrixXd d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          1.0 - std::abs(sub.r(static_cast<Eigen::Index>(order[a]), static_cast<Eigen::Index>(order[b])));
    }
  }

  ClusterReport report;
  report.cut_distance = cut_distance;
  std::vector<bool> alive(n, true);
  std::size_t remaining = n;
  while (remaining > 1) {
    // closest pair of live groups; first in index order on ties
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!alive[b]) continue;
        const double v = d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        if (v < best) {
          best = v;
          ba = a;
          bb = b;
        }
      }
    }
    if (best > cut_distance) break;
    report.merges.push_back({sub.names[order[groups[ba].front()]], sub.names[order[groups[bb].front()]], best});
    groups[ba].insert(groups[ba].end(), groups[bb].begin(), groups[bb].end());
    std::sort(groups[ba].begin(), groups[ba].end());
    groups[bb].clear();
    alive[bb] = false;
    --remaining;
    for (std::size_t k = 0; k < n; ++k) {
      const auto a = static_cast<Eigen::Index>(ba), b = static_cast<Eigen::Index>(bb), kk = static_cast<Eigen::Index>(k);
      d(a, kk) = d(kk, a) = std::min(d(a, kk), d(b, kk));
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (!alive[k]) continue;
    Cluster c;
    for (auto pos : groups[k]) c.members.push_back(sub.names[order[pos]]);
    std::sort(c.members.begin(), c.members.end());
    report.clusters.push_back(std::move(c));
  }
  std::sort(report.clusters.begin(), report.clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.members.front() < b.members.front(); });
  for (std::size_t k = 0; k < report.clusters.size(); ++k) report.clusters[k].id = static_cast<int>(k) + 1;
  return report;
}

ClusterReport build_report(const CorrelationMatrix& c, double threshold, double cut_distance) {
  const auto part = partition_by_threshold(c, threshold);
  ClusterReport report;
  if (!part.clustered.empty()) report = single_linkage_clusters(c.subset(part.clustered), cut_distance);
  report.threshold = threshold;
  report.cut_distance = cut_distance;
  report.independent = part.independent;
  return report;
}

std::string format_report(const ClusterReport& report) {
  std::string out;
  out += fmt::format("retention threshold |r| < {}\n", format_number(report.threshold));
  out += fmt::format("single-linkage cut distance (1 - |r|) <= {}\n\n", format_number(report.cut_distance));
  out += fmt::format("independent features ({}):\n", report.independent.size());
  for (const auto& f : report.independent) out += "  " + f + "\n";
  std::size_t clustered = 0;
  for (const auto& c : report.clusters) clustered += c.members.size();
  out += fmt::format("\nclusters ({}, {} features):\n", report.clusters.size(), clustered);
  for (const auto& c : report.clusters) {
    out += fmt::format("cluster {} ({} members){}\n", c.id, c.members.size(),
                       c.pick ? " pick: " + *c.pick : std::string());
    for (const auto& m : c.members) out += "  " + m + "\n";
  }
  return out;
}

nlohmann::ordered_json report_to_json(const ClusterReport& report) {
  nlohmann::ordered_json j;
  j["threshold"] = report.threshold;
  j["cut_distance"] = report.cut_distance;
  j["independent"] = report.independent;
  auto& cl = j["clusters"] = nlohmann::ordered_json::array();
  for (const auto& c : report.clusters) {
    nlohmann::ordered_json e;
    e["id"] = c.id;
    e["members"] = c.members;
    e["pick"] = c.pick ? nlohmann::ordered_json(*c.pick) : nlohmann::ordered_json(nullptr);
    cl.push_back(std::move(e));
  }
  auto& mg = j["merges"] = nlohmann::ordered_json::array();
  for (const auto& m : report.merges) mg.push_back({{"left", m.left}, {"right", m.right}, {"distance", m.distance}});
  return j;
}

ClusterReport report_from_json(const nlohmann::json& j) {
  ClusterReport r;
  try {
    r.threshold = j.at("threshold").get<double>();
    r.cut_distance = j.at("cut_distance").get<double>();
    r.independent = j.at("independent").get<std::vector<std::string>>();
    for (const auto& c : j.at("clusters")) {
      Cluster cl;
      cl.id = c.at("id").get<int>();
      cl.members = c.at("members").get<std::vector<std::string>>();
      if (!c.at("pick").is_null()) cl.pick = c.at("pick").get<std::string>();
      r.clusters.push_back(std::move(cl));
    }
    for (const auto& m : j.at("merges")) {
      r.merges.push_back({m.at("left").get<std::string>(), m.at("right").get<std::string>(),
                          m.at("distance").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("cluster report: {}", e.what()));
  }
  return r;
}

std::map<int, std::string> parse_picks(std::string_view text, std::string_view source) {
  std::map<int, std::string> picks;
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw DataError(fmt::format("{}:{}: expected cluster_id<TAB>feature", source, line_no));
    }
    const auto id_text = trim(line.substr(0, tab));
    const auto feature = std::string(trim(line.substr(tab + 1)));
    if (id_text == "cluster_id") continue;  // header
    const auto id_value = parse_number(id_text, fmt::format("{}:{}", source, line_no));
    if (id_value != std::floor(id_value) || id_value < 1) {
      throw DataError(fmt::format("{}:{}: bad cluster id '{}'", source, line_no, id_text));
    }
    const auto id = static_cast<int>(id_value);
    if (!picks.emplace(id, feature).second) {
      throw DataError(fmt::format("{}:{}: duplicate pick for cluster {}", source, line_no, id));
    }
  }
  return picks;
}

std::map<int, std::string> load_picks(const std::string& path) { return parse_picks(csv::read_text(path), path); }

std::string picks_template(const ClusterReport& report) {
  std::string out = "# cluster_id<TAB>feature: one representative per cluster\n";
  for (const auto& c : report.clusters) {
    out += fmt::format("# {}:", c.id);
    for (const auto& m : c.members) out += " " + m;
    out += "\n";
  }
  return out;
}

ClusterReport with_picks(const ClusterReport& report, const std::map<int, std::string>& picks) {
  ClusterReport out = report;
  std::set<int> known;
  for (auto& c : out.clusters) {
    known.insert(c.id);
    const auto it = picks.find(c.id);
    if (it == picks.end()) throw DataError(fmt::format("cluster {} has no pick", c.id));
    if (std::find(c.members.begin(), c.members.end(), it->second) == c.members.end()) {
      throw DataError(fmt::format("pick '{}' is not a member of cluster {}", it->second, c.id));
    }
    c.pick = it->second;
  }
  for (const auto& [id, f] : picks) {
    if (!known.count(id)) throw DataError(fmt::format("pick '{}' names unknown cluster {}", f, id));
  }
  return out;
}

Selection apply_selection(const lexfeat::FeatureMatrix& f, const ClusterReport& report) {
  std::set<std::string> keep(report.independent.begin(), report.independent.end());
  Selection sel;
  for (const auto& c : report.clusters) {
    if (!c.pick) throw DataError(fmt::format("cluster {} has no pick", c.id));
    if (std::find(c.members.begin(), c.members.end(), *c.pick) == c.members.end()) {
      throw DataError(fmt::format("pick '{}' is not a member of cluster {}", *c.pick, c.id));
    }
    if (!keep.insert(*c.pick).second) {
      throw DataError(fmt::format("feature '{}' picked twice (cluster {})", *c.pick, c.id));
    }
    for (const auto& m : c.members) {
      if (m != *c.pick) sel.dropped.push_back({m, c.id, *c.pick});
    }
  }
  std::vector<std::string> names;
  for (const auto& col : f.columns) {
    if (keep.count(col.name)) names.push_back(col.name);
  }
  if (names.size() != keep.size()) {
    for (const auto& k : keep) {
      if (f.column(k) < 0) throw DataError(fmt::format("selected feature '{}' not in feature matrix", k));
    }
  }
  for (const auto& d : sel.dropped) {
    spdlog::debug("dropped {} (cluster {}, represented by {})", d.feature, d.cluster_id, d.representative);
  }
  sel.matrix = lexfeat::select_columns(f, names);
  return sel;
}

}  // namespace annolens::select
