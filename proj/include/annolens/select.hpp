#pragma once

// Correlation-threshold retention and single-linkage clustering of the
// remaining features. Representatives are picked by hand via a picks file.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "annolens/feature_matrix.hpp"
#include "json.hpp"

namespace annolens::select {

struct CorrelationMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd r;

  Eigen::Index index(std::string_view name) const;
  CorrelationMatrix subset(const std::vector<std::string>& keep) const;
};

/// Pearson r for every column pair of an items x features matrix.
CorrelationMatrix correlation_matrix(const Eigen::MatrixXd& x, std::vector<std::string> names, unsigned jobs = 1);
CorrelationMatrix correlation_matrix(const lexfeat::FeatureMatrix& f, unsigned jobs = 1);

struct Partition {
  std::vector<std::string> independent;
  std::vector<std::string> clustered;
};

/// Independent: max |r| to every other feature < threshold.
Partition partition_by_threshold(const CorrelationMatrix& c, double threshold = 0.5);

struct Cluster {
  int id = 0;  ///< 1-based
  std::vector<std::string> members;
  std::optional<std::string> pick;
};

struct Merge {
  std::string left;  ///< smallest member of each side
  std::string right;
  double distance = 0.0;
};

struct ClusterReport {
  double threshold = 0.5;
  double cut_distance = 0.5;
  std::vector<std::string> independent;
  std::vector<Cluster> clusters;
  /// Agglomeration steps at or below the cut, in merge order.
  std::vector<Merge> merges;
};

/// Agglomerative single linkage on d = 1 - |r|, cut at `cut_distance`
/// (merges with d <= cut). Clusters are ordered by their smallest member.
ClusterReport single_linkage_clusters(const CorrelationMatrix& sub, double cut_distance = 0.5);

/// Threshold partition followed by clustering of the correlated remainder.
ClusterReport build_report(const CorrelationMatrix& c, double threshold = 0.5, double cut_distance = 0.5);

std::string format_report(const ClusterReport& report);
nlohmann::ordered_json report_to_json(const ClusterReport& report);
ClusterReport report_from_json(const nlohmann::json& j);

/// `cluster_id<TAB>feature` rows; '#' starts a comment.
std::map<int, std::string> parse_picks(std::string_view text, std::string_view source);
std::map<int, std::string> load_picks(const std::string& path);
/// Comment-only template listing each cluster's members.
std::string picks_template(const ClusterReport& report);

/// Validates and records one pick per cluster.
ClusterReport with_picks(const ClusterReport& report, const std::map<int, std::string>& picks);

struct DroppedFeature {
  std::string feature;
  int cluster_id = 0;
  std::string representative;
};

struct Selection {
  lexfeat::FeatureMatrix matrix;
  std::vector<DroppedFeature> dropped;
};

/// Keeps independent features and cluster picks, in the column order of `f`.
Selection apply_selection(const lexfeat::FeatureMatrix& f, const ClusterReport& report);

}  // namespace annolens::select
