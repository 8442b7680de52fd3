#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "annolens/features.hpp"
#include "annolens/tokenize.hpp"

namespace annolens::lexfeat {

enum class MatrixState { raw, token_normalized, standardized };

std::string_view to_string(MatrixState s);
MatrixState matrix_state_from_string(std::string_view s);

struct ColumnInfo {
  std::string name;
  FeatureGroup group = FeatureGroup::surface;
  bool is_count = false;
  /// Location and scale removed by standardize(), in token-normalized units.
  double mean = 0.0;
  double sd = 1.0;
};

struct FeatureMatrix {
  std::vector<std::string> item_ids;
  std::vector<ColumnInfo> columns;
  Eigen::MatrixXd values;  ///< items x columns
  MatrixState state = MatrixState::raw;
  /// Constant columns removed by standardize().
  std::vector<std::string> dropped;
  std::map<std::string, std::vector<std::string>> item_flags;

  Eigen::Index cols() const { return static_cast<Eigen::Index>(columns.size()); }
  Eigen::Index rows() const { return static_cast<Eigen::Index>(item_ids.size()); }
  /// -1 when absent.
  Eigen::Index column(std::string_view name) const;
  std::vector<std::string> names() const;
};

/// Columns sorted by (group, name). Dynamic columns missing from a row are
/// zero; a group present for some items but not others is a DataError.
FeatureMatrix assemble(const std::vector<std::string>& item_ids, const std::vector<NamedFeatures>& rows);

/// Per-item extraction, run over `jobs` threads.
FeatureMatrix extract_features(const std::vector<TokenizedItem>& items, const FeatureResources& res,
                               unsigned jobs = 1);

/// Divides the named columns by n_tokens (word tokens).
FeatureMatrix normalize_counts(const FeatureMatrix& f, const std::set<std::string>& count_features);
/// Uses the is_count flag of each column.
FeatureMatrix normalize_counts(const FeatureMatrix& f);

/// Population z-scores. Constant columns are dropped and listed in `dropped`.
FeatureMatrix standardize(const FeatureMatrix& f);

FeatureMatrix select_columns(const FeatureMatrix& f, const std::vector<std::string>& names);

/// `path` gets the values; `path + ".json"` the state and column metadata.
void write_feature_matrix(const FeatureMatrix& f, const std::string& path);
FeatureMatrix read_feature_matrix(const std::string& path);

}  // namespace annolens::lexfeat
