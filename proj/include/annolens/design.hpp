#pragma once

// Fixed-effect design y ~ L + S + S:S + L:S with annotator and item groups.

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "annolens/corpus.hpp"
#include "annolens/feature_matrix.hpp"
#include "json.hpp"

namespace annolens::design {

enum class Origin { intercept, L, S, SS, LS };

std::string_view to_string(Origin o);
Origin origin_from_string(std::string_view s);

/// Orthonormal polynomial contrasts for k equally spaced levels: k x (k-1),
/// columns .L, .Q, .C, ^4, ...
Eigen::MatrixXd poly_contrasts(int k);
std::vector<std::string> poly_suffixes(int k);

/// How one annotator characteristic maps to design columns.
struct Encoding {
  std::string name;
  corpus::CharType type = corpus::CharType::nominal;
  std::vector<std::string> levels;  ///< empty for interval
  std::string reference;            ///< nominal only
  std::vector<std::string> columns;
  Eigen::MatrixXd codes;  ///< levels x columns (nominal / ordinal)

  /// Encoded row for one raw value; throws DataError on unseen levels.
  Eigen::RowVectorXd encode(std::string_view value) const;
  Eigen::Index width() const { return static_cast<Eigen::Index>(columns.size()); }
};

Encoding nominal_encoding(std::string name, std::vector<std::string> levels, std::string reference);
Encoding ordinal_encoding(std::string name, std::vector<std::string> ordered_levels);
Encoding interval_encoding(std::string name);

/// Treatment coding: one 0/1 column per non-reference level.
Eigen::MatrixXd encode_nominal(const std::vector<std::string>& values, const std::vector<std::string>& levels,
                               const std::string& reference);
Eigen::MatrixXd encode_ordinal(const std::vector<std::string>& values, const std::vector<std::string>& ordered_levels);

/// Encodings for every schema characteristic, in schema order. Nominal
/// characteristics without declared levels use the sorted observed values.
std::vector<Encoding> encodings_for(const corpus::Dataset& ds);

struct ColumnSpec {
  std::string name;
  Origin origin = Origin::L;
  std::vector<std::string> parents;
};

struct DesignMatrix {
  Eigen::MatrixXd x;  ///< annotations x fixed-effect columns, no intercept
  Eigen::VectorXd y;
  std::vector<ColumnSpec> columns;
  std::vector<int> annotator;  ///< 0-based, into annotator_ids
  std::vector<int> item;       ///< 0-based, into item_ids
  std::vector<std::string> annotator_ids;
  std::vector<std::string> item_ids;
  /// Constant columns and interactions of dropped parents.
  std::vector<ColumnSpec> dropped;
  std::vector<Encoding> encodings;
  std::vector<std::string> features;

  Eigen::Index column(std::string_view name) const;
};

DesignMatrix build_design(const lexfeat::FeatureMatrix& features, const corpus::Dataset& ds);

/// Number of fixed-effect columns, intercept excluded.
std::size_t count_effects(const DesignMatrix& d);

/// |L| + sum c + sum_{s<s'} c c' + |L| sum c.
std::size_t effect_formula(std::size_t n_features, const std::vector<std::size_t>& widths);

nlohmann::ordered_json manifest_json(const DesignMatrix& d);
void write_design(const DesignMatrix& d, const std::string& dir);
DesignMatrix read_design(const std::string& dir);

}  // namespace annolens::design
