#include "annolens/feature_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>

#include "annolens/csv.hpp"
#include "annolens/error.hpp"
#include "annolens/util.hpp"
#include "json.hpp"

namespace annolens::lexfeat {

std::string_view to_string(MatrixState s) {
  switch (s) {
    case MatrixState::raw: return "raw";
    case MatrixState::token_normalized: return "token_normalized";
    case MatrixState::standardized: return "standardized";
  }
  return "raw";
}

MatrixState matrix_state_from_string(std::string_view s) {
  if (s == "raw") return MatrixState::raw;
  if (s == "token_normalized") return MatrixState::token_normalized;
  if (s == "standardized") return MatrixState::standardized;
  throw DataError(fmt::format("unknown feature matrix state '{}'", s));
}

Eigen::Index FeatureMatrix::column(std::string_view name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].name == name) return static_cast<Eigen::Index>(j);
  }
  return -1;
}

std::vector<std::string> FeatureMatrix::names() const {
  std::vector<std::string> out;
  out.reserve(columns.size());
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

FeatureMatrix assemble(const std::vector<std::string>& item_ids, const std::vector<NamedFeatures>& rows) {
  if (item_ids.size() != rows.size()) throw DataError("assemble: item id and row counts differ");
  FeatureMatrix m;
  m.item_ids = item_ids;

  // group -> number of items emitting it
  std::map<FeatureGroup, std::size_t> group_count;
  for (const auto& r : rows) {
    for (auto g : r.groups) ++group_count[g];
  }
  for (const auto& [g, c] : group_count) {
    if (c == rows.size()) continue;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].groups.count(g)) {
        throw DataError(fmt::format("feature group '{}' present for {} of {} items; missing for item '{}'",
                                    to_string(g), c, rows.size(), item_ids[i]));
      }
    }
  }

  std::map<std::pair<FeatureGroup, std::string>, bool> cols;  // -> is_count
  for (const auto& r : rows) {
    for (const auto& v : r.values) {
      auto [it, inserted] = cols.emplace(std::pair{v.group, v.name}, v.is_count);
      if (!inserted && it->second != v.is_count) {
        throw DataError(fmt::format("feature '{}' has inconsistent count flags", v.name));
      }
    }
  }
  std::unordered_map<std::string, Eigen::Index> index;
  for (const auto& [key, is_count] : cols) {
    if (index.count(key.second)) throw DataError(fmt::format("duplicate feature name '{}'", key.second));
    index[key.second] = static_cast<Eigen::Index>(m.columns.size());
    m.columns.push_back(ColumnInfo{key.second, key.first, is_count});
  }

  m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& v : rows[i].values) m.values(static_cast<Eigen::Index>(i), index.at(v.name)) = v.value;
    if (!rows[i].flags.empty()) m.item_flags[item_ids[i]] = rows[i].flags;
  }
  return m;
}

FeatureMatrix extract_features(const std::vector<TokenizedItem>& items, const FeatureResources& res, unsigned jobs) {
  std::vector<NamedFeatures> rows(items.size());
  std::vector<std::string> ids;
  ids.reserve(items.size());
  for (const auto& it : items) ids.push_back(it.item_id);

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(items.size(), 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < items.size(); ++i) rows[i] = extract_item_features(items[i], res);
  } else {
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < items.size(); i += jobs) rows[i] = extract_item_features(items[i], res);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return assemble(ids, rows);
}

FeatureMatrix normalize_counts(const FeatureMatrix& f, const std::set<std::string>& count_features) {
  if (f.state != MatrixState::raw) throw ConfigError("normalize_counts expects a raw feature matrix");
  const auto nt = f.column("n_tokens");
  if (nt < 0) throw DataError("normalize_counts: n_tokens column missing");
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    if (!(f.values(i, nt) > 0)) {
      throw DataError(fmt::format("item '{}' has no word tokens", f.item_ids[static_cast<std::size_t>(i)]));
    }
  }
  for (const auto& name : count_features) {
    if (f.column(name) < 0) throw DataError(fmt::format("normalize_counts: unknown column '{}'", name));
  }
  FeatureMatrix out = f;
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    if (count_features.count(f.columns[static_cast<std::size_t>(j)].name)) {
      out.values.col(j) = f.values.col(j).cwiseQuotient(f.values.col(nt));
    }
  }
  out.state = MatrixState::token_normalized;
  return out;
}

FeatureMatrix normalize_counts(const FeatureMatrix& f) {
  std::set<std::string> counts;
  for (const auto& c : f.columns) {
    if (c.is_count) counts.insert(c.name);
  }
  return normalize_counts(f, counts);
}

FeatureMatrix standardize(const FeatureMatrix& f) {
  if (f.state == MatrixState::raw) throw ConfigError("standardize expects token-normalized features");
  if (f.rows() == 0) throw DataError("standardize: no items");
  if (!f.values.allFinite()) throw NumericalError("standardize: non-finite feature values");

  FeatureMatrix out;
  out.item_ids = f.item_ids;
  out.state = MatrixState::standardized;
  out.dropped = f.dropped;
  out.item_flags = f.item_flags;
  const auto n = static_cast<double>(f.rows());

  std::vector<Eigen::Index> keep;
  std::vector<std::pair<double, double>> stats;
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    const auto col = f.values.col(j);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / n);
    const double scale = std::max(1.0, col.cwiseAbs().maxCoeff());
    if (!(sd > 1e-12 * scale)) {
      out.dropped.push_back(f.columns[static_cast<std::size_t>(j)].name);
      continue;
    }
    keep.push_back(j);
    stats.emplace_back(mean, sd);
  }
  out.values.resize(f.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto j = keep[k];
    const auto [mean, sd] = stats[k];
    out.values.col(static_cast<Eigen::Index>(k)) = (f.values.col(j).array() - mean) / sd;
    auto info = f.columns[static_cast<std::size_t>(j)];
    // compose with an earlier standardization so mean/sd stay in original units
    info.mean = info.mean + info.sd * mean;
    info.sd = info.sd * sd;
    out.columns.push_back(std::move(info));
  }
  return out;
}

FeatureMatrix select_columns(const FeatureMatrix& f, const std::vector<std::string>& names) {
  FeatureMatrix out;
  out.item_ids = f.item_ids;
  out.state = f.state;
  out.dropped = f.dropped;
  out.item_flags = f.item_flags;
  out.values.resize(f.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto j = f.column(names[k]);
    if (j < 0) throw DataError(fmt::format("feature '{}' not in matrix", names[k]));
    out.values.col(static_cast<Eigen::Index>(k)) = f.values.col(j);
    out.columns.push_back(f.columns[static_cast<std::size_t>(j)]);
  }
  return out;
}

void write_feature_matrix(const FeatureMatrix& f, const std::string& path) {
  std::ostringstream body;
  std::vector<std::string> row{"item_id"};
  for (const auto& c : f.columns) row.push_back(c.name);
  csv::write_row(body, row);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    row.assign(1, f.item_ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < f.cols(); ++j) row.push_back(format_number(f.values(i, j)));
    csv::write_row(body, row);
  }
  csv::write_text(path, body.str());

  nlohmann::ordered_json meta;
  meta["state"] = to_string(f.state);
  meta["compressor"] = kCompressorVersion;
  auto& cols = meta["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : f.columns) {
    cols.push_back({{"name", c.name},
                    {"group", to_string(c.group)},
                    {"is_count", c.is_count},
                    {"mean", format_number(c.mean)},
                    {"sd", format_number(c.sd)}});
  }
  meta["dropped"] = f.dropped;
  meta["item_flags"] = nlohmann::ordered_json::object();
  for (const auto& [id, flags] : f.item_flags) meta["item_flags"][id] = flags;
  csv::write_text(path + ".json", meta.dump(2) + "\n");
}

FeatureMatrix read_feature_matrix(const std::string& path) {
  const auto table = csv::read_file(path, ',');
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(csv::read_text(path + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}.json: {}", path, e.what()));
  }
  FeatureMatrix f;
  try {
    f.state = matrix_state_from_string(meta.at("state").get<std::string>());
    for (const auto& c : meta.at("columns")) {
      ColumnInfo info;
      info.name = c.at("name").get<std::string>();
      info.group = feature_group_from_string(c.at("group").get<std::string>());
      info.is_count = c.at("is_count").get<bool>();
      info.mean = parse_number(c.at("mean").get<std::string>(), path + ".json");
      info.sd = parse_number(c.at("sd").get<std::string>(), path + ".json");
      f.columns.push_back(std::move(info));
    }
    f.dropped = meta.at("dropped").get<std::vector<std::string>>();
    for (const auto& [id, flags] : meta.at("item_flags").items()) {
      f.item_flags[id] = flags.get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}.json: {}", path, e.what()));
  }
  if (table.header.size() != f.columns.size() + 1 || table.header.front() != "item_id") {
    throw DataError(fmt::format("{}: header does not match sidecar metadata", path));
  }
  for (std::size_t j = 0; j < f.columns.size(); ++j) {
    if (table.header[j + 1] != f.columns[j].name) {
      throw DataError(fmt::format("{}: column '{}' does not match sidecar", path, table.header[j + 1]));
    }
  }
  f.values.resize(static_cast<Eigen::Index>(table.rows.size()), f.cols());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    f.item_ids.push_back(r[0]);
    for (std::size_t j = 0; j < f.columns.size(); ++j) {
      f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_number(r[j + 1], fmt::format("{}:{}", path, table.line_of[i]));
    }
  }
  return f;
}

}  // namespace annolens::lexfeat
