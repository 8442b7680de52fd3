#include "annolens/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "annolens/csv.hpp"
#include "annolens/error.hpp"
#include "annolens/util.hpp"

namespace annolens::design {

using corpus::CharType;

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::intercept: return "intercept";
    case Origin::L: return "L";
    case Origin::S: return "S";
    case Origin::SS: return "S:S";
    case Origin::LS: return "L:S";
  }
  return "L";
}

Origin origin_from_string(std::string_view s) {
  if (s == "intercept") return Origin::intercept;
  if (s == "L") return Origin::L;
  if (s == "S") return Origin::S;
  if (s == "S:S") return Origin::SS;
  if (s == "L:S") return Origin::LS;
  throw DataError(fmt::format("unknown column origin '{}'", s));
}

Eigen::MatrixXd poly_contrasts(int k) {
  if (k < 2) throw ConfigError("ordinal characteristic needs at least 2 levels");
  using Mat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  Mat v(k, k);
  const long double centre = (k + 1) / 2.0L;
  for (int i = 0; i < k; ++i) {
    const long double x = (i + 1) - centre;
    long double p = 1.0L;
    for (int d = 0; d < k; ++d) {
      v(i, d) = p;
      p *= x;
    }
  }
  // modified Gram-Schmidt, two passes for stability at larger k
  for (int d = 0; d < k; ++d) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int e = 0; e < d; ++e) v.col(d) -= v.col(e).dot(v.col(d)) * v.col(e);
    }
    v.col(d) /= v.col(d).norm();
  }
  return v.rightCols(k - 1).cast<double>();
}

std::vector<std::string> poly_suffixes(int k) {
  std::vector<std::string> out;
  for (int d = 1; d < k; ++d) {
    if (d == 1) out.push_back(".L");
    else if (d == 2) out.push_back(".Q");
    else if (d == 3) out.push_back(".C");
    else out.push_back(fmt::format("^{}", d));
  }
  return out;
}

Eigen::RowVectorXd Encoding::encode(std::string_view value) const {
  if (type == CharType::interval) {
    Eigen::RowVectorXd r(1);
    r(0) = parse_number(value, fmt::format("characteristic '{}'", name));
    return r;
  }
  const auto it = std::find(levels.begin(), levels.end(), value);
  if (it == levels.end()) throw DataError(fmt::format("unseen level '{}' for characteristic '{}'", value, name));
  return codes.row(it - levels.begin());
}

Encoding nominal_encoding(std::string name, std::vector<std::string> levels, std::string reference) {
  if (std::find(levels.begin(), levels.end(), reference) == levels.end()) {
    throw ConfigError(fmt::format("reference '{}' is not a level of '{}'", reference, name));
  }
  Encoding e;
  e.name = std::move(name);
  e.type = CharType::nominal;
  e.levels = std::move(levels);
  e.reference = std::move(reference);
  const auto k = static_cast<Eigen::Index>(e.levels.size());
  e.codes = Eigen::MatrixXd::Zero(k, k - 1);
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& lv = e.levels[static_cast<std::size_t>(i)];
    if (lv == e.reference) continue;
    e.codes(i, col++) = 1.0;
    e.columns.push_back(e.name + lv);
  }
  return e;
}

Encoding ordinal_encoding(std::string name, std::vector<std::string> ordered_levels) {
  Encoding e;
  e.name = std::move(name);
  e.type = CharType::ordinal;
  e.levels = std::move(ordered_levels);
  const int k = static_cast<int>(e.levels.size());
  if (k < 2) throw ConfigError(fmt::format("ordinal characteristic '{}' needs at least 2 levels", e.name));
  e.codes = poly_contrasts(k);
  for (const auto& s : poly_suffixes(k)) e.columns.push_back(e.name + s);
  return e;
}

Encoding interval_encoding(std::string name) {
  Encoding e;
  e.name = std::move(name);
  e.type = CharType::interval;
  e.columns = {e.name};
  return e;
}

namespace {

Eigen::MatrixXd encode_all(const Encoding& e, const std::vector<std::string>& values) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(values.size()), e.width());
  for (std::size_t i = 0; i < values.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = e.encode(values[i]);
  return out;
}

bool is_constant(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return v.size() == 0 || (v.array() == v(0)).all();
}

}  // namespace

Eigen::MatrixXd encode_nominal(const std::vector<std::string>& values, const std::vector<std::string>& levels,
                               const std::string& reference) {
  return encode_all(nominal_encoding("x", levels, reference), values);
}

Eigen::MatrixXd encode_ordinal(const std::vector<std::string>& values, const std::vector<std::string>& ordered_levels) {
  return encode_all(ordinal_encoding("x", ordered_levels), values);
}

std::vector<Encoding> encodings_for(const corpus::Dataset& ds) {
  std::vector<Encoding> out;
  for (const auto& spec : ds.schema.characteristics) {
    switch (spec.type) {
      case CharType::interval: out.push_back(interval_encoding(spec.name)); break;
      case CharType::ordinal: out.push_back(ordinal_encoding(spec.name, spec.levels)); break;
      case CharType::nominal: {
        auto levels = spec.levels;
        if (levels.empty()) {
          std::set<std::string> seen;
          for (const auto& p : ds.annotators) {
            const auto it = p.characteristics.find(spec.name);
            if (it != p.characteristics.end()) seen.insert(it->second);
          }
          levels.assign(seen.begin(), seen.end());
        }
        if (spec.reference.empty()) throw ConfigError(fmt::format("nominal '{}' has no reference level", spec.name));
        out.push_back(nominal_encoding(spec.name, std::move(levels), spec.reference));
        break;
      }
    }
  }
  return out;
}

Eigen::Index DesignMatrix::column(std::string_view name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].name == name) return static_cast<Eigen::Index>(j);
  }
  return -1;
}

DesignMatrix build_design(const lexfeat::FeatureMatrix& features, const corpus::Dataset& ds) {
  DesignMatrix d;
  d.encodings = encodings_for(ds);
  d.features = features.names();
  const auto n = static_cast<Eigen::Index>(ds.annotations.size());

  std::map<std::string, const corpus::AnnotatorProfile*> profiles;
  for (const auto& p : ds.annotators) {
    if (!profiles.emplace(p.annotator_id, &p).second) {
      throw DataError(fmt::format("annotator '{}' has more than one profile", p.annotator_id));
    }
  }
  std::map<std::string, Eigen::Index> feature_row;
  for (std::size_t i = 0; i < features.item_ids.size(); ++i) {
    feature_row[features.item_ids[i]] = static_cast<Eigen::Index>(i);
  }

  std::set<std::string> a_ids, i_ids;
  for (const auto& a : ds.annotations) {
    a_ids.insert(a.annotator_id);
    i_ids.insert(a.item_id);
  }
  d.annotator_ids.assign(a_ids.begin(), a_ids.end());
  d.item_ids.assign(i_ids.begin(), i_ids.end());
  std::map<std::string, int> a_index, i_index;
  for (std::size_t k = 0; k < d.annotator_ids.size(); ++k) a_index[d.annotator_ids[k]] = static_cast<int>(k);
  for (std::size_t k = 0; k < d.item_ids.size(); ++k) i_index[d.item_ids[k]] = static_cast<int>(k);

  // main-effect blocks
  const auto n_l = features.cols();
  Eigen::Index n_s = 0;
  for (const auto& e : d.encodings) n_s += e.width();
  Eigen::MatrixXd lblock(n, n_l), sblock(n, n_s);
  d.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& a = ds.annotations[static_cast<std::size_t>(r)];
    const auto fr = feature_row.find(a.item_id);
    if (fr == feature_row.end()) throw DataError(fmt::format("item '{}' has no feature row", a.item_id));
    const auto pr = profiles.find(a.annotator_id);
    if (pr == profiles.end()) throw DataError(fmt::format("annotator '{}' has no profile", a.annotator_id));
    lblock.row(r) = features.values.row(fr->second);
    Eigen::Index off = 0;
    for (const auto& e : d.encodings) {
      const auto v = pr->second->characteristics.find(e.name);
      if (v == pr->second->characteristics.end()) {
        throw DataError(fmt::format("annotator '{}' lacks characteristic '{}'", a.annotator_id, e.name));
      }
      sblock.block(r, off, 1, e.width()) = e.encode(v->second);
      off += e.width();
    }
    d.y(r) = a.label;
    d.annotator.push_back(a_index.at(a.annotator_id));
    d.item.push_back(i_index.at(a.item_id));
  }

  std::vector<Eigen::VectorXd> cols;
  std::set<std::string> dropped_names;
  auto drop = [&](ColumnSpec spec, std::string_view why) {
    spdlog::info("design: dropping column {} ({})", spec.name, why);
    dropped_names.insert(spec.name);
    d.dropped.push_back(std::move(spec));
  };
  auto offer = [&](ColumnSpec spec, Eigen::VectorXd v) {
    for (const auto& p : spec.parents) {
      if (dropped_names.count(p)) {
        drop(std::move(spec), fmt::format("parent {} dropped", p));
        return;
      }
    }
    if (is_constant(v)) {
      drop(std::move(spec), "constant");
      return;
    }
    d.columns.push_back(std::move(spec));
    cols.push_back(std::move(v));
  };

  // S column names with their characteristic index
  std::vector<std::pair<std::string, std::size_t>> s_cols;
  for (std::size_t c = 0; c < d.encodings.size(); ++c) {
    for (const auto& name : d.encodings[c].columns) s_cols.emplace_back(name, c);
  }
  std::map<std::string, Eigen::Index> s_index;
  for (std::size_t k = 0; k < s_cols.size(); ++k) s_index[s_cols[k].first] = static_cast<Eigen::Index>(k);

  for (Eigen::Index j = 0; j < n_l; ++j) offer({d.features[static_cast<std::size_t>(j)], Origin::L, {}}, lblock.col(j));
  for (std::size_t k = 0; k < s_cols.size(); ++k) {
    offer({s_cols[k].first, Origin::S, {}}, sblock.col(static_cast<Eigen::Index>(k)));
  }
  for (std::size_t a = 0; a < s_cols.size(); ++a) {
    for (std::size_t b = a + 1; b < s_cols.size(); ++b) {
      if (s_cols[a].second == s_cols[b].second) continue;
      const auto& na = s_cols[a].first;
      const auto& nb = s_cols[b].first;
      offer({na + ":" + nb, Origin::SS, {na, nb}},
            sblock.col(static_cast<Eigen::Index>(a)).cwiseProduct(sblock.col(static_cast<Eigen::Index>(b))));
    }
  }
  for (Eigen::Index j = 0; j < n_l; ++j) {
    const auto& f = d.features[static_cast<std::size_t>(j)];
    for (const auto& [sname, c] : s_cols) {
      offer({sname + ":" + f, Origin::LS, {f, sname}}, lblock.col(j).cwiseProduct(sblock.col(s_index.at(sname))));
    }
  }

  d.x.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) d.x.col(static_cast<Eigen::Index>(k)) = cols[k];
  std::set<std::string> unique;
  for (const auto& c : d.columns) {
    if (!unique.insert(c.name).second) throw DataError(fmt::format("duplicate design column '{}'", c.name));
  }
  return d;
}

std::size_t count_effects(const DesignMatrix& d) { return d.columns.size(); }

std::size_t effect_formula(std::size_t n_features, const std::vector<std::size_t>& widths) {
  std::size_t sum = 0, pairs = 0;
  for (std::size_t a = 0; a < widths.size(); ++a) {
    sum += widths[a];
    for (std::size_t b = a + 1; b < widths.size(); ++b) pairs += widths[a] * widths[b];
  }
  return n_features + sum + pairs + n_features * sum;
}

namespace {

nlohmann::ordered_json column_json(const ColumnSpec& c) {
  return {{"name", c.name}, {"origin", to_string(c.origin)}, {"parents", c.parents}};
}

ColumnSpec column_from_json(const nlohmann::json& j) {
  return {j.at("name").get<std::string>(), origin_from_string(j.at("origin").get<std::string>()),
          j.at("parents").get<std::vector<std::string>>()};
}

}  // namespace

nlohmann::ordered_json manifest_json(const DesignMatrix& d) {
  nlohmann::ordered_json j;
  j["n_rows"] = d.x.rows();
  j["n_effects"] = count_effects(d);
  j["features"] = d.features;
  auto& enc = j["encodings"] = nlohmann::ordered_json::array();
  for (const auto& e : d.encodings) {
    nlohmann::ordered_json ej;
    ej["name"] = e.name;
    ej["type"] = corpus::to_string(e.type);
    ej["levels"] = e.levels;
    ej["reference"] = e.reference;
    ej["columns"] = e.columns;
    auto& codes = ej["codes"] = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < e.codes.rows(); ++i) {
      auto row = nlohmann::ordered_json::array();
      for (Eigen::Index k = 0; k < e.codes.cols(); ++k) row.push_back(e.codes(i, k));
      codes.push_back(std::move(row));
    }
    enc.push_back(std::move(ej));
  }
  auto& cols = j["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : d.columns) cols.push_back(column_json(c));
  auto& dropped = j["dropped"] = nlohmann::ordered_json::array();
  for (const auto& c : d.dropped) dropped.push_back(column_json(c));
  j["annotators"] = d.annotator_ids;
  j["items"] = d.item_ids;
  return j;
}

void write_design(const DesignMatrix& d, const std::string& dir) {
  csv::write_text(dir + "/manifest.json", manifest_json(d).dump(2) + "\n");
  std::ostringstream out;
  std::vector<std::string> row{"y", "annotator", "item"};
  for (const auto& c : d.columns) row.push_back(c.name);
  csv::write_row(out, row);
  for (Eigen::Index r = 0; r < d.x.rows(); ++r) {
    row = {format_number(d.y(r)), d.annotator_ids[static_cast<std::size_t>(d.annotator[static_cast<std::size_t>(r)])],
           d.item_ids[static_cast<std::size_t>(d.item[static_cast<std::size_t>(r)])]};
    for (Eigen::Index k = 0; k < d.x.cols(); ++k) row.push_back(format_number(d.x(r, k)));
    csv::write_row(out, row);
  }
  csv::write_text(dir + "/design.csv", out.str());
}

DesignMatrix read_design(const std::string& dir) {
  DesignMatrix d;
  const auto mpath = dir + "/manifest.json";
  try {
    const auto j = nlohmann::json::parse(csv::read_text(mpath));
    d.features = j.at("features").get<std::vector<std::string>>();
    for (const auto& ej : j.at("encodings")) {
      Encoding e;
      e.name = ej.at("name").get<std::string>();
      e.type = corpus::char_type_from_string(ej.at("type").get<std::string>());
      e.levels = ej.at("levels").get<std::vector<std::string>>();
      e.reference = ej.at("reference").get<std::string>();
      e.columns = ej.at("columns").get<std::vector<std::string>>();
      const auto& codes = ej.at("codes");
      e.codes.resize(static_cast<Eigen::Index>(codes.size()), e.width());
      for (std::size_t i = 0; i < codes.size(); ++i) {
        for (std::size_t k = 0; k < codes[i].size(); ++k) {
          e.codes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = codes[i][k].get<double>();
        }
      }
      d.encodings.push_back(std::move(e));
    }
    for (const auto& c : j.at("columns")) d.columns.push_back(column_from_json(c));
    for (const auto& c : j.at("dropped")) d.dropped.push_back(column_from_json(c));
    d.annotator_ids = j.at("annotators").get<std::vector<std::string>>();
    d.item_ids = j.at("items").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", mpath, e.what()));
  }

  const auto dpath = dir + "/design.csv";
  const auto t = csv::read_file(dpath);
  if (t.header.size() != d.columns.size() + 3) throw DataError(fmt::format("{}: header does not match manifest", dpath));
  std::map<std::string, int> a_index, i_index;
  for (std::size_t k = 0; k < d.annotator_ids.size(); ++k) a_index[d.annotator_ids[k]] = static_cast<int>(k);
  for (std::size_t k = 0; k < d.item_ids.size(); ++k) i_index[d.item_ids[k]] = static_cast<int>(k);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  d.x.resize(n, static_cast<Eigen::Index>(d.columns.size()));
  d.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    const auto where = fmt::format("{}:{}", dpath, t.line_of[static_cast<std::size_t>(r)]);
    d.y(r) = parse_number(row[0], where);
    const auto ai = a_index.find(row[1]);
    const auto ii = i_index.find(row[2]);
    if (ai == a_index.end() || ii == i_index.end()) throw DataError(where + ": unknown annotator or item");
    d.annotator.push_back(ai->second);
    d.item.push_back(ii->second);
    for (std::size_t k = 0; k < d.columns.size(); ++k) d.x(r, static_cast<Eigen::Index>(k)) = parse_number(row[k + 3], where);
  }
  return d;
}

}  // namespace annolens::design
