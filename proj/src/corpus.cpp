#include "annolens/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "annolens/csv.hpp"
#include "annolens/error.hpp"
#include "annolens/util.hpp"

namespace annolens::corpus {

namespace {

using PairKey = std::pair<std::string, std::string>;

struct PairHash {
  std::size_t operator()(const PairKey& k) const noexcept {
    return std::hash<std::string>{}(k.first) * 31u ^ std::hash<std::string>{}(k.second);
  }
};

bool is_missing_or_pna(std::string_view value, const std::vector<std::string>& tokens) {
  const auto v = trim(value);
  if (v.empty()) return true;
  const auto lowered = to_lower_ascii(v);
  return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) {
    return to_lower_ascii(trim(t)) == lowered;
  });
}

Dataset with_annotations_filtered(const Dataset& ds, const std::set<std::string>& keep_items,
                                  const std::set<std::string>& keep_annotators) {
  Dataset out;
  out.schema = ds.schema;
  for (const auto& item : ds.items) {
    if (keep_items.contains(item.item_id)) out.items.push_back(item);
  }
  for (const auto& a : ds.annotators) {
    if (keep_annotators.contains(a.annotator_id)) out.annotators.push_back(a);
  }
  for (const auto& r : ds.annotations) {
    if (keep_items.contains(r.item_id) && keep_annotators.contains(r.annotator_id)) {
      out.annotations.push_back(r);
    }
  }
  return out;
}

std::set<std::string> item_ids(const Dataset& ds) {
  std::set<std::string> ids;
  for (const auto& item : ds.items) ids.insert(item.item_id);
  return ids;
}

}  // namespace

std::string_view to_string(CharType type) {
  switch (type) {
    case CharType::nominal: return "nominal";
    case CharType::ordinal: return "ordinal";
    case CharType::interval: return "interval";
  }
  return "nominal";
}

CharType char_type_from_string(std::string_view s) {
  if (s == "nominal") return CharType::nominal;
  if (s == "ordinal") return CharType::ordinal;
  if (s == "interval") return CharType::interval;
  throw ConfigError(fmt::format("unknown characteristic type '{}'", s));
}

const CharacteristicSpec* Schema::find(std::string_view name) const {
  for (const auto& c : characteristics) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

Schema schema_from_json(const nlohmann::json& j) {
  Schema schema;
  try {
    schema.scale_size = j.value("scale_size", 5);
    schema.pna_tokens = j.value("pna_tokens", std::vector<std::string>{});
    schema.multi_delimiters = j.value("multi_delimiters", std::string(";,"));
    for (const auto& c : j.at("characteristics")) {
      CharacteristicSpec spec;
      spec.name = c.at("name").get<std::string>();
      spec.type = char_type_from_string(c.at("type").get<std::string>());
      spec.levels = c.value("levels", std::vector<std::string>{});
      spec.reference = c.value("reference", std::string{});
      spec.pna_tokens = c.value("pna_tokens", std::vector<std::string>{});
      schema.characteristics.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("schema: {}", e.what()));
  }
  if (schema.scale_size < 2) throw ConfigError("schema: scale_size must be at least 2");
  std::set<std::string> names;
  for (const auto& c : schema.characteristics) {
    if (c.name.empty() || c.name == "annotator_id") {
      throw ConfigError(fmt::format("schema: invalid characteristic name '{}'", c.name));
    }
    if (!names.insert(c.name).second) {
      throw ConfigError(fmt::format("schema: duplicate characteristic '{}'", c.name));
    }
    if (c.type == CharType::ordinal && c.levels.size() < 2) {
      throw ConfigError(fmt::format("schema: ordinal '{}' needs at least two levels", c.name));
    }
    if (c.type == CharType::nominal) {
      if (c.reference.empty()) {
        throw ConfigError(fmt::format("schema: nominal '{}' needs a reference level", c.name));
      }
      if (!c.levels.empty() &&
          std::find(c.levels.begin(), c.levels.end(), c.reference) == c.levels.end()) {
        throw ConfigError(
            fmt::format("schema: reference '{}' is not a level of '{}'", c.reference, c.name));
      }
    }
  }
  return schema;
}

nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json j;
  j["scale_size"] = schema.scale_size;
  j["pna_tokens"] = schema.pna_tokens;
  j["multi_delimiters"] = schema.multi_delimiters;
  j["characteristics"] = nlohmann::json::array();
  for (const auto& c : schema.characteristics) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["type"] = std::string(to_string(c.type));
    if (!c.levels.empty()) cj["levels"] = c.levels;
    if (!c.reference.empty()) cj["reference"] = c.reference;
    if (!c.pna_tokens.empty()) cj["pna_tokens"] = c.pna_tokens;
    j["characteristics"].push_back(std::move(cj));
  }
  return j;
}

Schema load_schema(const std::string& path) {
  const auto text = csv::read_text(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  return schema_from_json(j);
}

Dataset load_dataset(const std::string& annotation_file, const std::string& profile_file,
                     const std::string& item_file, const Schema& schema, char delimiter) {
  Dataset ds;
  ds.schema = schema;

  const auto items = csv::read_file(item_file, delimiter);
  {
    const auto id_col = items.column("item_id", item_file);
    const auto text_col = items.column("text", item_file);
    std::set<std::string> seen;
    for (std::size_t r = 0; r < items.rows.size(); ++r) {
      const auto& row = items.rows[r];
      const auto id = std::string(trim(row[id_col]));
      if (id.empty()) throw DataError(fmt::format("{}:{}: empty item_id", item_file, items.line_of[r]));
      if (trim(row[text_col]).empty()) {
        throw DataError(fmt::format("{}:{}: item '{}' has empty text", item_file, items.line_of[r], id));
      }
      if (!seen.insert(id).second) {
        throw DataError(fmt::format("{}:{}: duplicate item_id '{}'", item_file, items.line_of[r], id));
      }
      ds.items.push_back({id, row[text_col]});
    }
  }

  const auto profiles = csv::read_file(profile_file, delimiter);
  {
    const auto id_col = profiles.column("annotator_id", profile_file);
    std::vector<std::pair<std::string, std::size_t>> columns;
    for (const auto& c : schema.characteristics) {
      columns.emplace_back(c.name, profiles.column(c.name, profile_file));
    }
    for (std::size_t r = 0; r < profiles.rows.size(); ++r) {
      const auto& row = profiles.rows[r];
      AnnotatorProfile p;
      p.annotator_id = std::string(trim(row[id_col]));
      if (p.annotator_id.empty()) {
        throw DataError(fmt::format("{}:{}: empty annotator_id", profile_file, profiles.line_of[r]));
      }
      for (const auto& [name, col] : columns) p.characteristics[name] = std::string(trim(row[col]));
      ds.annotators.push_back(std::move(p));
    }
  }

  const auto ann = csv::read_file(annotation_file, delimiter);
  {
    const auto item_col = ann.column("item_id", annotation_file);
    const auto annot_col = ann.column("annotator_id", annotation_file);
    const auto label_col = ann.column("label", annotation_file);
    const auto known_items = item_ids(ds);
    const auto known_annotators = annotator_ids(ds);
    std::unordered_set<PairKey, PairHash> pairs;
    for (std::size_t r = 0; r < ann.rows.size(); ++r) {
      const auto& row = ann.rows[r];
      const auto line = ann.line_of[r];
      AnnotationRecord rec;
      rec.item_id = std::string(trim(row[item_col]));
      rec.annotator_id = std::string(trim(row[annot_col]));
      const auto label_text = trim(row[label_col]);
      const auto* end = label_text.data() + label_text.size();
      auto [ptr, ec] = std::from_chars(label_text.data(), end, rec.label);
      if (label_text.empty() || ec != std::errc() || ptr != end) {
        throw DataError(fmt::format("{}:{}: label '{}' is not an integer", annotation_file, line, label_text));
      }
      if (rec.label < 1 || rec.label > schema.scale_size) {
        throw DataError(fmt::format("{}:{}: label {} outside scale 1..{}", annotation_file, line,
                                    rec.label, schema.scale_size));
      }
      if (!known_items.contains(rec.item_id)) {
        throw DataError(fmt::format("{}:{}: unknown item '{}'", annotation_file, line, rec.item_id));
      }
      if (!known_annotators.contains(rec.annotator_id)) {
        throw DataError(
            fmt::format("{}:{}: unknown annotator '{}'", annotation_file, line, rec.annotator_id));
      }
      if (!pairs.insert({rec.item_id, rec.annotator_id}).second) {
        throw DataError(fmt::format("{}:{}: duplicate annotation of item '{}' by '{}'", annotation_file,
                                    line, rec.item_id, rec.annotator_id));
      }
      ds.annotations.push_back(std::move(rec));
    }
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream out;
    csv::write_row(out, {"item_id", "annotator_id", "label"});
    for (const auto& r : ds.annotations) {
      csv::write_row(out, {r.item_id, r.annotator_id, std::to_string(r.label)});
    }
    csv::write_text(dir + "/annotations.csv", out.str());
  }
  {
    std::ostringstream out;
    csv::Row header{"annotator_id"};
    for (const auto& c : ds.schema.characteristics) header.push_back(c.name);
    csv::write_row(out, header);
    for (const auto& a : ds.annotators) {
      csv::Row row{a.annotator_id};
      for (const auto& c : ds.schema.characteristics) {
        const auto it = a.characteristics.find(c.name);
        row.push_back(it == a.characteristics.end() ? std::string{} : it->second);
      }
      csv::write_row(out, row);
    }
    csv::write_text(dir + "/profiles.csv", out.str());
  }
  {
    std::ostringstream out;
    csv::write_row(out, {"item_id", "text"});
    for (const auto& item : ds.items) csv::write_row(out, {item.item_id, item.text});
    csv::write_text(dir + "/items.csv", out.str());
  }
  csv::write_text(dir + "/schema.json", schema_to_json(ds.schema).dump(2) + "\n");
}

Dataset read_dataset_dir(const std::string& dir) {
  const auto schema = load_schema(dir + "/schema.json");
  return load_dataset(dir + "/annotations.csv", dir + "/profiles.csv", dir + "/items.csv", schema);
}

void check_integrity(const Dataset& ds) {
  const auto items = item_ids(ds);
  const auto annotators = annotator_ids(ds);
  std::unordered_set<PairKey, PairHash> pairs;
  for (const auto& r : ds.annotations) {
    if (r.label < 1 || r.label > ds.schema.scale_size) {
      throw DataError(fmt::format("label {} outside 1..{}", r.label, ds.schema.scale_size));
    }
    if (!items.contains(r.item_id)) throw DataError(fmt::format("dangling item '{}'", r.item_id));
    if (!annotators.contains(r.annotator_id)) {
      throw DataError(fmt::format("dangling annotator '{}'", r.annotator_id));
    }
    if (!pairs.insert({r.item_id, r.annotator_id}).second) {
      throw DataError(fmt::format("duplicate annotation ({}, {})", r.item_id, r.annotator_id));
    }
  }
}

std::vector<std::string> schema_violations(const Dataset& ds) {
  std::vector<std::string> problems;
  std::map<std::string, const AnnotatorProfile*> first;
  for (const auto& a : ds.annotators) {
    auto [it, inserted] = first.emplace(a.annotator_id, &a);
    if (!inserted && !(*it->second == a)) {
      problems.push_back(fmt::format("annotator '{}' has conflicting profiles", a.annotator_id));
    }
    for (const auto& c : ds.schema.characteristics) {
      const auto found = a.characteristics.find(c.name);
      const std::string value = found == a.characteristics.end() ? std::string{} : found->second;
      const auto where = fmt::format("annotator '{}', {}", a.annotator_id, c.name);
      switch (c.type) {
        case CharType::interval:
          try {
            parse_number(value, where);
          } catch (const DataError& e) {
            problems.emplace_back(e.what());
          }
          break;
        case CharType::ordinal:
        case CharType::nominal:
          if (value.empty()) {
            problems.push_back(where + ": missing value");
          } else if (!c.levels.empty() &&
                     std::find(c.levels.begin(), c.levels.end(), value) == c.levels.end()) {
            problems.push_back(fmt::format("{}: '{}' is not a declared level", where, value));
          }
          break;
      }
    }
  }
  return problems;
}

std::set<std::string> annotator_ids(const Dataset& ds) {
  std::set<std::string> ids;
  for (const auto& a : ds.annotators) ids.insert(a.annotator_id);
  return ids;
}

Dataset without_annotators(const Dataset& ds, const std::set<std::string>& removed) {
  auto keep = annotator_ids(ds);
  for (const auto& id : removed) keep.erase(id);
  return with_annotations_filtered(ds, item_ids(ds), keep);
}

Dataset drop_missing_and_pna(const Dataset& ds, const std::vector<std::string>& pna_tokens) {
  std::set<std::string> removed;
  for (const auto& a : ds.annotators) {
    for (const auto& c : ds.schema.characteristics) {
      auto tokens = pna_tokens;
      tokens.insert(tokens.end(), ds.schema.pna_tokens.begin(), ds.schema.pna_tokens.end());
      tokens.insert(tokens.end(), c.pna_tokens.begin(), c.pna_tokens.end());
      const auto it = a.characteristics.find(c.name);
      if (it == a.characteristics.end() || is_missing_or_pna(it->second, tokens)) {
        removed.insert(a.annotator_id);
        break;
      }
    }
  }
  return without_annotators(ds, removed);
}

Dataset drop_conflicting_annotators(const Dataset& ds) {
  std::map<std::string, const AnnotatorProfile*> first;
  std::set<std::string> conflicting;
  for (const auto& a : ds.annotators) {
    auto [it, inserted] = first.emplace(a.annotator_id, &a);
    if (!inserted && !(*it->second == a)) conflicting.insert(a.annotator_id);
  }
  Dataset out = without_annotators(ds, conflicting);
  // keep the first of identical repeated rows
  std::set<std::string> seen;
  std::vector<AnnotatorProfile> unique;
  for (auto& a : out.annotators) {
    if (seen.insert(a.annotator_id).second) unique.push_back(std::move(a));
  }
  out.annotators = std::move(unique);
  return out;
}

Dataset filter_by_participation(const Dataset& ds, std::size_t min_items_per_annotator,
                                std::size_t min_annotators_per_item) {
  if (min_items_per_annotator < 1 || min_annotators_per_item < 1) {
    throw ConfigError("participation thresholds must be at least 1");
  }
  // Stage 1: annotators with too few annotations.
  std::map<std::string, std::size_t> per_annotator;
  for (const auto& r : ds.annotations) ++per_annotator[r.annotator_id];
  std::set<std::string> keep_annotators;
  for (const auto& a : ds.annotators) {
    const auto it = per_annotator.find(a.annotator_id);
    if (it != per_annotator.end() && it->second >= min_items_per_annotator) {
      keep_annotators.insert(a.annotator_id);
    }
  }
  // Stage 2: items with too few of the remaining annotators. Single pass.
  std::map<std::string, std::size_t> per_item;
  for (const auto& r : ds.annotations) {
    if (keep_annotators.contains(r.annotator_id)) ++per_item[r.item_id];
  }
  std::set<std::string> keep_items;
  for (const auto& item : ds.items) {
    const auto it = per_item.find(item.item_id);
    if (it != per_item.end() && it->second >= min_annotators_per_item) keep_items.insert(item.item_id);
  }
  return with_annotations_filtered(ds, keep_items, keep_annotators);
}

std::vector<RecodeMap> load_recode_maps(const std::string& path, char delimiter) {
  const auto table = csv::read_file(path, delimiter);
  const auto c_col = table.column("characteristic", path);
  const auto r_col = table.column("raw", path);
  const auto h_col = table.column("harmonized", path);
  std::vector<RecodeMap> maps;
  auto map_for = [&](const std::string& name) -> RecodeMap& {
    for (auto& m : maps) {
      if (m.characteristic == name) return m;
    }
    RecodeMap m;
    m.characteristic = name;
    maps.push_back(std::move(m));
    return maps.back();
  };
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto name = std::string(trim(row[c_col]));
    const auto raw = std::string(trim(row[r_col]));
    const auto harmonized = std::string(trim(row[h_col]));
    if (name.empty()) throw DataError(fmt::format("{}:{}: empty characteristic", path, table.line_of[r]));
    auto& m = map_for(name);
    if (raw == "@exhaustive") {
      m.exhaustive = true;
    } else if (raw == "@catch_all") {
      m.catch_all = harmonized;
    } else if (raw == "@keep") {
      m.keep.insert(harmonized);
    } else {
      if (!m.mapping.emplace(raw, harmonized).second) {
        throw DataError(fmt::format("{}:{}: '{}' mapped twice for '{}'", path, table.line_of[r], raw, name));
      }
    }
  }
  return maps;
}

std::string canonical_multi_answer(std::string_view value, std::string_view delimiters) {
  auto parts = split_any(value, delimiters);
  std::sort(parts.begin(), parts.end());
  parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  return fmt::format("{}", fmt::join(parts, ";"));
}

std::vector<std::string> top_multi_combinations(const Dataset& ds, std::string_view characteristic,
                                                std::size_t arity, std::size_t k) {
  std::map<std::string, std::size_t> counts;
  std::set<std::string> seen;
  for (const auto& a : ds.annotators) {
    if (!seen.insert(a.annotator_id).second) continue;
    const auto it = a.characteristics.find(std::string(characteristic));
    if (it == a.characteristics.end()) continue;
    const auto canonical = canonical_multi_answer(it->second, ds.schema.multi_delimiters);
    if (split_any(canonical, ";").size() == arity) ++counts[canonical];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> top;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) top.push_back(ranked[i].first);
  return top;
}

Dataset recode(const Dataset& ds, const std::vector<RecodeMap>& maps) {
  for (const auto& m : maps) {
    if (!ds.schema.find(m.characteristic)) {
      throw ConfigError(fmt::format("recode map for unknown characteristic '{}'", m.characteristic));
    }
  }
  const auto& delims = ds.schema.multi_delimiters;
  Dataset out = ds;
  std::set<std::string> dropped;
  std::map<std::string, std::set<std::string>> unmapped;

  for (auto& a : out.annotators) {
    for (const auto& m : maps) {
      auto& value = a.characteristics[m.characteristic];
      if (const auto it = m.mapping.find(value); it != m.mapping.end()) {
        value = it->second;
      } else {
        auto parts = split_any(value, delims);
        if (parts.size() > 1) {
          for (auto& part : parts) {
            if (const auto pit = m.mapping.find(part); pit != m.mapping.end()) {
              part = pit->second;
            } else if (m.exhaustive) {
              unmapped[m.characteristic].insert(part);
            }
          }
          std::sort(parts.begin(), parts.end());
          parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
          const auto canonical = fmt::format("{}", fmt::join(parts, ";"));
          if (parts.size() == 1) {
            value = canonical;
          } else if (m.catch_all) {
            std::set<std::string> keep;
            for (const auto& k : m.keep) keep.insert(canonical_multi_answer(k, delims));
            value = keep.contains(canonical) ? canonical : *m.catch_all;
          } else {
            value = canonical;
          }
        } else if (m.exhaustive) {
          unmapped[m.characteristic].insert(value);
        }
      }
      if (value == kDrop) dropped.insert(a.annotator_id);
    }
  }
  if (!unmapped.empty()) {
    std::vector<std::string> parts;
    for (const auto& [name, values] : unmapped) {
      parts.push_back(fmt::format("{}: {}", name, fmt::join(values, ", ")));
    }
    throw DataError(fmt::format("unmapped values under exhaustive recode: {}", fmt::join(parts, "; ")));
  }
  return without_annotators(out, dropped);
}

Dataset drop_multi_membership(const Dataset& ds, std::string_view characteristic) {
  std::set<std::string> removed;
  for (const auto& a : ds.annotators) {
    const auto it = a.characteristics.find(std::string(characteristic));
    if (it == a.characteristics.end()) continue;
    if (split_any(it->second, ds.schema.multi_delimiters).size() > 1) removed.insert(a.annotator_id);
  }
  return without_annotators(ds, removed);
}

DatasetSummary summarize(const Dataset& ds) {
  DatasetSummary s;
  s.items = ds.items.size();
  s.annotations = ds.annotations.size();
  std::set<std::string> active;
  std::map<std::string, std::size_t> per_item;
  for (const auto& r : ds.annotations) {
    active.insert(r.annotator_id);
    ++per_item[r.item_id];
  }
  s.annotators = active.size();
  if (s.items == 0) return s;
  double sum = 0.0;
  for (const auto& item : ds.items) sum += static_cast<double>(per_item[item.item_id]);
  s.mean_annotators_per_item = sum / static_cast<double>(s.items);
  double ss = 0.0;
  for (const auto& item : ds.items) {
    const double d = static_cast<double>(per_item[item.item_id]) - s.mean_annotators_per_item;
    ss += d * d;
  }
  s.sd_annotators_per_item = std::sqrt(ss / static_cast<double>(s.items));
  return s;
}

std::pair<Dataset, Dataset> split_annotators(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
  const auto ids = annotator_ids(ds);
  std::vector<std::string> order(ids.begin(), ids.end());
  auto rng = make_stream(seed, 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto first_size =
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(order.size())));
  std::set<std::string> first(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(first_size));
  std::set<std::string> second(order.begin() + static_cast<std::ptrdiff_t>(first_size), order.end());
  const auto items = item_ids(ds);
  return {with_annotations_filtered(ds, items, first), with_annotations_filtered(ds, items, second)};
}

BatchSubsets batch_subsets(const Dataset& ds, std::size_t subset_size, std::size_t n_subsets,
                           std::uint64_t seed) {
  if (subset_size < 1) throw ConfigError("subset_size must be at least 1");
  std::map<std::string, std::set<std::string>> item_annotators;
  for (const auto& r : ds.annotations) item_annotators[r.item_id].insert(r.annotator_id);
  std::map<std::set<std::string>, std::vector<std::string>> groups;
  for (const auto& item : ds.items) {
    const auto it = item_annotators.find(item.item_id);
    if (it == item_annotators.end()) continue;
    groups[it->second].push_back(item.item_id);
  }

  std::vector<std::vector<std::string>> full;
  std::vector<std::vector<std::string>> partial;
  for (auto& [signature, items] : groups) {
    std::sort(items.begin(), items.end());
    for (std::size_t start = 0; start < items.size(); start += subset_size) {
      const auto end = std::min(items.size(), start + subset_size);
      std::vector<std::string> chunk(items.begin() + static_cast<std::ptrdiff_t>(start),
                                     items.begin() + static_cast<std::ptrdiff_t>(end));
      (chunk.size() == subset_size ? full : partial).push_back(std::move(chunk));
    }
  }

  BatchSubsets result;
  auto rng = make_stream(seed, 1);
  std::shuffle(full.begin(), full.end(), rng);
  std::vector<std::vector<std::string>> chosen;
  for (auto& chunk : full) {
    if (chosen.size() == n_subsets) break;
    chosen.push_back(std::move(chunk));
  }
  if (chosen.size() < n_subsets && !partial.empty()) {
    std::stable_sort(partial.begin(), partial.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });
    result.warnings.push_back(fmt::format(
        "only {} subsets of {} items available; adding smaller subsets", chosen.size(), subset_size));
    for (auto& chunk : partial) {
      if (chosen.size() == n_subsets) break;
      chosen.push_back(std::move(chunk));
    }
  }
  if (chosen.size() < n_subsets) {
    result.warnings.push_back(
        fmt::format("requested {} subsets but only {} could be formed", n_subsets, chosen.size()));
  }
  for (const auto& chunk : chosen) {
    const std::set<std::string> keep_items(chunk.begin(), chunk.end());
    std::set<std::string> keep_annotators;
    for (const auto& id : chunk) {
      const auto& a = item_annotators[id];
      keep_annotators.insert(a.begin(), a.end());
    }
    result.subsets.push_back(with_annotations_filtered(ds, keep_items, keep_annotators));
  }
  return result;
}

}  // namespace annolens::corpus
