#include "annolens/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "annolens/corpus.hpp"
#include "annolens/csv.hpp"
#include "annolens/design.hpp"
#include "annolens/error.hpp"
#include "annolens/feature_matrix.hpp"
#include "annolens/hsmlm/fit.hpp"
#include "annolens/lexicon.hpp"
#include "annolens/select.hpp"
#include "annolens/tokenize.hpp"
#include "annolens/util.hpp"
#include "annolens/version.hpp"

namespace annolens::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Strict view of one config object: unknown keys and wrong types are errors.
class Section {
 public:
  Section(const json* j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
    if (!j_) return;
    if (!j_->is_object()) throw ConfigError(fmt::format("config: '{}' must be an object", path_));
    for (const auto& [k, v] : j_->items()) {
      if (!allowed.count(k)) throw ConfigError(fmt::format("config: unknown key '{}{}'", prefix(), k));
    }
  }

  bool has(const char* key) const { return j_ && j_->contains(key); }
  const json* child(const char* key) const { return has(key) ? &j_->at(key) : nullptr; }
  std::string name(const char* key) const { return prefix() + key; }

  template <typename T>
  T get(const char* key, T fallback) const {
    if (!has(key)) return fallback;
    try {
      return j_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(fmt::format("config: '{}' has the wrong type", name(key)));
    }
  }

 private:
  std::string prefix() const { return path_.empty() ? "" : path_ + "."; }
  const json* j_;
  std::string path_;
};

std::vector<LexiconRef> lexicon_refs(const Section& s, const char* key) {
  std::vector<LexiconRef> out;
  const auto* arr = s.child(key);
  if (!arr) return out;
  if (!arr->is_array()) throw ConfigError(fmt::format("config: '{}' must be a list", s.name(key)));
  for (const auto& e : *arr) {
    Section item(&e, s.name(key) + "[]", {"name", "path"});
    LexiconRef r{item.get<std::string>("name", ""), item.get<std::string>("path", "")};
    if (r.name.empty() || r.path.empty()) throw ConfigError(fmt::format("config: '{}' entries need name and path", s.name(key)));
    out.push_back(std::move(r));
  }
  return out;
}

const std::vector<std::string> kScenarios{"full", "annotator-split", "batch-subsets"};

void require_file(const std::string& path, std::string_view what) {
  if (!fs::exists(path)) throw ConfigError(fmt::format("{} not found: {}", what, path));
}

std::string rel(const std::string& out, const fs::path& p) { return fs::relative(p, out).generic_string(); }

// ---- run bookkeeping -------------------------------------------------------

void append_log(const RunConfig& cfg, std::string_view line) {
  fs::create_directories(cfg.out);
  std::ofstream log(fs::path(cfg.out) / "run.log", std::ios::app);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  log << stamp << ' ' << line << '\n';
}

void record_stage(const RunConfig& cfg, const std::string& stage) {
  const auto mpath = (fs::path(cfg.out) / "manifest.json").string();
  ordered_json m;
  if (fs::exists(mpath)) {
    try {
      m = ordered_json::parse(csv::read_text(mpath));
    } catch (const json::exception&) {
      m = ordered_json();
    }
  }
  m["tool"] = "annolens";
  m["version"] = std::string(kVersion);
  m["config_hash"] = cfg.config_hash();
  m["config"] = cfg.canonical;
  ordered_json outputs = ordered_json::object();
  const fs::path dir = fs::path(cfg.out) / stage;
  if (fs::exists(dir)) {
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) {
      if (it->is_directory() && it->path().filename() == "checkpoints") {
        it.disable_recursion_pending();
        continue;
      }
      if (it->is_regular_file()) files.push_back(it->path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) outputs[rel(cfg.out, f)] = hex64(fnv1a64(csv::read_text(f.string())));
  }
  if (!m.contains("stages")) m["stages"] = ordered_json::object();
  m["stages"][stage] = {{"outputs", outputs}};
  // keep stage entries in pipeline order
  ordered_json sorted = ordered_json::object();
  for (const auto& s : stage_names()) {
    if (m["stages"].contains(s)) sorted[s] = m["stages"][s];
  }
  m["stages"] = sorted;
  csv::write_text(mpath, m.dump(2) + "\n");
}

fs::path stage_dir(const RunConfig& cfg, std::string_view stage) { return fs::path(cfg.out) / std::string(stage); }

std::string prerequisite(const RunConfig& cfg, std::string_view stage, const fs::path& p, std::string_view needs) {
  if (!fs::exists(p)) {
    throw ConfigError(fmt::format("{}: missing {}; run the '{}' stage first", stage, rel(cfg.out, p), needs));
  }
  return p.string();
}

std::vector<std::string> units(const RunConfig& cfg, std::string_view stage) {
  const auto path = prerequisite(cfg, stage, stage_dir(cfg, "preprocess") / "units.json", "preprocess");
  return json::parse(csv::read_text(path)).get<std::vector<std::string>>();
}

void write_json(const fs::path& p, const ordered_json& j) { csv::write_text(p.string(), j.dump(2) + "\n"); }

// ---- stages ----------------------------------------------------------------

corpus::Dataset load_raw(const RunConfig& cfg) {
  for (const auto& [p, what] : {std::pair{cfg.schema, "schema"}, std::pair{cfg.annotations, "annotation file"},
                                std::pair{cfg.profiles, "profile file"}, std::pair{cfg.items, "item file"}}) {
    require_file(p, what);
  }
  const auto schema = corpus::load_schema(cfg.schema);
  return corpus::load_dataset(cfg.annotations, cfg.profiles, cfg.items, schema, cfg.delimiter);
}

lexfeat::FeatureResources load_resources(const RunConfig& cfg) {
  lexfeat::FeatureResources r;
  for (const auto& l : cfg.norms) {
    require_file(l.path, "lexicon");
    r.norms.push_back(lexfeat::load_value_lexicon(l.path, l.name));
  }
  for (const auto& l : cfg.emotions) {
    require_file(l.path, "lexicon");
    r.emotions.push_back(lexfeat::load_value_lexicon(l.path, l.name));
  }
  for (const auto& l : cfg.domain) {
    require_file(l.path, "lexicon");
    r.domain.push_back(lexfeat::load_category_lexicon(l.path, l.name));
  }
  if (!cfg.sentiment.empty()) {
    require_file(cfg.sentiment, "lexicon");
    r.sentiment = lexfeat::load_category_lexicon(cfg.sentiment, "sentiment");
  }
  if (!cfg.synsets.empty()) {
    require_file(cfg.synsets, "lexicon");
    r.synsets = lexfeat::load_unbounded_value_lexicon(cfg.synsets, "synsets");
  }
  if (!cfg.hedges.empty()) {
    require_file(cfg.hedges, "hedge list");
    r.hedges = lexfeat::load_phrase_list(cfg.hedges);
  }
  return r;
}

void stage_validate(const RunConfig& cfg) {
  const auto ds = load_raw(cfg);
  corpus::check_integrity(ds);
  const auto violations = corpus::schema_violations(ds);
  for (const auto& v : violations) spdlog::error("validate: {}", v);
  if (!cfg.recode.empty()) {
    require_file(cfg.recode, "recode map");
    corpus::load_recode_maps(cfg.recode);
  }
  if (!cfg.conllu.empty()) require_file(cfg.conllu, "CoNLL-U file");
  if (!cfg.picks.empty()) require_file(cfg.picks, "picks file");
  load_resources(cfg);
  const auto s = corpus::summarize(ds);
  spdlog::info("validate: {} items, {} annotators, {} annotations", s.items, s.annotators, s.annotations);
  if (!violations.empty()) throw DataError(fmt::format("{} schema violations", violations.size()));
}

void stage_preprocess(const RunConfig& cfg) {
  auto ds = load_raw(cfg);
  corpus::check_integrity(ds);
  if (!cfg.recode.empty()) {
    require_file(cfg.recode, "recode map");
    ds = corpus::recode(ds, corpus::load_recode_maps(cfg.recode));
  }
  ds = corpus::drop_missing_and_pna(ds, ds.schema.pna_tokens);
  for (const auto& c : cfg.drop_multi) ds = corpus::drop_multi_membership(ds, c);
  ds = corpus::drop_conflicting_annotators(ds);
  ds = corpus::filter_by_participation(ds, cfg.min_items_per_annotator, cfg.min_annotators_per_item);
  const auto violations = corpus::schema_violations(ds);
  if (!violations.empty()) {
    for (const auto& v : violations) spdlog::error("preprocess: {}", v);
    throw DataError(fmt::format("{} schema violations after preprocessing", violations.size()));
  }

  std::vector<std::pair<std::string, corpus::Dataset>> parts;
  if (cfg.scenario == "full") {
    parts.emplace_back("full", ds);
  } else if (cfg.scenario == "annotator-split") {
    auto [a, b] = corpus::split_annotators(ds, cfg.split_fraction, cfg.seed);
    parts.emplace_back("split-a", std::move(a));
    parts.emplace_back("split-b", std::move(b));
  } else {
    if (cfg.batch_size == 0 || cfg.n_batches == 0) {
      throw ConfigError("batch-subsets needs preprocess.batch_size and preprocess.n_batches");
    }
    auto b = corpus::batch_subsets(ds, cfg.batch_size, cfg.n_batches, cfg.seed);
    for (const auto& w : b.warnings) spdlog::warn("preprocess: {}", w);
    for (std::size_t k = 0; k < b.subsets.size(); ++k) parts.emplace_back(fmt::format("batch-{:02}", k + 1), b.subsets[k]);
  }

  const auto dir = stage_dir(cfg, "preprocess");
  fs::remove_all(dir);
  std::vector<std::string> names;
  ordered_json summary = ordered_json::object();
  for (const auto& [name, part] : parts) {
    corpus::write_dataset(part, (dir / name).string());
    names.push_back(name);
    const auto s = corpus::summarize(part);
    summary[name] = {{"items", s.items},
                     {"annotators", s.annotators},
                     {"annotations", s.annotations},
                     {"mean_annotators_per_item", format_number(s.mean_annotators_per_item)},
                     {"sd_annotators_per_item", format_number(s.sd_annotators_per_item)}};
    spdlog::info("preprocess: {}: {} items, {} annotators, {} annotations", name, s.items, s.annotators,
                 s.annotations);
  }
  write_json(dir / "units.json", ordered_json(names));
  write_json(dir / "summary.json", summary);
}

void stage_features(const RunConfig& cfg) {
  std::map<std::string, std::string> texts;
  for (const auto& u : units(cfg, "features")) {
    const auto ds = corpus::read_dataset_dir((stage_dir(cfg, "preprocess") / u).string());
    for (const auto& it : ds.items) texts.emplace(it.item_id, it.text);
  }
  std::vector<lexfeat::TokenizedItem> items;
  if (!cfg.conllu.empty()) {
    require_file(cfg.conllu, "CoNLL-U file");
    std::map<std::string, lexfeat::TokenizedItem> parsed;
    for (auto& t : lexfeat::ingest_conllu(cfg.conllu)) parsed.emplace(t.item_id, std::move(t));
    for (const auto& [id, text] : texts) {
      auto it = parsed.find(id);
      if (it == parsed.end()) throw DataError(fmt::format("features: item '{}' missing from {}", id, cfg.conllu));
      items.push_back(std::move(it->second));
    }
  } else {
    for (const auto& [id, text] : texts) items.push_back(lexfeat::tokenize(text, id));
  }
  const auto res = load_resources(cfg);
  const auto raw = lexfeat::extract_features(items, res, static_cast<unsigned>(std::max(1, cfg.jobs)));
  const auto dir = stage_dir(cfg, "features");
  fs::remove_all(dir);
  lexfeat::write_feature_matrix(raw, (dir / "features_raw.csv").string());
  const auto z = lexfeat::standardize(lexfeat::normalize_counts(raw));
  lexfeat::write_feature_matrix(z, (dir / "features.csv").string());
  spdlog::info("features: {} items, {} columns ({} constant columns dropped)", z.rows(), z.cols(), z.dropped.size());
}

void stage_select(const RunConfig& cfg) {
  auto f = lexfeat::read_feature_matrix(
      prerequisite(cfg, "select", stage_dir(cfg, "features") / "features.csv", "features"));
  if (!cfg.feature_include.empty()) {
    std::vector<std::string> keep;
    for (const auto& n : cfg.feature_include) {
      if (f.column(n) < 0) {
        spdlog::warn("select: included feature '{}' is not in the matrix (constant or absent)", n);
        continue;
      }
      keep.push_back(n);
    }
    f = lexfeat::select_columns(f, keep);
  }
  const auto dir = stage_dir(cfg, "select");
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto report = select::build_report(select::correlation_matrix(f, static_cast<unsigned>(std::max(1, cfg.jobs))),
                                     cfg.threshold, cfg.cut);
  csv::write_text((dir / "picks_template.tsv").string(), select::picks_template(report));
  if (!report.clusters.empty()) {
    if (cfg.picks.empty()) {
      write_json(dir / "clusters.json", select::report_to_json(report));
      csv::write_text((dir / "clusters.txt").string(), select::format_report(report));
      throw ConfigError(fmt::format("select: {} clusters need a representative; fill in {} and set select.picks",
                                    report.clusters.size(), rel(cfg.out, dir / "picks_template.tsv")));
    }
    require_file(cfg.picks, "picks file");
    report = select::with_picks(report, select::load_picks(cfg.picks));
  }
  write_json(dir / "clusters.json", select::report_to_json(report));
  csv::write_text((dir / "clusters.txt").string(), select::format_report(report));
  const auto sel = select::apply_selection(f, report);
  lexfeat::write_feature_matrix(sel.matrix, (dir / "selected.csv").string());
  spdlog::info("select: kept {} of {} features", sel.matrix.cols(), f.cols());
}

void stage_design(const RunConfig& cfg) {
  const auto f = lexfeat::read_feature_matrix(
      prerequisite(cfg, "design", stage_dir(cfg, "select") / "selected.csv", "select"));
  const auto dir = stage_dir(cfg, "design");
  fs::remove_all(dir);
  for (const auto& u : units(cfg, "design")) {
    const auto ds = corpus::read_dataset_dir((stage_dir(cfg, "preprocess") / u).string());
    const auto d = design::build_design(f, ds);
    design::write_design(d, (dir / u).string());
    spdlog::info("design: {}: {} observations, {} effects ({} dropped)", u, d.x.rows(), design::count_effects(d),
                 d.dropped.size());
  }
}

ordered_json diagnostics_json(const hsmlm::DiagnosticsReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? ordered_json(format_number(v)) : ordered_json(nullptr); };
  ordered_json j;
  j["divergences"] = r.divergences;
  j["treedepth_hits"] = r.treedepth_hits;
  j["total_draws"] = r.total_draws;
  auto& ps = j["params"] = ordered_json::array();
  for (const auto& p : r.params) {
    ps.push_back({{"name", p.name}, {"rhat", num(p.rhat)}, {"ess_bulk", num(p.ess_bulk)}, {"ess_tail", num(p.ess_tail)}});
  }
  return j;
}

hsmlm::DiagnosticsReport diagnostics_from_json(const json& j) {
  auto num = [](const json& v) { return v.is_null() ? std::nan("") : std::stod(v.get<std::string>()); };
  hsmlm::DiagnosticsReport r;
  r.divergences = j.at("divergences").get<int>();
  r.treedepth_hits = j.at("treedepth_hits").get<int>();
  r.total_draws = j.at("total_draws").get<int>();
  for (const auto& p : j.at("params")) {
    r.params.push_back({p.at("name").get<std::string>(), num(p.at("rhat")), num(p.at("ess_bulk")), num(p.at("ess_tail"))});
  }
  return r;
}

void stage_fit(const RunConfig& cfg) {
  const auto dir = stage_dir(cfg, "fit");
  for (const auto& u : units(cfg, "fit")) {
    const auto design_dir = stage_dir(cfg, "design") / u;
    prerequisite(cfg, "fit", design_dir / "manifest.json", "design");
    const auto d = design::read_design(design_dir.string());
    hsmlm::FitOptions o;
    o.sampler = cfg.sampler;
    o.include_latent = cfg.save_latent;
    if (cfg.sampler.checkpoint_every > 0) o.checkpoint_dir = (dir / u / "checkpoints").string();
    spdlog::info("fit: {}: {} chains x ({} warmup + {} draws), {} parameters", u, o.sampler.chains, o.sampler.warmup,
                 o.sampler.draws, hsmlm::Layout{d.x.cols(), static_cast<Eigen::Index>(d.annotator_ids.size()),
                                                static_cast<Eigen::Index>(d.item_ids.size())}
                                      .dimension());
    const auto res = hsmlm::fit_design(d, o);
    const auto udir = dir / u;
    fs::create_directories(udir);
    hsmlm::write_draws_csv(res.draws, (udir / "draws.csv").string());
    write_json(udir / "diagnostics.json", diagnostics_json(res.diagnostics));
    const auto& h = res.hyper;
    ordered_json info;
    info["hyper"] = {{"local_df", h.local_df},         {"global_df", h.global_df},
                     {"global_scale", h.global_scale}, {"slab_df", h.slab_df},
                     {"slab_scale", h.slab_scale},     {"sd_df", h.sd_df},
                     {"sd_scale", h.sd_scale},         {"intercept_df", h.intercept_df},
                     {"intercept_loc", format_number(h.intercept_loc)},
                     {"intercept_scale", format_number(h.intercept_scale)}};
    info["sampler"] = cfg.sampler.fingerprint();
    info["step_sizes"] = ordered_json::array();
    for (const auto& c : res.draws.chains) info["step_sizes"].push_back(format_number(c.step_size));
    info["warnings"] = res.warnings;
    write_json(udir / "fit.json", info);
    spdlog::info("fit: {}: {} divergences, max R-hat {:.3f}", u, res.diagnostics.divergences,
                 res.diagnostics.max_rhat());
  }
}

void stage_summarize(const RunConfig& cfg) {
  const auto dir = stage_dir(cfg, "summarize");
  fs::remove_all(dir);
  for (const auto& u : units(cfg, "summarize")) {
    const auto draws = hsmlm::read_draws_csv(prerequisite(cfg, "summarize", stage_dir(cfg, "fit") / u / "draws.csv", "fit"));
    const auto d = design::read_design((stage_dir(cfg, "design") / u).string());
    const auto s = posterior::summarize(draws, d.columns, cfg.rule);
    posterior::write_summary_csv(s, (dir / u / "summary.csv").string());
    posterior::write_forest_csv(s, (dir / u / "forest.csv").string());
    spdlog::info("summarize: {}: {} of {} effects survive", u, posterior::survivors(s).size(), s.size());
  }
}

std::string file_stem(std::string_view target) {
  std::string s;
  for (char c : target) s += std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-' ? c : '_';
  return s;
}

void stage_predict(const RunConfig& cfg) {
  const auto dir = stage_dir(cfg, "predict");
  fs::remove_all(dir);
  for (const auto& u : units(cfg, "predict")) {
    const auto draws = hsmlm::read_draws_csv(prerequisite(cfg, "predict", stage_dir(cfg, "fit") / u / "draws.csv", "fit"));
    const auto d = design::read_design((stage_dir(cfg, "design") / u).string());
    auto targets = cfg.grids;
    if (targets.empty()) {
      const auto s = posterior::read_summary_csv(
          prerequisite(cfg, "predict", stage_dir(cfg, "summarize") / u / "summary.csv", "summarize"));
      for (const auto& e : posterior::survivors(s)) {
        if (e.origin == "L:S") targets.push_back(e.effect);
      }
    }
    fs::create_directories(dir / u);
    for (const auto& t : targets) {
      const auto g = posterior::predict_grid(draws, d, t);
      posterior::write_grid_csv(g, (dir / u / ("grid_" + file_stem(t) + ".csv")).string());
    }
    spdlog::info("predict: {}: {} grids", u, targets.size());
  }
}

void stage_report(const RunConfig& cfg) {
  const auto dir = stage_dir(cfg, "report");
  fs::remove_all(dir);
  for (const auto& u : units(cfg, "report")) {
    const auto s = posterior::read_summary_csv(
        prerequisite(cfg, "report", stage_dir(cfg, "summarize") / u / "summary.csv", "summarize"));
    const auto diag = diagnostics_from_json(json::parse(csv::read_text(
        prerequisite(cfg, "report", stage_dir(cfg, "fit") / u / "diagnostics.json", "fit"))));
    std::string text = fmt::format("annolens {} report: {} (scenario {})\n\n", kVersion, u, cfg.scenario);
    text += posterior::format_report(s, &diag, cfg.rule);
    csv::write_text((dir / u / "report.txt").string(), text);
  }
}

void stage_simcheck(const RunConfig& cfg) {
  const auto dir = stage_dir(cfg, "simcheck");
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto spec = cfg.recovery;
  spec.seed = cfg.seed;
  const auto syn = simcheck::generate(spec);
  hsmlm::FitOptions o;
  o.sampler = cfg.sampler;
  const auto fit = hsmlm::fit(syn.data, syn.effects, hsmlm::HorseshoeHyper::for_outcome(syn.data.y), o);
  const auto rec = simcheck::recovery_report(fit.draws, syn.effects, syn.truth, cfg.rule);
  auto rj = simcheck::to_json(rec);
  rj["divergences"] = fit.diagnostics.divergences;
  write_json(dir / "recovery.json", rj);
  spdlog::info("simcheck: recovered {} of {} effects, {} false positives", rec.recovered, rec.support.size(),
               rec.false_positives);
  if (cfg.run_sbc) {
    auto sbc = cfg.sbc;
    sbc.seed = cfg.seed;
    sbc.jobs = cfg.jobs;
    const auto r = simcheck::sbc(sbc, simcheck::nuts_fitter(sbc.sampler));
    write_json(dir / "sbc.json", simcheck::to_json(r));
    for (std::size_t k = 0; k < r.params.size(); ++k) {
      spdlog::info("simcheck: sbc {} p = {:.4f}", r.params[k], r.p_value[k]);
    }
  }
}

}  // namespace

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(base_dir) / p).lexically_normal().string();
}

std::string RunConfig::config_hash() const { return hex64(fnv1a64(canonical.dump())); }

RunConfig parse_config(const json& j, const std::string& base_dir, const Overrides& o) {
  RunConfig c;
  c.base_dir = base_dir;
  Section top(&j, "", {"seed", "out", "jobs", "scenario", "data", "lexicons", "preprocess", "features", "select",
                       "sampler", "posterior", "simcheck"});
  if (!top.has("seed") && !o.seed) throw ConfigError("config: 'seed' is required");
  c.seed = o.seed ? *o.seed : top.get<std::uint64_t>("seed", 0);
  c.out = o.out ? *o.out : c.resolve(top.get<std::string>("out", "out"));
  c.jobs = o.jobs ? *o.jobs : top.get<int>("jobs", 1);
  if (c.jobs < 1) throw ConfigError("config: jobs must be at least 1");
  c.scenario = o.scenario ? *o.scenario : top.get<std::string>("scenario", "full");
  if (std::find(kScenarios.begin(), kScenarios.end(), c.scenario) == kScenarios.end()) {
    throw ConfigError(fmt::format("config: unknown scenario '{}' (full, annotator-split, batch-subsets)", c.scenario));
  }

  Section data(top.child("data"), "data", {"annotations", "profiles", "items", "schema", "delimiter", "recode", "conllu"});
  if (!top.has("data")) throw ConfigError("config: 'data' section is required");
  c.annotations = c.resolve(data.get<std::string>("annotations", ""));
  c.profiles = c.resolve(data.get<std::string>("profiles", ""));
  c.items = c.resolve(data.get<std::string>("items", ""));
  c.schema = c.resolve(data.get<std::string>("schema", ""));
  for (const auto* k : {"annotations", "profiles", "items", "schema"}) {
    if (!data.has(k)) throw ConfigError(fmt::format("config: 'data.{}' is required", k));
  }
  const auto delim = data.get<std::string>("delimiter", ",");
  if (delim == "\\t" || delim == "tab") {
    c.delimiter = '\t';
  } else if (delim.size() == 1) {
    c.delimiter = delim[0];
  } else {
    throw ConfigError("config: 'data.delimiter' must be one character");
  }
  c.recode = c.resolve(data.get<std::string>("recode", ""));
  c.conllu = c.resolve(data.get<std::string>("conllu", ""));

  Section lex(top.child("lexicons"), "lexicons", {"norms", "emotions", "domain", "sentiment", "synsets", "hedges"});
  c.norms = lexicon_refs(lex, "norms");
  c.emotions = lexicon_refs(lex, "emotions");
  c.domain = lexicon_refs(lex, "domain");
  for (auto* v : {&c.norms, &c.emotions, &c.domain}) {
    for (auto& r : *v) r.path = c.resolve(r.path);
  }
  c.sentiment = c.resolve(lex.get<std::string>("sentiment", ""));
  c.synsets = c.resolve(lex.get<std::string>("synsets", ""));
  c.hedges = c.resolve(lex.get<std::string>("hedges", ""));

  Section pre(top.child("preprocess"), "preprocess",
              {"min_items_per_annotator", "min_annotators_per_item", "drop_multi", "split_fraction", "batch_size",
               "n_batches"});
  c.min_items_per_annotator = pre.get<std::size_t>("min_items_per_annotator", 10);
  c.min_annotators_per_item = pre.get<std::size_t>("min_annotators_per_item", 3);
  c.drop_multi = pre.get<std::vector<std::string>>("drop_multi", {});
  c.split_fraction = pre.get<double>("split_fraction", 0.5);
  if (!(c.split_fraction > 0 && c.split_fraction < 1)) throw ConfigError("config: split_fraction must be in (0, 1)");
  c.batch_size = pre.get<std::size_t>("batch_size", 0);
  c.n_batches = pre.get<std::size_t>("n_batches", 0);

  Section feat(top.child("features"), "features", {"include"});
  c.feature_include = feat.get<std::vector<std::string>>("include", {});

  Section sel(top.child("select"), "select", {"threshold", "cut", "picks"});
  c.threshold = sel.get<double>("threshold", 0.5);
  c.cut = sel.get<double>("cut", 0.5);
  c.picks = c.resolve(sel.get<std::string>("picks", ""));

  Section smp(top.child("sampler"), "sampler",
              {"chains", "warmup", "draws", "target_accept", "max_depth", "checkpoint_every", "init_radius",
               "save_latent"});
  c.sampler.chains = smp.get<int>("chains", 4);
  c.sampler.warmup = smp.get<int>("warmup", 2000);
  c.sampler.draws = smp.get<int>("draws", 7500);
  c.sampler.target_accept = smp.get<double>("target_accept", 0.8);
  c.sampler.max_depth = smp.get<int>("max_depth", 10);
  c.sampler.checkpoint_every = smp.get<int>("checkpoint_every", 0);
  c.sampler.init_radius = smp.get<double>("init_radius", 2.0);
  c.sampler.seed = c.seed;
  c.sampler.jobs = c.jobs;
  c.save_latent = smp.get<bool>("save_latent", false);
  c.sampler.validate();

  Section post(top.child("posterior"), "posterior", {"survivor_level", "survivor_interval", "grids"});
  c.rule.level = post.get<double>("survivor_level", 0.9);
  if (!(c.rule.level > 0 && c.rule.level < 1)) throw ConfigError("config: survivor_level must be in (0, 1)");
  const auto interval = post.get<std::string>("survivor_interval", "equal_tailed");
  if (interval != "equal_tailed" && interval != "hdi") {
    throw ConfigError("config: survivor_interval must be 'equal_tailed' or 'hdi'");
  }
  c.rule.use_hdi = interval == "hdi";
  c.grids = post.get<std::vector<std::string>>("grids", {});

  Section sim(top.child("simcheck"), "simcheck", {"recovery", "sbc"});
  Section rec(sim.child("recovery"), "simcheck.recovery",
              {"n_annotators", "n_items", "annotations_per_item", "p", "support", "magnitudes", "intercept", "sigma",
               "sd_annotator", "sd_item"});
  auto& r = c.recovery;
  r.n_annotators = rec.get<int>("n_annotators", 200);
  r.n_items = rec.get<int>("n_items", 200);
  r.annotations_per_item = rec.get<int>("annotations_per_item", 10);
  r.p = rec.get<int>("p", 50);
  r.support = rec.get<std::vector<int>>("support", {3, 11, 22, 35, 47});
  r.magnitudes = rec.get<std::vector<double>>("magnitudes", {0.5, -0.5, 0.5, -0.5, 0.5});
  r.intercept = rec.get<double>("intercept", 0.0);
  r.sigma = rec.get<double>("sigma", 1.0);
  r.sd_annotator = rec.get<double>("sd_annotator", 0.3);
  r.sd_item = rec.get<double>("sd_item", 0.3);
  r.seed = c.seed;
  r.validate();
  Section sbc(sim.child("sbc"), "simcheck.sbc",
              {"enabled", "n_sims", "n_ranks", "bins", "chains", "warmup", "draws", "target_accept"});
  c.run_sbc = sbc.get<bool>("enabled", false);
  c.sbc.n_sims = sbc.get<int>("n_sims", 200);
  c.sbc.n_ranks = sbc.get<int>("n_ranks", 99);
  c.sbc.bins = sbc.get<int>("bins", 20);
  c.sbc.sampler.chains = sbc.get<int>("chains", c.sbc.sampler.chains);
  c.sbc.sampler.warmup = sbc.get<int>("warmup", c.sbc.sampler.warmup);
  c.sbc.sampler.draws = sbc.get<int>("draws", c.sbc.sampler.draws);
  c.sbc.sampler.target_accept = sbc.get<double>("target_accept", c.sbc.sampler.target_accept);
  c.sbc.seed = c.seed;
  if (c.run_sbc) c.sbc.validate();

  c.canonical = ordered_json(j);
  c.canonical.erase("out");
  c.canonical.erase("jobs");
  c.canonical["seed"] = c.seed;
  c.canonical["scenario"] = c.scenario;
  // every numeric setting after defaults, so the manifest is auditable on its own
  c.canonical["effective"] = {
      {"preprocess",
       {{"min_items_per_annotator", c.min_items_per_annotator},
        {"min_annotators_per_item", c.min_annotators_per_item},
        {"drop_multi", c.drop_multi},
        {"split_fraction", format_number(c.split_fraction)},
        {"batch_size", c.batch_size},
        {"n_batches", c.n_batches}}},
      {"select", {{"threshold", format_number(c.threshold)}, {"cut", format_number(c.cut)}}},
      {"sampler",
       {{"chains", c.sampler.chains},
        {"warmup", c.sampler.warmup},
        {"draws", c.sampler.draws},
        {"target_accept", format_number(c.sampler.target_accept)},
        {"max_depth", c.sampler.max_depth},
        {"init_radius", format_number(c.sampler.init_radius)},
        {"checkpoint_every", c.sampler.checkpoint_every}}},
      {"posterior",
       {{"survivor_level", format_number(c.rule.level)}, {"survivor_interval", c.rule.use_hdi ? "hdi" : "equal_tailed"}}}};
  return c;
}

RunConfig load_config(const std::string& path, const Overrides& o) {
  require_file(path, "config file");
  json j;
  try {
    j = json::parse(csv::read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  auto base = fs::path(path).parent_path().string();
  if (base.empty()) base = ".";
  return parse_config(j, base, o);
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"validate", "preprocess", "features", "select", "design",
                                              "fit",      "summarize",  "predict",  "report", "simcheck"};
  return names;
}

void run_stage(std::string_view stage, const RunConfig& cfg) {
  if (stage == "all") {
    for (const auto* s : {"preprocess", "features", "select", "design", "fit", "summarize", "predict", "report"}) {
      run_stage(s, cfg);
    }
    return;
  }
  using Fn = void (*)(const RunConfig&);
  static const std::map<std::string, Fn, std::less<>> table{
      {"validate", stage_validate}, {"preprocess", stage_preprocess}, {"features", stage_features},
      {"select", stage_select},     {"design", stage_design},         {"fit", stage_fit},
      {"summarize", stage_summarize}, {"predict", stage_predict},     {"report", stage_report},
      {"simcheck", stage_simcheck}};
  const auto it = table.find(stage);
  if (it == table.end()) throw ConfigError(fmt::format("unknown stage '{}'", stage));
  append_log(cfg, fmt::format("start {} seed={} config={}", stage, cfg.seed, cfg.config_hash()));
  it->second(cfg);
  if (stage != "validate") record_stage(cfg, std::string(stage));
  append_log(cfg, fmt::format("done {}", stage));
}

}  // namespace annolens::pipeline
