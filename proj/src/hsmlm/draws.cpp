#include "annolens/hsmlm/draws.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "annolens/csv.hpp"
#include "annolens/error.hpp"
#include "annolens/util.hpp"
#include "json.hpp"

namespace annolens::hsmlm {

namespace fs = std::filesystem;
using nlohmann::json;

void SamplerConfig::validate() const {
  if (chains < 1 || warmup < 0 || draws < 1 || max_depth < 1 || max_init_tries < 1 || jobs < 0) {
    throw ConfigError("sampler: chains, draws, max_depth and init tries must be positive, warmup non-negative");
  }
  if (!(target_accept > 0 && target_accept < 1)) throw ConfigError("sampler: target acceptance must be in (0, 1)");
  if (!(init_radius > 0) || !(init_step_size > 0)) throw ConfigError("sampler: init radius and step size must be positive");
  if (checkpoint_every < 0) throw ConfigError("sampler: checkpoint interval must be non-negative");
}

std::string SamplerConfig::fingerprint() const {
  return fmt::format("warmup={};draws={};delta={};depth={};seed={};radius={};eps0={}", warmup, draws,
                     format_number(target_accept), max_depth, seed, format_number(init_radius),
                     format_number(init_step_size));
}

int PosteriorDraws::n_draws() const {
  if (chains.empty()) return 0;
  const auto n = chains.front().draws.rows();
  for (const auto& c : chains) {
    if (c.draws.rows() != n) throw DataError("chains have different numbers of draws");
  }
  return static_cast<int>(n);
}

Eigen::Index PosteriorDraws::index(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return static_cast<Eigen::Index>(k);
  }
  return -1;
}

Eigen::MatrixXd PosteriorDraws::by_chain(Eigen::Index param) const {
  const int n = n_draws();
  Eigen::MatrixXd out(n, n_chains());
  for (int c = 0; c < n_chains(); ++c) out.col(c) = chains[static_cast<std::size_t>(c)].draws.col(param);
  return out;
}

Eigen::VectorXd PosteriorDraws::pooled(Eigen::Index param) const {
  const auto m = by_chain(param);
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

Eigen::VectorXd PosteriorDraws::pooled(std::string_view name) const {
  const auto k = index(name);
  if (k < 0) throw DataError(fmt::format("no parameter named '{}' in draws", name));
  return pooled(k);
}

int PosteriorDraws::divergences() const {
  int n = 0;
  for (const auto& c : chains) {
    for (const auto& s : c.stats) n += s.divergent ? 1 : 0;
  }
  return n;
}

int PosteriorDraws::treedepth_hits(int max_depth) const {
  int n = 0;
  for (const auto& c : chains) {
    for (const auto& s : c.stats) n += s.treedepth >= max_depth ? 1 : 0;
  }
  return n;
}

namespace {

const std::vector<std::string> kStatColumns{"lp__",        "accept_stat__", "stepsize__", "treedepth__",
                                            "n_leapfrog__", "divergent__",  "energy__"};

}  // namespace

void write_draws_csv(const PosteriorDraws& d, const std::string& path) {
  std::ostringstream out;
  csv::Row header{"chain", "draw"};
  header.insert(header.end(), kStatColumns.begin(), kStatColumns.end());
  header.insert(header.end(), d.names.begin(), d.names.end());
  csv::write_row(out, header);
  for (const auto& c : d.chains) {
    if (c.draws.cols() != static_cast<Eigen::Index>(d.names.size())) throw DataError("draws width does not match names");
    for (Eigen::Index r = 0; r < c.draws.rows(); ++r) {
      const auto& s = c.stats[static_cast<std::size_t>(r)];
      csv::Row row{std::to_string(c.chain), std::to_string(r),     format_number(s.lp),
                   format_number(s.accept_stat), format_number(s.step_size), std::to_string(s.treedepth),
                   std::to_string(s.n_leapfrog), s.divergent ? "1" : "0", format_number(s.energy)};
      for (Eigen::Index k = 0; k < c.draws.cols(); ++k) row.push_back(format_number(c.draws(r, k)));
      csv::write_row(out, row);
    }
  }
  csv::write_text(path, out.str());
}

PosteriorDraws read_draws_csv(const std::string& path) {
  const auto t = csv::read_file(path);
  const std::size_t fixed = 2 + kStatColumns.size();
  if (t.header.size() < fixed || t.header[0] != "chain" || t.header[1] != "draw") {
    throw DataError(path + ": not a draws file");
  }
  for (std::size_t k = 0; k < kStatColumns.size(); ++k) {
    if (t.header[2 + k] != kStatColumns[k]) throw DataError(path + ": unexpected column " + t.header[2 + k]);
  }
  PosteriorDraws d;
  d.names.assign(t.header.begin() + static_cast<std::ptrdiff_t>(fixed), t.header.end());
  std::vector<std::vector<std::vector<double>>> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = fmt::format("{}:{}", path, t.line_of[r]);
    const int chain = static_cast<int>(parse_number(row[0], where));
    if (chain < 0) throw DataError(where + ": negative chain");
    while (static_cast<int>(d.chains.size()) <= chain) {
      d.chains.emplace_back();
      d.chains.back().chain = static_cast<int>(d.chains.size()) - 1;
      d.chains.back().complete = true;
      rows.emplace_back();
    }
    auto& c = d.chains[static_cast<std::size_t>(chain)];
    SamplerStats s;
    s.lp = parse_number(row[2], where);
    s.accept_stat = parse_number(row[3], where);
    s.step_size = parse_number(row[4], where);
    s.treedepth = static_cast<int>(parse_number(row[5], where));
    s.n_leapfrog = static_cast<int>(parse_number(row[6], where));
    s.divergent = parse_number(row[7], where) != 0;
    s.energy = parse_number(row[8], where);
    c.stats.push_back(s);
    std::vector<double> v;
    for (std::size_t k = fixed; k < row.size(); ++k) v.push_back(parse_number(row[k], where));
    rows[static_cast<std::size_t>(chain)].push_back(std::move(v));
  }
  for (std::size_t c = 0; c < d.chains.size(); ++c) {
    auto& m = d.chains[c].draws;
    m.resize(static_cast<Eigen::Index>(rows[c].size()), static_cast<Eigen::Index>(d.names.size()));
    for (std::size_t r = 0; r < rows[c].size(); ++r) {
      for (std::size_t k = 0; k < d.names.size(); ++k) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[c][r][k];
    }
  }
  return d;
}

namespace {

json vec_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_checkpoint(const ChainResult& r, const std::string& fingerprint, const std::string& path) {
  json j;
  j["fingerprint"] = fingerprint;
  j["chain"] = r.chain;
  j["complete"] = r.complete;
  j["step_size"] = r.step_size;
  j["inv_metric"] = vec_json(r.inv_metric);
  j["last_q"] = vec_json(r.last_q);
  j["rng"] = r.rng_state;
  j["n_outputs"] = r.draws.cols();
  json draws = json::array();
  for (Eigen::Index i = 0; i < r.draws.rows(); ++i) draws.push_back(vec_json(r.draws.row(i).transpose()));
  j["draws"] = std::move(draws);
  json stats = json::array();
  for (const auto& s : r.stats) {
    stats.push_back({s.lp, s.accept_stat, s.step_size, s.energy, s.treedepth, s.n_leapfrog, s.divergent ? 1 : 0});
  }
  j["stats"] = std::move(stats);
  // write then rename so an interrupted save never leaves a torn file
  const std::string tmp = path + ".tmp";
  csv::write_text(tmp, j.dump());
  fs::rename(tmp, path);
}

std::optional<ChainResult> read_checkpoint(const std::string& path, const std::string& fingerprint) {
  if (!fs::exists(path)) return std::nullopt;
  json j;
  try {
    j = json::parse(csv::read_text(path));
  } catch (const json::exception& e) {
    throw DataError(path + ": corrupt checkpoint: " + e.what());
  }
  if (j.at("fingerprint").get<std::string>() != fingerprint) {
    throw ConfigError(path + ": checkpoint was written with different sampler settings");
  }
  ChainResult r;
  try {
    r.chain = j.at("chain").get<int>();
    r.complete = j.at("complete").get<bool>();
    r.step_size = j.at("step_size").get<double>();
    r.inv_metric = json_vec(j.at("inv_metric"));
    r.last_q = json_vec(j.at("last_q"));
    r.rng_state = j.at("rng").get<std::string>();
    const auto& draws = j.at("draws");
    r.draws.resize(static_cast<Eigen::Index>(draws.size()), j.at("n_outputs").get<Eigen::Index>());
    for (std::size_t i = 0; i < draws.size(); ++i) r.draws.row(static_cast<Eigen::Index>(i)) = json_vec(draws[i]).transpose();
    for (const auto& s : j.at("stats")) {
      r.stats.push_back({s[0].get<double>(), s[1].get<double>(), s[2].get<double>(), s[3].get<double>(),
                         s[4].get<int>(), s[5].get<int>(), s[6].get<int>() != 0});
    }
  } catch (const json::exception& e) {
    throw DataError(path + ": corrupt checkpoint: " + e.what());
  }
  if (r.stats.size() != static_cast<std::size_t>(r.draws.rows())) throw DataError(path + ": draws and stats disagree");
  return r;
}

std::string checkpoint_path(const std::string& dir, int chain) {
  return (fs::path(dir) / fmt::format("chain-{}.ckpt.json", chain)).string();
}

ChainHooks checkpoint_hooks(const std::string& dir, const std::string& fingerprint) {
  ChainHooks h;
  h.load = [dir, fingerprint](int chain) { return read_checkpoint(checkpoint_path(dir, chain), fingerprint); };
  h.save = [dir, fingerprint](const ChainResult& r) { write_checkpoint(r, fingerprint, checkpoint_path(dir, r.chain)); };
  return h;
}

}  // namespace annolens::hsmlm
