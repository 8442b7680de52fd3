#include "annolens/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "annolens/csv.hpp"
#include "annolens/error.hpp"
#include "annolens/util.hpp"

namespace annolens::posterior {

namespace {

Eigen::VectorXd sorted(const Eigen::VectorXd& v) {
  Eigen::VectorXd s = v;
  std::sort(s.data(), s.data() + s.size());
  return s;
}

double quantile_sorted(const Eigen::VectorXd& s, double p) {
  const double h = static_cast<double>(s.size() - 1) * p;
  const auto lo = static_cast<Eigen::Index>(std::floor(h));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s(lo) + (h - static_cast<double>(lo)) * (s(hi) - s(lo));
}

void require_samples(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw DataError("no posterior samples");
  if (!v.allFinite()) throw NumericalError("non-finite posterior samples");
}

const char* const kOriginOrder[] = {"L", "S", "S:S", "L:S"};

}  // namespace

double quantile(const Eigen::VectorXd& samples, double p) {
  require_samples(samples);
  if (!(p >= 0 && p <= 1)) throw ConfigError("quantile probability must be in [0, 1]");
  return quantile_sorted(sorted(samples), p);
}

double median(const Eigen::VectorXd& samples) { return quantile(samples, 0.5); }

Interval hdi(const Eigen::VectorXd& samples, double mass) {
  if (!(mass > 0 && mass < 1)) throw ConfigError("HDI mass must be in (0, 1)");
  if (samples.size() < 10) throw DataError("HDI needs at least 10 samples");
  require_samples(samples);
  const auto s = sorted(samples);
  const auto n = s.size();
  // guard against 0.95 * 100 landing a hair above 95
  const auto k = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(std::ceil(mass * static_cast<double>(n) - 1e-9)));
  Eigen::Index best = 0;
  double width = s(k - 1) - s(0);
  for (Eigen::Index i = 1; i + k - 1 < n; ++i) {
    const double w = s(i + k - 1) - s(i);
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {s(best), s(best + k - 1)};
}

Interval equal_tailed(const Eigen::VectorXd& samples, double level) {
  if (!(level > 0 && level < 1)) throw ConfigError("interval level must be in (0, 1)");
  require_samples(samples);
  const auto s = sorted(samples);
  return {quantile_sorted(s, (1 - level) / 2), quantile_sorted(s, (1 + level) / 2)};
}

EffectSummary summarize_effect(std::string effect, std::string origin, const Eigen::VectorXd& samples,
                               const SurvivorRule& rule) {
  EffectSummary e;
  e.effect = std::move(effect);
  e.origin = std::move(origin);
  e.median = median(samples);
  e.hdi95 = hdi(samples, 0.95);
  e.ci90 = rule.use_hdi ? hdi(samples, rule.level) : equal_tailed(samples, rule.level);
  e.survivor = e.ci90.excludes(0.0);
  return e;
}

std::vector<EffectSummary> summarize(const hsmlm::PosteriorDraws& draws, const std::vector<design::ColumnSpec>& columns,
                                     const SurvivorRule& rule) {
  std::vector<EffectSummary> out;
  for (const auto& c : columns) {
    const auto k = draws.index("b_" + c.name);
    if (k < 0) throw DataError(fmt::format("draws have no coefficient for effect '{}'", c.name));
    out.push_back(summarize_effect(c.name, std::string(design::to_string(c.origin)), draws.pooled(k), rule));
  }
  return out;
}

std::vector<EffectSummary> survivors(const std::vector<EffectSummary>& all) {
  std::vector<EffectSummary> s;
  for (const auto& e : all) {
    if (e.survivor) s.push_back(e);
  }
  std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) {
    if (std::abs(a.median) != std::abs(b.median)) return std::abs(a.median) > std::abs(b.median);
    return a.effect < b.effect;
  });
  return s;
}

PredictionGrid predict_grid(const hsmlm::PosteriorDraws& draws, const design::DesignMatrix& meta,
                            std::string_view target) {
  auto owner_of = [&](std::string_view scol) -> const design::Encoding* {
    for (const auto& e : meta.encodings) {
      if (std::find(e.columns.begin(), e.columns.end(), scol) != e.columns.end()) return &e;
    }
    return nullptr;
  };
  auto encoding_named = [&](std::string_view name) -> const design::Encoding* {
    for (const auto& e : meta.encodings) {
      if (e.name == name) return &e;
    }
    return nullptr;
  };
  auto is_feature = [&](std::string_view f) {
    return std::find(meta.features.begin(), meta.features.end(), f) != meta.features.end();
  };

  std::string feature;
  const design::Encoding* enc = nullptr;
  for (const auto& c : meta.columns) {
    if (c.name == target && c.origin == design::Origin::LS) {
      feature = c.parents.at(0);
      enc = owner_of(c.parents.at(1));
    }
  }
  if (!enc) {
    const auto colon = target.find(':');
    if (colon != std::string_view::npos) {
      const auto a = target.substr(0, colon), b = target.substr(colon + 1);
      if (is_feature(a) && encoding_named(b)) {
        feature = std::string(a);
        enc = encoding_named(b);
      } else if (is_feature(b) && encoding_named(a)) {
        feature = std::string(b);
        enc = encoding_named(a);
      }
    }
  }
  if (!enc || !is_feature(feature)) throw ConfigError(fmt::format("unknown interaction '{}'", target));

  const auto b0 = draws.pooled("b_Intercept");
  const Eigen::Index n = b0.size();
  auto coef = [&](const std::string& col) -> Eigen::VectorXd {
    const auto k = draws.index("b_" + col);
    return k < 0 ? Eigen::VectorXd::Zero(n) : draws.pooled(k);
  };
  const auto beta_l = coef(feature);

  std::vector<std::pair<std::string, Eigen::RowVectorXd>> levels;
  if (enc->type == corpus::CharType::interval) {
    for (double v : {-1.0, 0.0, 1.0}) levels.emplace_back(format_number(v), Eigen::RowVectorXd::Constant(1, v));
  } else {
    for (const auto& l : enc->levels) levels.emplace_back(l, enc->encode(l));
  }

  PredictionGrid g;
  g.feature = feature;
  g.characteristic = enc->name;
  for (const auto& [level, code] : levels) {
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(n), slope = Eigen::VectorXd::Zero(n);
    for (Eigen::Index c = 0; c < enc->width(); ++c) {
      const auto& scol = enc->columns[static_cast<std::size_t>(c)];
      if (code(c) == 0) continue;
      shift += code(c) * coef(scol);
      slope += code(c) * coef(scol + ":" + feature);
    }
    for (double x : {-1.0, 0.0, 1.0}) {
      Eigen::VectorXd eta = b0 + shift;
      if (x != 0) eta += x * (beta_l + slope);
      g.points.push_back({x, level, eta.mean(), hdi(eta, 0.95)});
    }
  }
  return g;
}

void write_summary_csv(const std::vector<EffectSummary>& s, const std::string& path) {
  std::ostringstream out;
  csv::write_row(out, {"effect", "origin", "median", "hdi95_lo", "hdi95_hi", "ci90_lo", "ci90_hi", "survivor"});
  for (const auto& e : s) {
    csv::write_row(out, {e.effect, e.origin, format_number(e.median), format_number(e.hdi95.lo),
                         format_number(e.hdi95.hi), format_number(e.ci90.lo), format_number(e.ci90.hi),
                         e.survivor ? "1" : "0"});
  }
  csv::write_text(path, out.str());
}

std::vector<EffectSummary> read_summary_csv(const std::string& path) {
  const auto t = csv::read_file(path);
  const char* cols[] = {"effect", "origin", "median", "hdi95_lo", "hdi95_hi", "ci90_lo", "ci90_hi", "survivor"};
  std::size_t idx[8];
  for (int k = 0; k < 8; ++k) idx[k] = t.column(cols[k], path);
  std::vector<EffectSummary> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = fmt::format("{}:{}", path, t.line_of[r]);
    EffectSummary e;
    e.effect = row[idx[0]];
    e.origin = row[idx[1]];
    e.median = parse_number(row[idx[2]], where);
    e.hdi95 = {parse_number(row[idx[3]], where), parse_number(row[idx[4]], where)};
    e.ci90 = {parse_number(row[idx[5]], where), parse_number(row[idx[6]], where)};
    e.survivor = row[idx[7]] == "1";
    out.push_back(std::move(e));
  }
  return out;
}

void write_grid_csv(const PredictionGrid& g, const std::string& path) {
  std::ostringstream out;
  csv::write_row(out, {"feature_sd", "level", "mean", "hdi_lo", "hdi_hi"});
  for (const auto& p : g.points) {
    csv::write_row(out, {format_number(p.feature_sd), p.level, format_number(p.mean), format_number(p.hdi95.lo),
                         format_number(p.hdi95.hi)});
  }
  csv::write_text(path, out.str());
}

void write_forest_csv(const std::vector<EffectSummary>& s, const std::string& path) {
  std::ostringstream out;
  csv::write_row(out, {"origin", "rank", "effect", "median", "hdi95_lo", "hdi95_hi", "ci90_lo", "ci90_hi"});
  const auto surv = survivors(s);
  for (const char* o : kOriginOrder) {
    int rank = 0;
    for (const auto& e : surv) {
      if (e.origin != o) continue;
      csv::write_row(out, {e.origin, std::to_string(++rank), e.effect, format_number(e.median),
                           format_number(e.hdi95.lo), format_number(e.hdi95.hi), format_number(e.ci90.lo),
                           format_number(e.ci90.hi)});
    }
  }
  csv::write_text(path, out.str());
}

std::string format_report(const std::vector<EffectSummary>& summaries, const hsmlm::DiagnosticsReport* diagnostics,
                          const SurvivorRule& rule) {
  std::ostringstream out;
  if (diagnostics) {
    const auto& d = *diagnostics;
    if (d.divergences > 0) {
      out << fmt::format("WARNING: {} divergent transitions in {} draws ({:.2f}%). Estimates may be biased.\n\n",
                         d.divergences, d.total_draws, 100 * d.divergence_rate());
    }
    const double r = d.max_rhat();
    if (std::isfinite(r) && r > 1.01) out << fmt::format("WARNING: max R-hat {:.3f} exceeds 1.01.\n\n", r);
    out << fmt::format("Sampler: {} draws, {} divergences, {} max-treedepth hits, max R-hat {}, min bulk ESS {}\n\n",
                       d.total_draws, d.divergences, d.treedepth_hits, std::isfinite(r) ? fmt::format("{:.3f}", r) : "NA",
                       std::isfinite(d.min_ess_bulk()) ? fmt::format("{:.0f}", d.min_ess_bulk()) : "NA");
  }
  const auto surv = survivors(summaries);
  const std::string rule_text =
      fmt::format("{:g}% {} interval excludes 0", 100 * rule.level, rule.use_hdi ? "highest density" : "equal-tailed");
  out << fmt::format("Effects: {} total, {} survivors ({})\n", summaries.size(), surv.size(), rule_text);
  if (surv.empty()) {
    out << "\nNo effects survived.\n";
    return out.str();
  }
  for (const char* o : kOriginOrder) {
    std::vector<const EffectSummary*> group;
    for (const auto& e : surv) {
      if (e.origin == o) group.push_back(&e);
    }
    if (group.empty()) continue;
    out << fmt::format("\n[{}] {} survivors\n", o, group.size());
    for (const auto* e : group) {
      out << fmt::format("  {:<40} median {:>9.4f}  95% HDI [{:.4f}, {:.4f}]  90% CI [{:.4f}, {:.4f}]\n", e->effect,
                         e->median, e->hdi95.lo, e->hdi95.hi, e->ci90.lo, e->ci90.hi);
    }
  }
  return out.str();
}

}  // namespace annolens::posterior
