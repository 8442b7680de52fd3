#pragma once

// Effect summaries, survivors, interaction prediction grids and reports.

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "annolens/design.hpp"
#include "annolens/hsmlm/diagnostics.hpp"
#include "annolens/hsmlm/draws.hpp"

namespace annolens::posterior {

struct Interval {
  double lo = 0;
  double hi = 0;
  double width() const { return hi - lo; }
  bool excludes(double v) const { return v < lo || v > hi; }
};

/// Type-7 sample quantile.
double quantile(const Eigen::VectorXd& samples, double p);
double median(const Eigen::VectorXd& samples);
/// Shortest window holding ceil(mass n) sorted samples; the first such
/// window wins ties. Needs >= 10 samples and 0 < mass < 1.
Interval hdi(const Eigen::VectorXd& samples, double mass);
/// Quantiles (1 - level)/2 and (1 + level)/2.
Interval equal_tailed(const Eigen::VectorXd& samples, double level);

struct SurvivorRule {
  double level = 0.90;
  bool use_hdi = false;  ///< default: equal-tailed interval
};

struct EffectSummary {
  std::string effect;
  std::string origin;
  double median = 0;
  Interval hdi95;
  Interval ci90;  ///< the survival interval (equal-tailed or HDI per rule)
  bool survivor = false;
};

EffectSummary summarize_effect(std::string effect, std::string origin, const Eigen::VectorXd& samples,
                               const SurvivorRule& rule = {});

/// One summary per design column, in column order; draws hold `b_<column>`.
std::vector<EffectSummary> summarize(const hsmlm::PosteriorDraws& draws, const std::vector<design::ColumnSpec>& columns,
                                     const SurvivorRule& rule = {});

/// Survivors ordered by descending |median| (ties by name).
std::vector<EffectSummary> survivors(const std::vector<EffectSummary>& all);

struct GridPoint {
  double feature_sd = 0;
  std::string level;
  double mean = 0;
  Interval hdi95;
};

struct PredictionGrid {
  std::string feature;
  std::string characteristic;
  std::vector<GridPoint> points;  ///< level-major, feature_sd in {-1, 0, 1}
};

/// Population-level linear predictor for one feature x one characteristic.
/// `target` is an L:S column name (e.g. `age.L:n_hateful`) or
/// `feature:characteristic` in either order. Interval characteristics are
/// evaluated at raw values -1, 0 and 1. Columns dropped from the design
/// count as zero.
PredictionGrid predict_grid(const hsmlm::PosteriorDraws& draws, const design::DesignMatrix& meta,
                            std::string_view target);

void write_summary_csv(const std::vector<EffectSummary>& s, const std::string& path);
std::vector<EffectSummary> read_summary_csv(const std::string& path);
void write_grid_csv(const PredictionGrid& g, const std::string& path);
/// Survivors in plot order: origin, rank, effect, median and both intervals.
void write_forest_csv(const std::vector<EffectSummary>& s, const std::string& path);

/// Plain-text report: diagnostics banner, then survivors grouped by origin.
std::string format_report(const std::vector<EffectSummary>& summaries, const hsmlm::DiagnosticsReport* diagnostics,
                          const SurvivorRule& rule = {});

}  // namespace annolens::posterior
