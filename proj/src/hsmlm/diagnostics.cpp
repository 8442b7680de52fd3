#include "annolens/hsmlm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "annolens/error.hpp"

namespace annolens::hsmlm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool degenerate(const Eigen::MatrixXd& x) {
  if (x.rows() < 4 || x.cols() < 1 || !x.allFinite()) return true;
  const double first = x(0, 0);
  const double tol = 1e-12 * std::max(1.0, std::abs(first));
  return (x.array() - first).abs().maxCoeff() <= tol;
}

double median(Eigen::VectorXd v) {
  std::sort(v.data(), v.data() + v.size());
  const auto n = v.size();
  return n % 2 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}

double quantile7(Eigen::VectorXd v, double p) {
  std::sort(v.data(), v.data() + v.size());
  const double h = (static_cast<double>(v.size()) - 1) * p;
  const auto lo = static_cast<Eigen::Index>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v(lo) + (h - static_cast<double>(lo)) * (v(hi) - v(lo));
}

double sample_var(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

Eigen::MatrixXd split_chains(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), half = n / 2;
  Eigen::MatrixXd out(half, 2 * x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    out.col(2 * c) = x.col(c).head(half);
    out.col(2 * c + 1) = x.col(c).tail(half);
  }
  return out;
}

Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& x) {
  const Eigen::Index s = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(s));
  std::iota(order.begin(), order.end(), 0);
  const double* v = x.data();
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  Eigen::MatrixXd out(x.rows(), x.cols());
  const boost::math::normal_distribution<double> n01;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average 1-based rank of the tie group
    const double z = boost::math::quantile(n01, (rank - 0.375) / (static_cast<double>(s) + 0.25));
    for (std::size_t k = i; k <= j; ++k) out.data()[order[k]] = z;
    i = j + 1;
  }
  return out;
}

double rhat_basic(const Eigen::MatrixXd& x) {
  if (degenerate(x) || x.cols() < 2) return kNaN;
  const auto n = static_cast<double>(x.rows());
  const Eigen::VectorXd means = x.colwise().mean().transpose();
  Eigen::VectorXd vars(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) vars(c) = sample_var(x.col(c));
  const double b = n * sample_var(means);
  const double w = vars.mean();
  return std::sqrt((b / w + n - 1) / n);
}

double rhat(const Eigen::MatrixXd& x) {
  if (degenerate(x)) return kNaN;
  const double bulk = rhat_basic(rank_normalize(split_chains(x)));
  const double med = median(Eigen::Map<const Eigen::VectorXd>(x.data(), x.size()));
  const Eigen::MatrixXd folded = (x.array() - med).abs().matrix();
  const double tail = rhat_basic(rank_normalize(split_chains(folded)));
  if (std::isnan(bulk) || std::isnan(tail)) return kNaN;
  return std::max(bulk, tail);
}

double ess_basic(const Eigen::MatrixXd& x) {
  if (degenerate(x)) return kNaN;
  const Eigen::Index n = x.rows(), m = x.cols();
  const auto nd = static_cast<double>(n);
  Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();

  // mean over chains of the biased autocovariance at lag t, computed on demand
  auto acov_mean = [&](Eigen::Index t) {
    double s = 0;
    for (Eigen::Index c = 0; c < m; ++c) {
      s += centered.col(c).head(n - t).dot(centered.col(c).tail(n - t)) / nd;
    }
    return s / static_cast<double>(m);
  };

  const double acov0 = acov_mean(0);
  const double mean_var = acov0 * nd / (nd - 1);
  double var_plus = mean_var * (nd - 1) / nd;
  if (m > 1) var_plus += sample_var(x.colwise().mean().transpose());

  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  auto r = [&](Eigen::Index t) -> double& { return rho[static_cast<std::size_t>(t)]; };
  Eigen::Index t = 0;
  double even = 1, odd = 1 - (mean_var - acov_mean(1)) / var_plus;
  r(0) = even;
  r(1) = odd;
  while (t < n - 5 && !std::isnan(even + odd) && even + odd > 0) {
    t += 2;
    even = 1 - (mean_var - acov_mean(t)) / var_plus;
    odd = 1 - (mean_var - acov_mean(t + 1)) / var_plus;
    if (even + odd >= 0) {
      r(t) = even;
      r(t + 1) = odd;
    }
  }
  const Eigen::Index max_t = t;
  if (even > 0) r(max_t) = even;

  t = 0;
  while (t <= max_t - 4) {
    t += 2;
    if (r(t) + r(t + 1) > r(t - 2) + r(t - 1)) {
      r(t) = (r(t - 2) + r(t - 1)) / 2;
      r(t + 1) = r(t);
    }
  }
  const double total = nd * static_cast<double>(m);
  double tau = -1 + r(max_t);
  for (Eigen::Index k = 0; k < max_t; ++k) tau += 2 * r(k);
  tau = std::max(tau, 1 / std::log10(total));
  return total / tau;
}

double ess_bulk(const Eigen::MatrixXd& x) {
  if (degenerate(x)) return kNaN;
  return ess_basic(rank_normalize(split_chains(x)));
}

double ess_tail(const Eigen::MatrixXd& x) {
  if (degenerate(x)) return kNaN;
  const Eigen::MatrixXd s = split_chains(x);
  const Eigen::VectorXd all = Eigen::Map<const Eigen::VectorXd>(s.data(), s.size());
  double out = std::numeric_limits<double>::infinity();
  for (double p : {0.05, 0.95}) {
    const double q = quantile7(all, p);
    const Eigen::MatrixXd ind = (s.array() <= q).cast<double>().matrix();
    const double e = ess_basic(ind);
    if (std::isnan(e)) return kNaN;
    out = std::min(out, e);
  }
  return out;
}

double DiagnosticsReport::max_rhat() const {
  double m = kNaN;
  for (const auto& p : params) {
    if (std::isfinite(p.rhat) && !(p.rhat <= m)) m = p.rhat;
  }
  return m;
}

double DiagnosticsReport::min_ess_bulk() const {
  double m = kNaN;
  for (const auto& p : params) {
    if (std::isfinite(p.ess_bulk) && !(p.ess_bulk >= m)) m = p.ess_bulk;
  }
  return m;
}

DiagnosticsReport diagnose(const PosteriorDraws& d, int max_depth) {
  if (d.n_chains() < 2) throw ConfigError("diagnostics need at least two chains");
  DiagnosticsReport r;
  for (std::size_t k = 0; k < d.names.size(); ++k) {
    const auto m = d.by_chain(static_cast<Eigen::Index>(k));
    r.params.push_back({d.names[k], rhat(m), ess_bulk(m), ess_tail(m)});
  }
  r.divergences = d.divergences();
  r.treedepth_hits = d.treedepth_hits(max_depth);
  r.total_draws = d.n_chains() * d.n_draws();
  return r;
}

}  // namespace annolens::hsmlm
