#pragma once

// No-U-Turn sampler with multinomial trajectory sampling, dual-averaging
// step size and a diagonal metric learned in expanding warmup windows.
// Generic over any density exposing dimension(), log_density_gradient()
// and outputs().

#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

#include "annolens/error.hpp"
#include "annolens/util.hpp"

namespace annolens::hsmlm {

template <typename D>
concept Density = requires(const D& d, const Eigen::VectorXd& q, Eigen::VectorXd& g) {
  { d.dimension() } -> std::convertible_to<Eigen::Index>;
  { d.log_density_gradient(q, g) } -> std::convertible_to<double>;
  { d.outputs(q) } -> std::convertible_to<Eigen::VectorXd>;
};

struct SamplerConfig {
  int chains = 4;
  int warmup = 2000;
  int draws = 7500;
  double target_accept = 0.8;
  int max_depth = 10;
  std::uint64_t seed = 1;
  int jobs = 0;  ///< worker threads, 0 = one per chain
  double init_radius = 2.0;
  int max_init_tries = 100;
  double init_step_size = 1.0;
  int checkpoint_every = 0;  ///< sampling iterations between checkpoints, 0 = off
  int stop_after = -1;       ///< stop each chain after this many draws (resume testing)

  void validate() const;
  /// Stable text of every setting that changes the draws.
  std::string fingerprint() const;
};

struct SamplerStats {
  double lp = 0;
  double accept_stat = 0;
  double step_size = 0;
  double energy = 0;
  int treedepth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
};

/// A finished or interrupted chain; also the checkpoint payload.
struct ChainResult {
  int chain = 0;
  Eigen::MatrixXd draws;  ///< completed draws x outputs
  std::vector<SamplerStats> stats;
  double step_size = 0;
  Eigen::VectorXd inv_metric;
  Eigen::VectorXd last_q;
  std::string rng_state;
  bool complete = false;

  int n_done() const { return static_cast<int>(stats.size()); }
};

struct ChainHooks {
  std::function<std::optional<ChainResult>(int chain)> load;
  std::function<void(const ChainResult&)> save;
  std::function<void(int chain, int iteration, int total)> progress;
};

/// Step size via dual averaging toward a target acceptance statistic.
class DualAveraging {
 public:
  explicit DualAveraging(double delta) : delta_(delta) {}

  void set_mu(double mu) { mu_ = mu; }
  void restart() {
    counter_ = 0;
    s_bar_ = 0;
    x_bar_ = 0;
  }
  double learn(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
    const double x_eta = std::pow(counter_, -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step_size() const { return std::exp(x_bar_); }

 private:
  double delta_;
  double mu_ = 0, s_bar_ = 0, x_bar_ = 0, counter_ = 0;
  double gamma_ = 0.05, t0_ = 10, kappa_ = 0.75;
};

/// Expanding-window estimate of the posterior variance used as inverse metric.
class WindowedVariance {
 public:
  WindowedVariance(int num_warmup, Eigen::Index dim) : num_warmup_(num_warmup), mean_(dim), m2_(dim) {
    if (num_warmup < 20) {
      enabled_ = false;
      return;
    }
    if (init_buffer_ + base_window_ + term_buffer_ > num_warmup) {
      init_buffer_ = static_cast<int>(0.15 * num_warmup);
      term_buffer_ = static_cast<int>(0.1 * num_warmup);
      base_window_ = num_warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
    reset_estimator();
  }

  /// Feeds one warmup position; returns true when `var` was updated.
  bool learn(Eigen::VectorXd& var, const Eigen::VectorXd& q) {
    if (!enabled_) return false;
    if (in_window()) add(q);
    if (counter_ == next_window_ && counter_ != num_warmup_) {
      next_window();
      const double n = static_cast<double>(n_);
      var = (n / (n + 5.0)) * (m2_ / (n - 1.0)) + Eigen::VectorXd::Constant(var.size(), 1e-3 * 5.0 / (n + 5.0));
      if (!var.allFinite()) throw NumericalError("non-finite metric estimate during warmup");
      reset_estimator();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < num_warmup_ - term_buffer_ && counter_ != num_warmup_;
  }
  void next_window() {
    if (next_window_ == num_warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != num_warmup_ - term_buffer_ - 1) {
      if (next_window_ + 2 * window_size_ >= num_warmup_ - term_buffer_) {
        next_window_ = num_warmup_ - term_buffer_ - 1;
      }
    }
  }
  void reset_estimator() {
    n_ = 0;
    mean_.setZero();
    m2_.setZero();
  }
  void add(const Eigen::VectorXd& q) {
    ++n_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta.cwiseProduct(q - mean_);
  }

  bool enabled_ = true;
  int num_warmup_;
  int init_buffer_ = 75, term_buffer_ = 50, base_window_ = 25;
  int window_size_ = 0, next_window_ = 0, counter_ = 0;
  long n_ = 0;
  Eigen::VectorXd mean_, m2_;
};

template <Density D>
class NutsKernel {
 public:
  struct Point {
    Eigen::VectorXd q, p, g;
    double lp = 0;
  };

  NutsKernel(const D& density, std::mt19937_64& rng, int max_depth)
      : d_(density), rng_(rng), max_depth_(max_depth), inv_metric_(Eigen::VectorXd::Ones(density.dimension())) {}

  double step_size = 1.0;
  Eigen::VectorXd& inv_metric() { return inv_metric_; }

  /// Fills lp and gradient; false on any non-finite value.
  bool evaluate(Point& z) const {
    try {
      z.lp = d_.log_density_gradient(z.q, z.g);
    } catch (const NumericalError&) {
      z.lp = -std::numeric_limits<double>::infinity();
      return false;
    }
    return std::isfinite(z.lp) && z.g.allFinite();
  }

  Point make_point(const Eigen::VectorXd& q) const {
    Point z;
    z.q = q;
    z.p = Eigen::VectorXd::Zero(q.size());
    z.g = Eigen::VectorXd::Zero(q.size());
    return z;
  }

  double hamiltonian(const Point& z) const {
    if (!std::isfinite(z.lp)) return std::numeric_limits<double>::infinity();
    return -z.lp + 0.5 * (z.p.array().square() * inv_metric_.array()).sum();
  }

  void sample_momentum(Point& z) {
    std::normal_distribution<double> n01;
    for (Eigen::Index k = 0; k < z.p.size(); ++k) z.p(k) = n01(rng_) / std::sqrt(inv_metric_(k));
  }

  /// Heuristic doubling/halving until one step crosses acceptance 0.8.
  void init_step_size(Point& z) {
    if (step_size == 0 || step_size > 1e7) return;
    const Point start = z;
    auto delta_h = [&] {
      z = start;
      sample_momentum(z);
      const double h0 = hamiltonian(z);
      leapfrog(z, step_size);
      double h = hamiltonian(z);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      return h0 - h;
    };
    const double log08 = std::log(0.8);
    const int direction = delta_h() > log08 ? 1 : -1;
    while (true) {
      const double dh = delta_h();
      if (direction == 1 && !(dh > log08)) break;
      if (direction == -1 && !(dh < log08)) break;
      step_size = direction == 1 ? 2 * step_size : 0.5 * step_size;
      if (step_size > 1e7) throw NumericalError("posterior is improper: step size grew without bound");
      if (step_size == 0) throw NumericalError("no acceptably small step size");
    }
    z = start;
  }

  SamplerStats transition(Point& z) {
    sample_momentum(z);
    const Eigen::Index n = z.q.size();
    const double h0 = hamiltonian(z);

    Point z_fwd = z, z_bck = z, z_sample = z, z_propose = z;
    const Eigen::VectorXd sharp = inv_metric_.cwiseProduct(z.p);
    Eigen::VectorXd p_fwd_fwd = z.p, ps_fwd_fwd = sharp, p_fwd_bck = z.p, ps_fwd_bck = sharp;
    Eigen::VectorXd p_bck_fwd = z.p, ps_bck_fwd = sharp, p_bck_bck = z.p, ps_bck_bck = sharp;
    Eigen::VectorXd rho = z.p;
    double log_sum_weight = 0;
    int depth = 0, n_leapfrog = 0;
    double sum_metro = 0;
    divergent_ = false;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    while (depth < max_depth_) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(n), rho_bck = Eigen::VectorXd::Zero(n);
      bool valid = false;
      double lsw_subtree = -std::numeric_limits<double>::infinity();
      if (unif(rng_) > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        ps_bck_fwd = ps_fwd_bck;
        valid = build_tree(depth, z_fwd, z_propose, ps_fwd_bck, ps_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, h0, 1.0,
                           n_leapfrog, lsw_subtree, sum_metro);
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        ps_fwd_bck = ps_bck_fwd;
        valid = build_tree(depth, z_bck, z_propose, ps_bck_fwd, ps_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, h0, -1.0,
                           n_leapfrog, lsw_subtree, sum_metro);
      }
      if (!valid) break;
      ++depth;

      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (unif(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
      rho = rho_bck + rho_fwd;

      bool persist = criterion(ps_bck_bck, ps_fwd_fwd, rho);
      persist = persist && criterion(ps_bck_bck, ps_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && criterion(ps_bck_fwd, ps_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }

    z = z_sample;
    SamplerStats s;
    s.lp = z.lp;
    s.accept_stat = sum_metro / static_cast<double>(n_leapfrog);
    s.step_size = step_size;
    s.treedepth = depth;
    s.n_leapfrog = n_leapfrog;
    s.divergent = divergent_;
    s.energy = hamiltonian(z);
    return s;
  }

 private:
  static double log_sum_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
  }

  static bool criterion(const Eigen::VectorXd& ps_minus, const Eigen::VectorXd& ps_plus, const Eigen::VectorXd& rho) {
    return ps_plus.dot(rho) > 0 && ps_minus.dot(rho) > 0;
  }

  void leapfrog(Point& z, double eps) const {
    z.p += 0.5 * eps * z.g;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    if (evaluate(z)) z.p += 0.5 * eps * z.g;
  }

  bool build_tree(int depth, Point& z, Point& z_propose, Eigen::VectorXd& ps_beg, Eigen::VectorXd& ps_end,
                  Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double h0, double sign,
                  int& n_leapfrog, double& log_sum_weight, double& sum_metro) {
    const Eigen::Index n = z.q.size();
    if (depth == 0) {
      leapfrog(z, sign * step_size);
      ++n_leapfrog;
      double h = hamiltonian(z);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - h0 > 1000.0) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      ps_beg = inv_metric_.cwiseProduct(z.p);
      ps_end = ps_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !divergent_;
    }

    Eigen::VectorXd p_init_end(n), ps_init_end(n), rho_init = Eigen::VectorXd::Zero(n);
    double lsw_init = -std::numeric_limits<double>::infinity();
    if (!build_tree(depth - 1, z, z_propose, ps_beg, ps_init_end, rho_init, p_beg, p_init_end, h0, sign, n_leapfrog,
                    lsw_init, sum_metro)) {
      return false;
    }

    Point z_propose_final = z;
    Eigen::VectorXd p_final_beg(n), ps_final_beg(n), rho_final = Eigen::VectorXd::Zero(n);
    double lsw_final = -std::numeric_limits<double>::infinity();
    if (!build_tree(depth - 1, z, z_propose_final, ps_final_beg, ps_end, rho_final, p_final_beg, p_end, h0, sign,
                    n_leapfrog, lsw_final, sum_metro)) {
      return false;
    }

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      if (unif(rng_) < std::exp(lsw_final - lsw_subtree)) z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(ps_beg, ps_end, rho_subtree);
    persist = persist && criterion(ps_beg, ps_final_beg, rho_init + p_final_beg);
    persist = persist && criterion(ps_init_end, ps_end, rho_final + p_init_end);
    return persist;
  }

  const D& d_;
  std::mt19937_64& rng_;
  int max_depth_;
  Eigen::VectorXd inv_metric_;
  bool divergent_ = false;
};

inline std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void rng_from_string(std::mt19937_64& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw DataError("corrupt random-number state in checkpoint");
}

template <Density D>
ChainResult run_chain(const D& density, const SamplerConfig& cfg, int chain, const ChainHooks& hooks = {}) {
  using Kernel = NutsKernel<D>;
  const Eigen::Index dim = density.dimension();
  std::mt19937_64 rng = make_stream(cfg.seed, static_cast<std::uint64_t>(chain));
  Kernel kernel(density, rng, cfg.max_depth);

  ChainResult res;
  res.chain = chain;
  std::optional<ChainResult> resumed;
  if (hooks.load) resumed = hooks.load(chain);

  typename Kernel::Point z;
  if (resumed) {
    res = std::move(*resumed);
    if (res.last_q.size() != dim || res.inv_metric.size() != dim) throw DataError("checkpoint dimension mismatch");
    rng_from_string(rng, res.rng_state);
    kernel.step_size = res.step_size;
    kernel.inv_metric() = res.inv_metric;
    z = kernel.make_point(res.last_q);
    if (!kernel.evaluate(z)) throw NumericalError("checkpointed state has non-finite density");
    if (res.complete) return res;
  } else {
    std::uniform_real_distribution<double> init(-cfg.init_radius, cfg.init_radius);
    bool ok = false;
    for (int attempt = 0; attempt < cfg.max_init_tries && !ok; ++attempt) {
      Eigen::VectorXd q(dim);
      for (Eigen::Index k = 0; k < dim; ++k) q(k) = init(rng);
      z = kernel.make_point(q);
      ok = kernel.evaluate(z);
    }
    if (!ok) {
      throw NumericalError(
          fmt::format("chain {}: no finite initial point after {} attempts", chain, cfg.max_init_tries));
    }

    kernel.step_size = cfg.init_step_size;
    kernel.init_step_size(z);
    DualAveraging da(cfg.target_accept);
    da.set_mu(std::log(10 * kernel.step_size));
    da.restart();
    WindowedVariance metric(cfg.warmup, dim);
    for (int it = 0; it < cfg.warmup; ++it) {
      const auto s = kernel.transition(z);
      kernel.step_size = da.learn(s.accept_stat);
      if (metric.learn(kernel.inv_metric(), z.q)) {
        kernel.init_step_size(z);
        da.set_mu(std::log(10 * kernel.step_size));
        da.restart();
      }
      if (hooks.progress) hooks.progress(chain, it + 1, cfg.warmup + cfg.draws);
    }
    if (cfg.warmup > 0) kernel.step_size = da.final_step_size();
    res.step_size = kernel.step_size;
    res.inv_metric = kernel.inv_metric();
  }

  const Eigen::Index n_out = density.outputs(z.q).size();
  if (res.draws.rows() != cfg.draws) {
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(cfg.draws, n_out);
    if (res.n_done() > 0) full.topRows(res.n_done()) = res.draws.topRows(res.n_done());
    res.draws = std::move(full);
  }
  res.stats.reserve(static_cast<std::size_t>(cfg.draws));

  auto snapshot = [&] {
    res.last_q = z.q;
    res.rng_state = rng_to_string(rng);
  };
  for (int it = res.n_done(); it < cfg.draws; ++it) {
    if (cfg.stop_after >= 0 && it >= cfg.stop_after && !resumed) {
      snapshot();
      res.draws.conservativeResize(it, n_out);
      if (hooks.save) hooks.save(res);
      return res;
    }
    const auto s = kernel.transition(z);
    res.draws.row(it) = density.outputs(z.q).transpose();
    res.stats.push_back(s);
    if (hooks.progress) hooks.progress(chain, cfg.warmup + it + 1, cfg.warmup + cfg.draws);
    if (cfg.checkpoint_every > 0 && hooks.save && (it + 1) % cfg.checkpoint_every == 0 && it + 1 < cfg.draws) {
      snapshot();
      ChainResult partial = res;
      partial.draws.conservativeResize(it + 1, n_out);
      hooks.save(partial);
    }
  }
  snapshot();
  res.complete = true;
  if (hooks.save) hooks.save(res);
  return res;
}

/// Runs every chain, `cfg.jobs` at a time. Results are in chain order and
/// independent of the thread count.
template <Density D>
std::vector<ChainResult> run_chains(const D& density, const SamplerConfig& cfg, const ChainHooks& hooks = {}) {
  cfg.validate();
  std::vector<ChainResult> out(static_cast<std::size_t>(cfg.chains));
  std::vector<std::exception_ptr> errors(out.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < cfg.chains; c = next++) {
      try {
        out[static_cast<std::size_t>(c)] = run_chain(density, cfg, c, hooks);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min(cfg.jobs > 0 ? cfg.jobs : cfg.chains, cfg.chains));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace annolens::hsmlm
