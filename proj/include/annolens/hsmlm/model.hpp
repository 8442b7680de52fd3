#pragma once

// Gaussian cross-classified multilevel regression with a regularized
// horseshoe on the fixed effects, in an unconstrained parameterization.
//
//   y_n   ~ Normal(b0 + x_n' beta + sd_a z_u[a(n)] + sd_i z_v[i(n)], sigma)
//   beta_j = z_j tau lt_j,  lt_j = c lambda_j / sqrt(c^2 + tau^2 lambda_j^2)
//   c^2    = slab_scale^2 c_aux,  c_aux ~ InvGamma(slab_df/2, slab_df/2)

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

#include "annolens/error.hpp"

namespace annolens::hsmlm {

template <typename Scalar>
struct ModelData {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix x;  ///< observations x fixed effects
  Vector y;
  std::vector<int> annotator;
  std::vector<int> item;
  int n_annotators = 0;
  int n_items = 0;

  template <typename T>
  ModelData<T> cast() const {
    ModelData<T> out;
    out.x = x.template cast<T>();
    out.y = y.template cast<T>();
    out.annotator = annotator;
    out.item = item;
    out.n_annotators = n_annotators;
    out.n_items = n_items;
    return out;
  }

  /// Throws DataError on size mismatches, bad indices or non-finite values.
  void validate() const;
};

struct HorseshoeHyper {
  double local_df = 1.0;
  double global_df = 1.0;
  double global_scale = 1.0;  ///< multiplied by sigma
  double slab_df = 4.0;
  double slab_scale = 2.0;
  double sd_df = 3.0;  ///< half-t prior on sigma, sd_a, sd_i
  double sd_scale = 2.5;
  double intercept_df = 3.0;
  double intercept_loc = 0.0;
  double intercept_scale = 2.5;

  /// Intercept prior centred on median(y) with scale 2.5 * mad(y)
  /// (falls back to 2.5 when mad(y) is 0).
  static HorseshoeHyper for_outcome(const Eigen::VectorXd& y);
  void validate() const;
};

/// Positions of the blocks in the unconstrained vector.
struct Layout {
  Eigen::Index p = 0, n_annotators = 0, n_items = 0;

  Eigen::Index b0() const { return 0; }
  Eigen::Index z(Eigen::Index j) const { return 1 + j; }
  Eigen::Index log_lambda(Eigen::Index j) const { return 1 + p + j; }
  Eigen::Index log_tau() const { return 1 + 2 * p; }
  Eigen::Index log_caux() const { return 2 + 2 * p; }
  Eigen::Index z_u(Eigen::Index k) const { return 3 + 2 * p + k; }
  Eigen::Index log_sd_a() const { return 3 + 2 * p + n_annotators; }
  Eigen::Index z_v(Eigen::Index k) const { return 4 + 2 * p + n_annotators + k; }
  Eigen::Index log_sd_i() const { return 4 + 2 * p + n_annotators + n_items; }
  Eigen::Index log_sigma() const { return 5 + 2 * p + n_annotators + n_items; }
  Eigen::Index dimension() const { return 6 + 2 * p + n_annotators + n_items; }

  std::vector<std::string> names() const;
};

namespace detail {

inline constexpr double kLogTwo = std::numbers::ln2;
inline constexpr double kHalfLogTwoPi = 0.91893853320467274178;

inline double student_t_const(double nu) {
  return std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * std::numbers::pi);
}

/// log half-t(x | nu, s) + log x, evaluated at x = exp(lx).
template <typename S>
S half_t_log_lpdf(S lx, double nu, S scale) {
  using std::exp;
  using std::log;
  using std::log1p;
  const S x = exp(lx);
  const S u = x * x / (S(nu) * scale * scale);
  return S(kLogTwo + student_t_const(nu)) - log(scale) - S((nu + 1) / 2) * log1p(u) + lx;
}

/// d/d lx of half_t_log_lpdf with fixed scale.
template <typename S>
S half_t_log_grad(S lx, double nu, S scale) {
  using std::exp;
  const S x = exp(lx);
  const S u = x * x / (S(nu) * scale * scale);
  return S(1) - S(nu + 1) * u / (S(1) + u);
}

}  // namespace detail

template <typename Scalar>
class HorseshoeModel {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  HorseshoeModel(ModelData<Scalar> data, HorseshoeHyper hyper) : data_(std::move(data)), hyper_(hyper) {
    data_.validate();
    hyper_.validate();
    layout_.p = data_.x.cols();
    layout_.n_annotators = data_.n_annotators;
    layout_.n_items = data_.n_items;
  }

  const Layout& layout() const { return layout_; }
  const ModelData<Scalar>& data() const { return data_; }
  const HorseshoeHyper& hyper() const { return hyper_; }
  Eigen::Index dimension() const { return layout_.dimension(); }

  /// Regularized local scales lt_j.
  Vector lambda_tilde(const Vector& q) const {
    using std::exp;
    using std::sqrt;
    const auto& L = layout_;
    const Scalar tau = exp(q(L.log_tau()));
    const Scalar c = Scalar(hyper_.slab_scale) * exp(q(L.log_caux()) / Scalar(2));
    Vector lt(L.p);
    for (Eigen::Index j = 0; j < L.p; ++j) {
      const Scalar lam = exp(q(L.log_lambda(j)));
      lt(j) = c / sqrt(c * c / (lam * lam) + tau * tau);
    }
    return lt;
  }

  Vector beta(const Vector& q) const {
    using std::exp;
    const auto& L = layout_;
    const Scalar tau = exp(q(L.log_tau()));
    return q.segment(L.z(0), L.p).cwiseProduct(lambda_tilde(q)) * tau;
  }

  Scalar log_density(const Vector& q) const { return evaluate(q, nullptr); }

  Scalar log_density_gradient(const Vector& q, Vector& grad) const {
    grad.resize(dimension());
    return evaluate(q, &grad);
  }

  /// Names of write_outputs() entries; effect names label the betas.
  std::vector<std::string> output_names(const std::vector<std::string>& effects, bool include_latent) const;

  /// Constrained quantities: b0, beta, tau, c, sd_a, sd_i, sigma, then
  /// (optionally) lambda, annotator and item intercepts.
  Vector outputs(const Vector& q, bool include_latent) const {
    using std::exp;
    using std::sqrt;
    const auto& L = layout_;
    const Eigen::Index base = 1 + L.p + 5;
    Vector out(base + (include_latent ? L.p + L.n_annotators + L.n_items : 0));
    out(0) = q(L.b0());
    out.segment(1, L.p) = beta(q);
    const Scalar sd_a = exp(q(L.log_sd_a())), sd_i = exp(q(L.log_sd_i()));
    out(1 + L.p) = exp(q(L.log_tau()));
    out(2 + L.p) = Scalar(hyper_.slab_scale) * sqrt(exp(q(L.log_caux())));
    out(3 + L.p) = sd_a;
    out(4 + L.p) = sd_i;
    out(5 + L.p) = exp(q(L.log_sigma()));
    if (include_latent) {
      Eigen::Index o = base;
      for (Eigen::Index j = 0; j < L.p; ++j) out(o++) = exp(q(L.log_lambda(j)));
      for (Eigen::Index k = 0; k < L.n_annotators; ++k) out(o++) = sd_a * q(L.z_u(k));
      for (Eigen::Index k = 0; k < L.n_items; ++k) out(o++) = sd_i * q(L.z_v(k));
    }
    return out;
  }

 private:
  Scalar evaluate(const Vector& q, Vector* grad) const;

  ModelData<Scalar> data_;
  HorseshoeHyper hyper_;
  Layout layout_;
};

template <typename Scalar>
void ModelData<Scalar>::validate() const {
  const auto n = y.size();
  if (x.rows() != n || static_cast<Eigen::Index>(annotator.size()) != n ||
      static_cast<Eigen::Index>(item.size()) != n) {
    throw DataError("model data: row counts of x, y and group indices differ");
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto a = annotator[static_cast<std::size_t>(r)], i = item[static_cast<std::size_t>(r)];
    if (a < 0 || a >= n_annotators || i < 0 || i >= n_items) {
      throw DataError(fmt::format("model data: group index out of range in row {}", r));
    }
  }
  using std::isfinite;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (!isfinite(static_cast<double>(y(r)))) throw DataError(fmt::format("model data: non-finite y in row {}", r));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!isfinite(static_cast<double>(x(r, c)))) {
        throw DataError(fmt::format("model data: non-finite x in row {}, column {}", r, c));
      }
    }
  }
}

template <typename Scalar>
Scalar HorseshoeModel<Scalar>::evaluate(const Vector& q, Vector* grad) const {
  using std::exp;
  using std::isfinite;
  using std::log;
  using std::log1p;
  using std::sqrt;
  using detail::half_t_log_grad;
  using detail::half_t_log_lpdf;

  const auto& L = layout_;
  const auto& h = hyper_;
  const auto n = data_.y.size();
  if (q.size() != dimension()) throw DataError("parameter vector has the wrong dimension");

  const Scalar b0 = q(L.b0());
  const Scalar l_tau = q(L.log_tau()), l_caux = q(L.log_caux());
  const Scalar l_sda = q(L.log_sd_a()), l_sdi = q(L.log_sd_i()), l_sigma = q(L.log_sigma());
  const Scalar tau = exp(l_tau), caux = exp(l_caux);
  const Scalar sd_a = exp(l_sda), sd_i = exp(l_sdi), sigma = exp(l_sigma);
  const Scalar c2 = Scalar(h.slab_scale * h.slab_scale) * caux;
  const Scalar c = sqrt(c2);
  const auto z = q.segment(L.z(0), L.p);
  const auto zu = q.segment(L.z_u(0), L.n_annotators);
  const auto zv = q.segment(L.z_v(0), L.n_items);

  // w_j = c^2 / (c^2 + tau^2 lambda_j^2), stable for large lambda
  Vector lt(L.p), w(L.p), beta(L.p);
  for (Eigen::Index j = 0; j < L.p; ++j) {
    const Scalar lam = exp(q(L.log_lambda(j)));
    const Scalar ratio = tau * lam / c;
    w(j) = Scalar(1) / (Scalar(1) + ratio * ratio);
    lt(j) = c / sqrt(c2 / (lam * lam) + tau * tau);
    beta(j) = z(j) * tau * lt(j);
  }

  Vector mu = data_.x * beta;
  for (Eigen::Index r = 0; r < n; ++r) {
    mu(r) += b0 + sd_a * zu(data_.annotator[static_cast<std::size_t>(r)]) +
             sd_i * zv(data_.item[static_cast<std::size_t>(r)]);
  }
  const Vector resid = data_.y - mu;
  const Scalar inv_var = Scalar(1) / (sigma * sigma);
  const Scalar sq = resid.squaredNorm();

  auto check = [](Scalar v, const char* what) {
    if (!isfinite(static_cast<double>(v))) throw NumericalError(fmt::format("non-finite {} term", what));
    return v;
  };

  Scalar lp = 0;
  lp += check(-Scalar(n) * (Scalar(detail::kHalfLogTwoPi) + l_sigma) - Scalar(0.5) * sq * inv_var, "likelihood");

  // intercept ~ t(df, loc, scale)
  const Scalar dz = (b0 - Scalar(h.intercept_loc)) / Scalar(h.intercept_scale);
  lp += check(Scalar(detail::student_t_const(h.intercept_df)) - log(Scalar(h.intercept_scale)) -
                  Scalar((h.intercept_df + 1) / 2) * log1p(dz * dz / Scalar(h.intercept_df)),
              "intercept prior");

  const Scalar half_log_2pi(detail::kHalfLogTwoPi);
  lp += check(-Scalar(0.5) * z.squaredNorm() - Scalar(L.p) * half_log_2pi, "z prior");
  Scalar local = 0;
  for (Eigen::Index j = 0; j < L.p; ++j) local += half_t_log_lpdf(q(L.log_lambda(j)), h.local_df, Scalar(1));
  lp += check(local, "local scale prior");

  const Scalar tau_scale = Scalar(h.global_scale) * sigma;
  lp += check(half_t_log_lpdf(l_tau, h.global_df, tau_scale), "global scale prior");

  const double a = h.slab_df / 2, b = h.slab_df / 2;
  lp += check(Scalar(a * std::log(b) - std::lgamma(a)) - Scalar(a) * l_caux - Scalar(b) / caux, "slab prior");

  lp += check(-Scalar(0.5) * zu.squaredNorm() - Scalar(L.n_annotators) * half_log_2pi, "annotator intercepts");
  lp += check(-Scalar(0.5) * zv.squaredNorm() - Scalar(L.n_items) * half_log_2pi, "item intercepts");
  const Scalar sd_scale(h.sd_scale);
  lp += check(half_t_log_lpdf(l_sda, h.sd_df, sd_scale), "annotator sd prior");
  lp += check(half_t_log_lpdf(l_sdi, h.sd_df, sd_scale), "item sd prior");
  lp += check(half_t_log_lpdf(l_sigma, h.sd_df, sd_scale), "sigma prior");

  if (!grad) return lp;

  auto& g = *grad;
  const Vector gn = resid * inv_var;
  const Vector G = data_.x.transpose() * gn;  // d loglik / d beta

  g(L.b0()) = gn.sum() - Scalar(h.intercept_df + 1) * (b0 - Scalar(h.intercept_loc)) /
                             (Scalar(h.intercept_df) * Scalar(h.intercept_scale * h.intercept_scale) +
                              (b0 - Scalar(h.intercept_loc)) * (b0 - Scalar(h.intercept_loc)));

  Scalar d_tau = 0, d_caux = 0;
  for (Eigen::Index j = 0; j < L.p; ++j) {
    const Scalar gb = G(j) * beta(j);
    g(L.z(j)) = G(j) * tau * lt(j) - z(j);
    g(L.log_lambda(j)) = gb * w(j) + half_t_log_grad(q(L.log_lambda(j)), h.local_df, Scalar(1));
    d_tau += gb * w(j);
    d_caux += gb * (Scalar(1) - w(j)) / Scalar(2);
  }
  const Scalar u_tau = tau * tau / (Scalar(h.global_df) * tau_scale * tau_scale);
  const Scalar tau_pull = Scalar(h.global_df + 1) * u_tau / (Scalar(1) + u_tau);
  g(L.log_tau()) = d_tau + Scalar(1) - tau_pull;
  g(L.log_caux()) = d_caux - Scalar(a) + Scalar(b) / caux;

  Vector gu = Vector::Zero(L.n_annotators), gv = Vector::Zero(L.n_items);
  for (Eigen::Index r = 0; r < n; ++r) {
    gu(data_.annotator[static_cast<std::size_t>(r)]) += gn(r);
    gv(data_.item[static_cast<std::size_t>(r)]) += gn(r);
  }
  g.segment(L.z_u(0), L.n_annotators) = gu * sd_a - zu;
  g.segment(L.z_v(0), L.n_items) = gv * sd_i - zv;
  g(L.log_sd_a()) = sd_a * gu.dot(zu) + half_t_log_grad(l_sda, h.sd_df, sd_scale);
  g(L.log_sd_i()) = sd_i * gv.dot(zv) + half_t_log_grad(l_sdi, h.sd_df, sd_scale);
  // sigma also scales the global prior of tau
  g(L.log_sigma()) = -Scalar(n) + sq * inv_var + half_t_log_grad(l_sigma, h.sd_df, sd_scale) - Scalar(1) + tau_pull;

  for (Eigen::Index k = 0; k < g.size(); ++k) {
    if (!isfinite(static_cast<double>(g(k)))) {
      throw NumericalError(fmt::format("non-finite gradient component {}", layout_.names()[static_cast<std::size_t>(k)]));
    }
  }
  return lp;
}

template <typename Scalar>
std::vector<std::string> HorseshoeModel<Scalar>::output_names(const std::vector<std::string>& effects,
                                                              bool include_latent) const {
  if (static_cast<Eigen::Index>(effects.size()) != layout_.p) throw DataError("effect names do not match p");
  std::vector<std::string> out{"b_Intercept"};
  for (const auto& e : effects) out.push_back("b_" + e);
  for (auto n : {"hs_global", "hs_slab", "sd_annotator", "sd_item", "sigma"}) out.emplace_back(n);
  if (include_latent) {
    for (const auto& e : effects) out.push_back("hs_local_" + e);
    for (Eigen::Index k = 0; k < layout_.n_annotators; ++k) out.push_back(fmt::format("r_annotator[{}]", k));
    for (Eigen::Index k = 0; k < layout_.n_items; ++k) out.push_back(fmt::format("r_item[{}]", k));
  }
  return out;
}

}  // namespace annolens::hsmlm
