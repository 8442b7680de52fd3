#include "annolens/hsmlm/model.hpp"

#include <algorithm>

namespace annolens::hsmlm {

namespace {

double median_of(std::vector<double> v) {
  const auto n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

HorseshoeHyper HorseshoeHyper::for_outcome(const Eigen::VectorXd& y) {
  HorseshoeHyper h;
  if (y.size() == 0) return h;
  std::vector<double> v(y.data(), y.data() + y.size());
  const double med = median_of(v);
  for (auto& x : v) x = std::abs(x - med);
  const double mad = 1.4826 * median_of(v);
  h.intercept_loc = med;
  h.intercept_scale = mad > 0 ? 2.5 * mad : 2.5;
  return h;
}

void HorseshoeHyper::validate() const {
  const double all[] = {local_df, global_df,    global_scale, slab_df,        slab_scale,
                        sd_df,    sd_scale,     intercept_df, intercept_scale};
  for (double v : all) {
    if (!(v > 0) || !std::isfinite(v)) throw ConfigError("horseshoe hyperparameters must be positive and finite");
  }
  if (!std::isfinite(intercept_loc)) throw ConfigError("intercept prior location must be finite");
}

std::vector<std::string> Layout::names() const {
  std::vector<std::string> out(static_cast<std::size_t>(dimension()));
  auto at = [&](Eigen::Index k) -> std::string& { return out[static_cast<std::size_t>(k)]; };
  at(b0()) = "b0";
  for (Eigen::Index j = 0; j < p; ++j) {
    at(z(j)) = fmt::format("z[{}]", j);
    at(log_lambda(j)) = fmt::format("log_lambda[{}]", j);
  }
  at(log_tau()) = "log_tau";
  at(log_caux()) = "log_caux";
  for (Eigen::Index k = 0; k < n_annotators; ++k) at(z_u(k)) = fmt::format("z_u[{}]", k);
  at(log_sd_a()) = "log_sd_annotator";
  for (Eigen::Index k = 0; k < n_items; ++k) at(z_v(k)) = fmt::format("z_v[{}]", k);
  at(log_sd_i()) = "log_sd_item";
  at(log_sigma()) = "log_sigma";
  return out;
}

}  // namespace annolens::hsmlm
