#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mtts/core_model.hpp"
#include "mtts/gaussian_posterior.hpp"

namespace mtts {

// Mixed-effect Gaussian process: f_a ~ GP(mean_a, kernel_a) independently per
// arm, r_i = f(x_i) + delta_i with delta_i ~ N(0, Sigma).
struct GPConfig {
  using MeanFn = std::function<double(const Vector&)>;
  using KernelFn = std::function<double(const Vector&, const Vector&)>;

  std::vector<MeanFn> mean_fns;
  std::vector<KernelFn> kernel_fns;
  Matrix sigma_delta;
  double sigma_noise = 1.0;

  [[nodiscard]] std::size_t arms() const { return mean_fns.size(); }

  void validate() const {
    if (mean_fns.empty() || mean_fns.size() != kernel_fns.size())
      throw ConfigError("GPConfig: need one mean and one kernel function per arm");
    if (static_cast<std::size_t>(sigma_delta.rows()) != arms() || !linalg::is_symmetric_psd(sigma_delta))
      throw ConfigError("GPConfig: Sigma must be K x K symmetric PSD");
    if (!(sigma_noise > 0.0)) throw ConfigError("GPConfig: sigma must be > 0");
  }
};

inline constexpr std::size_t kMaxGpRecords = 5000;

// Dense conditioning under the kernel
//   k(O, O') = kernel_a(x, x') 1(a = a') + Sigma_{a,a'} 1(i = i').
// The observation noise is the reward noise variance sigma^2.
inline GaussianBelief posterior_r_gp(const GPConfig& gp, const History& h, const MetadataLookup& metadata,
                                     TaskId target_task, const Vector& target_x) {
  gp.validate();
  if (h.size() > kMaxGpRecords)
    throw ConfigError("posterior_r_gp: history exceeds the dense-solver cap of 5000 records");
  const auto k = static_cast<Eigen::Index>(gp.arms());
  Vector prior_mean(k);
  Matrix k_i = Matrix::Zero(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    prior_mean(a) = gp.mean_fns[static_cast<std::size_t>(a)](target_x);
    k_i(a, a) = gp.kernel_fns[static_cast<std::size_t>(a)](target_x, target_x);
  }
  const Matrix prior_cov = k_i + gp.sigma_delta;
  if (h.empty()) return {prior_mean, prior_cov};

  const auto n = static_cast<Eigen::Index>(h.size());
  Matrix gram(n, n);
  Matrix cross(k, n);
  Vector resid(n);
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto& rl = h[static_cast<std::size_t>(l)];
    if (rl.action >= gp.arms()) throw ConfigError("posterior_r_gp: action out of range");
    const Vector& xl = metadata(rl.task_id);
    const auto al = static_cast<Eigen::Index>(rl.action);
    resid(l) = rl.reward - gp.mean_fns[rl.action](xl);
    for (Eigen::Index m = 0; m <= l; ++m) {
      const auto& rm = h[static_cast<std::size_t>(m)];
      double v = 0.0;
      if (rl.action == rm.action) v += gp.kernel_fns[rl.action](xl, metadata(rm.task_id));
      if (rl.task_id == rm.task_id) v += gp.sigma_delta(al, static_cast<Eigen::Index>(rm.action));
      gram(l, m) = v;
      gram(m, l) = v;
    }
    for (Eigen::Index a = 0; a < k; ++a) {
      double v = 0.0;
      if (a == al) v += gp.kernel_fns[static_cast<std::size_t>(a)](target_x, xl);
      if (rl.task_id == target_task) v += gp.sigma_delta(al, a);
      cross(a, l) = v;
    }
  }
  gram.diagonal().array() += gp.sigma_noise * gp.sigma_noise;
  const linalg::JitteredCholesky chol(gram, "GP kernel + sigma^2 I");
  const Vector mean = prior_mean + cross * chol.solve(resid);
  const Matrix cov = prior_cov - cross * chol.solve(Matrix(cross.transpose()));
  return {mean, cov};
}

// Squared-exponential kernel with variance and length scale.
inline GPConfig::KernelFn rbf_kernel(double variance, double length_scale) {
  return [variance, length_scale](const Vector& x, const Vector& y) {
    return variance * std::exp(-0.5 * (x - y).squaredNorm() / (length_scale * length_scale));
  };
}

}  // namespace mtts
