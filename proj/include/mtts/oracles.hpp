#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "mtts/bernoulli_posterior.hpp"
#include "mtts/core_model.hpp"
#include "mtts/gaussian_posterior.hpp"
#include "mtts/random.hpp"

// Slow, independent reference computations used by tests and `validate`.
namespace mtts::oracle {

// Conditions the joint Gaussian of the latents z = (theta, delta_j for every
// task in h plus the target) on the observations, then maps to r_target.
inline GaussianBelief joint_conditioning(const HierarchyConfig& cfg, const FeatureMap& fm, const History& h,
                                         const MetadataLookup& metadata, TaskId target_task, const Vector& target_x) {
  const auto d = static_cast<Eigen::Index>(cfg.dim());
  const auto k = static_cast<Eigen::Index>(cfg.arms());
  std::map<TaskId, Eigen::Index> slot;
  slot[target_task] = 0;
  for (const auto& r : h.records()) slot.emplace(r.task_id, 0);
  Eigen::Index next = d;
  for (auto& [task, off] : slot) {
    off = next;
    next += k;
  }
  const Eigen::Index m = next;

  Vector prior_mean = Vector::Zero(m);
  prior_mean.head(d) = cfg.mu_theta();
  Matrix prior_cov = Matrix::Zero(m, m);
  prior_cov.topLeftCorner(d, d) = cfg.sigma_theta();
  for (const auto& [task, off] : slot) prior_cov.block(off, off, k, k) = cfg.sigma_delta();

  const auto n = static_cast<Eigen::Index>(h.size());
  Matrix a = Matrix::Zero(n, m);
  Vector y(n);
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto& r = h[static_cast<std::size_t>(l)];
    a.row(l).head(d) = fm(metadata(r.task_id), r.action).transpose();
    a(l, slot[r.task_id] + static_cast<Eigen::Index>(r.action)) = 1.0;
    y(l) = r.reward;
  }

  Vector post_mean = prior_mean;
  Matrix post_cov = prior_cov;
  if (n > 0) {
    Matrix s = a * prior_cov * a.transpose();
    s.diagonal().array() += cfg.noise_variance();
    const Eigen::LDLT<Matrix> ldlt(s);
    const Matrix gain = prior_cov * a.transpose();
    post_mean = prior_mean + gain * ldlt.solve(y - a * prior_mean);
    post_cov = prior_cov - gain * ldlt.solve(Matrix(gain.transpose()));
  }

  Matrix l = Matrix::Zero(k, m);
  l.leftCols(d) = build_task_feature_matrix(fm, target_x);
  l.block(0, slot[target_task], k, k) = Matrix::Identity(k, k);
  return {l * post_mean, linalg::symmetrize(l * post_cov * l.transpose())};
}

// theta block of the same joint conditioning.
inline ThetaPosterior joint_theta(const HierarchyConfig& cfg, const FeatureMap& fm, const History& h,
                                  const MetadataLookup& metadata) {
  const auto d = static_cast<Eigen::Index>(cfg.dim());
  const auto n = static_cast<Eigen::Index>(h.size());
  if (n == 0) return {cfg.mu_theta(), cfg.sigma_theta()};
  Matrix phi(n, d);
  Vector y(n);
  Matrix v = Matrix::Zero(n, n);
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto& rl = h[static_cast<std::size_t>(l)];
    phi.row(l) = fm(metadata(rl.task_id), rl.action).transpose();
    y(l) = rl.reward;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& rj = h[static_cast<std::size_t>(j)];
      if (rl.task_id == rj.task_id)
        v(l, j) = cfg.sigma_delta()(static_cast<Eigen::Index>(rl.action), static_cast<Eigen::Index>(rj.action));
    }
  }
  v.diagonal().array() += cfg.noise_variance();
  const Matrix s = phi * cfg.sigma_theta() * phi.transpose() + v;
  const Eigen::LDLT<Matrix> ldlt(s);
  const Matrix gain = cfg.sigma_theta() * phi.transpose();
  return {cfg.mu_theta() + gain * ldlt.solve(y - phi * cfg.mu_theta()),
          linalg::symmetrize(cfg.sigma_theta() - gain * ldlt.solve(Matrix(gain.transpose())))};
}

struct ScalarNormal {
  double mean = 0.0;
  double var = 0.0;
};

// One-arm normal-normal update, one observation at a time.
inline ScalarNormal scalar_gaussian_update(double prior_mean, double prior_var, double noise_var,
                                           const std::vector<double>& rewards) {
  ScalarNormal s{prior_mean, prior_var};
  for (double r : rewards) {
    const double gain = s.var / (s.var + noise_var);
    s.mean += gain * (r - s.mean);
    s.var *= noise_var / (s.var + noise_var);
  }
  return s;
}

// Ridge / Bayesian linear regression posterior for theta when Sigma = 0.
inline ThetaPosterior ridge_theta(const HierarchyConfig& cfg, const Matrix& phi, const Vector& y) {
  const Matrix prec = cfg.sigma_theta_inverse() + phi.transpose() * phi / cfg.noise_variance();
  const Matrix cov = linalg::symmetrize(prec.inverse());
  return {cov * (cfg.sigma_theta_inverse() * cfg.mu_theta() + phi.transpose() * y / cfg.noise_variance()), cov};
}

// Normalized density of a scalar theta on a uniform grid, given fixed latent
// arm means and a scalar feature per latent.
struct GridDensity {
  std::vector<double> grid;
  std::vector<double> mass;  // sums to 1
};

inline GridDensity quadrature_theta_1d(double prior_mean, double prior_var, double psi, const Vector& features,
                                       const Vector& latent, double lo, double hi, std::size_t points) {
  GridDensity g;
  std::vector<double> logp(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < points; ++j) {
    const double t = lo + step * static_cast<double>(j);
    double lp = -0.5 * (t - prior_mean) * (t - prior_mean) / prior_var;
    for (Eigen::Index l = 0; l < latent.size(); ++l)
      lp += beta_log_pdf(latent(l), beta_from_mean_precision(clamp_mean(logistic(features(l) * t)), psi));
    g.grid.push_back(t);
    logp[j] = lp;
    mx = std::max(mx, lp);
  }
  double total = 0.0;
  for (double& lp : logp) total += (lp = std::exp(lp - mx));
  for (double lp : logp) g.mass.push_back(lp / total);
  return g;
}

// Exact marginal posterior of a scalar theta given Bernoulli counts: the
// latent arm means integrate out to Beta-Binomial likelihoods.
inline GridDensity quadrature_theta_counts_1d(double prior_mean, double prior_var, double psi, const Vector& features,
                                              const Vector& successes, const Vector& failures, double lo, double hi,
                                              std::size_t points) {
  GridDensity g;
  std::vector<double> logp(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < points; ++j) {
    const double t = lo + step * static_cast<double>(j);
    double lp = -0.5 * (t - prior_mean) * (t - prior_mean) / prior_var;
    for (Eigen::Index l = 0; l < features.size(); ++l) {
      const BetaParams b = beta_from_mean_precision(clamp_mean(logistic(features(l) * t)), psi);
      lp += log_beta_function(b.alpha1 + successes(l), b.alpha2 + failures(l)) - log_beta_function(b.alpha1, b.alpha2);
    }
    g.grid.push_back(t);
    logp[j] = lp;
    mx = std::max(mx, lp);
  }
  double total = 0.0;
  for (double& lp : logp) total += (lp = std::exp(lp - mx));
  for (double lp : logp) g.mass.push_back(lp / total);
  return g;
}

// Total-variation distance between the empirical law of `samples` and a grid
// density, both binned into `bins` equal cells over the grid's range. Samples
// outside the range count fully towards the distance.
inline double binned_tv_distance(const std::vector<double>& samples, const GridDensity& g, std::size_t bins) {
  const double lo = g.grid.front();
  const double hi = g.grid.back();
  const double width = (hi - lo) / static_cast<double>(bins);
  auto cell = [&](double v) {
    return std::min<std::size_t>(bins - 1, static_cast<std::size_t>((v - lo) / width));
  };
  std::vector<double> q(bins, 0.0);
  for (std::size_t j = 0; j < g.grid.size(); ++j) q[cell(g.grid[j])] += g.mass[j];
  std::vector<double> p(bins, 0.0);
  double outside = 0.0;
  const double w = 1.0 / static_cast<double>(samples.size());
  for (double v : samples) {
    if (v < lo || v > hi) outside += w;
    else p[cell(v)] += w;
  }
  double tv = outside;
  for (std::size_t b = 0; b < bins; ++b) tv += std::fabs(p[b] - q[b]);
  return 0.5 * tv;
}

inline Matrix random_spd(Rng& rng, Eigen::Index n, double ridge = 0.1) {
  const Matrix a = random::standard_normal_vector(rng, n * n).reshaped(n, n);
  Matrix s = a * a.transpose() / static_cast<double>(n);
  s.diagonal().array() += ridge;
  return s;
}

struct LmmInstance {
  HierarchyConfig cfg;
  FeatureMap fm;
  std::vector<Vector> metadata;
  History history;
  TaskId target = 0;
};

// Small random LMM problem: N <= 6 tasks, <= 5 records per task, K <= 3,
// d <= 4. `diagonal` forces Sigma = s I.
inline LmmInstance random_lmm(Rng& rng, bool diagonal = false) {
  std::uniform_int_distribution<std::size_t> kd(1, 3);
  const std::size_t k = kd(rng);
  std::uniform_int_distribution<std::size_t> dd(k, 4);
  const std::size_t d = dd(rng);
  std::uniform_int_distribution<std::size_t> nd(1, 6);
  const std::size_t n_tasks = nd(rng);
  std::uniform_real_distribution<double> u(0.2, 1.5);
  const auto kk = static_cast<Eigen::Index>(k);
  const auto ddim = static_cast<Eigen::Index>(d);

  Matrix sigma_delta = diagonal ? Matrix(u(rng) * Matrix::Identity(kk, kk)) : random_spd(rng, kk, 0.05);
  HierarchyConfig cfg(random::standard_normal_vector(rng, ddim), random_spd(rng, ddim), sigma_delta, u(rng));
  FeatureMap fm = FeatureMap::indicator_plus_metadata(k, d);
  std::vector<Vector> metadata;
  for (std::size_t i = 0; i < n_tasks; ++i)
    metadata.push_back(random::standard_normal_vector(rng, static_cast<Eigen::Index>(fm.metadata_dim())));

  History h;
  std::uniform_int_distribution<std::size_t> rec(0, 5);
  std::uniform_int_distribution<std::size_t> arm(0, k - 1);
  std::normal_distribution<double> z(0.0, 1.0);
  for (TaskId i = 0; i < n_tasks; ++i) {
    const std::size_t m = rec(rng);
    for (std::size_t t = 1; t <= m; ++t) h.append({i, arm(rng), 2.0 * z(rng), t});
  }
  std::uniform_int_distribution<TaskId> tg(0, n_tasks - 1);
  return {std::move(cfg), std::move(fm), std::move(metadata), std::move(h), tg(rng)};
}

// Scalar-theta BBLM problem with phi(x, a) = x_a.
struct ScalarBblm {
  HierarchyConfig cfg;
  FeatureMap fm;
  std::vector<Vector> metadata;
  History history;
  Vector features;   // one entry per (task, arm)
  Vector successes;
  Vector failures;
};

inline ScalarBblm scalar_bblm(std::uint64_t seed, std::size_t tasks, std::size_t rounds, double theta, double psi) {
  Rng rng(seed);
  const std::size_t k = 2;
  auto fm = FeatureMap::custom(k, k, 1, [](const Vector& x, Arm a) {
    return Vector(Vector::Constant(1, x(static_cast<Eigen::Index>(a))));
  });
  HierarchyConfig cfg(Vector::Zero(1), Matrix::Identity(1, 1), 0.01 * Matrix::Identity(2, 2), 1.0, psi);
  ScalarBblm out{cfg, fm, {}, {}, Vector::Zero(static_cast<Eigen::Index>(tasks * k)),
                 Vector::Zero(static_cast<Eigen::Index>(tasks * k)), Vector::Zero(static_cast<Eigen::Index>(tasks * k))};
  std::uniform_int_distribution<Arm> arm(0, k - 1);
  for (TaskId i = 0; i < tasks; ++i) {
    const Vector x = random::standard_normal_vector(rng, 2);
    out.metadata.push_back(x);
    Vector r(2);
    for (Eigen::Index a = 0; a < 2; ++a) {
      const auto b = beta_from_mean_precision(clamp_mean(logistic(x(a) * theta)), psi);
      r(a) = random::beta_variate(rng, b.alpha1, b.alpha2);
      out.features(static_cast<Eigen::Index>(i * k) + a) = x(a);
    }
    for (std::size_t t = 1; t <= rounds; ++t) {
      const Arm a = arm(rng);
      std::bernoulli_distribution coin(r(static_cast<Eigen::Index>(a)));
      const double y = coin(rng) ? 1.0 : 0.0;
      out.history.append({i, a, y, t});
      const auto row = static_cast<Eigen::Index>(i * k + a);
      (y > 0.5 ? out.successes : out.failures)(row) += 1.0;
    }
  }
  return out;
}

}  // namespace mtts::oracle
