#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mtts/core_model.hpp"
#include "mtts/linalg.hpp"
#include "mtts/random.hpp"

namespace mtts {

// Saturation bounds for Beta means, so both shapes stay finite.
inline constexpr double kMeanFloor = 1e-6;
inline constexpr double kMeanCeil = 1.0 - 1e-6;
// Latent arm means are kept away from {0, 1} before taking logs.
inline constexpr double kLatentFloor = 1e-12;

inline double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double clamp_mean(double mu) { return std::clamp(mu, kMeanFloor, kMeanCeil); }

// Shapes (alpha1, alpha2); mean mu = alpha1 / (alpha1 + alpha2) and precision
// psi = 1 / (alpha1 + alpha2).
struct BetaParams {
  double alpha1 = 1.0;
  double alpha2 = 1.0;

  [[nodiscard]] double mean() const { return alpha1 / (alpha1 + alpha2); }
  [[nodiscard]] double precision() const { return 1.0 / (alpha1 + alpha2); }
  [[nodiscard]] double variance() const {
    const double mu = mean();
    const double psi = precision();
    return mu * (1.0 - mu) * psi / (1.0 + psi);
  }
};

inline BetaParams beta_from_mean_precision(double mu, double psi) {
  if (!(mu > 0.0 && mu < 1.0)) throw ArgumentError("beta_from_mean_precision: mu must lie in (0, 1)");
  if (!(psi > 0.0) || !std::isfinite(psi)) throw ArgumentError("beta_from_mean_precision: psi must be > 0");
  return {mu / psi, (1.0 - mu) / psi};
}

// psi(mu, v) = [mu (1 - mu) / v - 1]^{-1}; requires 0 < v < mu (1 - mu).
inline double precision_from_mean_variance(double mu, double variance) {
  if (!(variance > 0.0) || !(variance < mu * (1.0 - mu)))
    throw ArgumentError("precision_from_mean_variance: need 0 < var < mu (1 - mu)");
  return 1.0 / (mu * (1.0 - mu) / variance - 1.0);
}

inline BetaParams conjugate_update(const BetaParams& prior, double successes, double failures) {
  if (successes < 0.0 || failures < 0.0) throw ArgumentError("conjugate_update: negative count");
  return {prior.alpha1 + successes, prior.alpha2 + failures};
}

// Prior plus integer success / failure counts. Shapes are formed from the
// totals, so one-at-a-time and batched updates give identical parameters.
struct BetaBelief {
  BetaParams prior;
  double successes = 0.0;
  double failures = 0.0;

  void observe(double reward) { (reward > 0.5 ? successes : failures) += 1.0; }
  void observe_batch(double s, double f) {
    if (s < 0.0 || f < 0.0) throw ArgumentError("BetaBelief: negative count");
    successes += s;
    failures += f;
  }
  [[nodiscard]] BetaParams params() const { return conjugate_update(prior, successes, failures); }
};

// r_{i,a} ~ Beta(logistic(phi(x, a)^T theta), psi), means saturated.
inline std::vector<BetaParams> bblm_prior_for_task(const Vector& theta, const FeatureMap& fm, const Vector& x,
                                                   double psi) {
  const Matrix phi = build_task_feature_matrix(fm, x);
  const Vector eta = phi * theta;
  std::vector<BetaParams> out;
  out.reserve(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index a = 0; a < eta.size(); ++a)
    out.push_back(beta_from_mean_precision(clamp_mean(logistic(eta(a))), psi));
  return out;
}

inline double log_beta_function(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

inline double beta_log_pdf(double r, const BetaParams& p) {
  const double x = std::clamp(r, kLatentFloor, 1.0 - kLatentFloor);
  return (p.alpha1 - 1.0) * std::log(x) + (p.alpha2 - 1.0) * std::log1p(-x) - log_beta_function(p.alpha1, p.alpha2);
}

inline double gaussian_log_density(const Vector& theta, const Vector& mu, const linalg::JitteredCholesky& chol) {
  const Vector diff = theta - mu;
  const double quad = diff.dot(chol.solve(diff));
  const auto d = static_cast<double>(theta.size());
  return -0.5 * (quad + chol.log_determinant() + d * std::log(2.0 * std::numbers::pi));
}

// log p(theta) + sum over (task, arm) of log Beta(r_{i,a}; logistic(phi^T theta), psi).
inline double log_posterior_theta(const Vector& theta, const HierarchyConfig& cfg, const FeatureMap& fm,
                                  const MetadataLookup& metadata, const std::map<TaskId, Vector>& latent_r) {
  double lp = gaussian_log_density(theta, cfg.mu_theta(), cfg.sigma_theta_cholesky());
  for (const auto& [task, r] : latent_r) {
    const auto priors = bblm_prior_for_task(theta, fm, metadata(task), cfg.psi());
    for (std::size_t a = 0; a < priors.size(); ++a) lp += beta_log_pdf(r(static_cast<Eigen::Index>(a)), priors[a]);
  }
  return lp;
}

struct ThetaChain {
  std::vector<Vector> samples;
  double acceptance_rate = 0.0;
  double step_scale = 0.0;
  std::size_t accepted = 0;
  std::size_t proposals = 0;
  bool acceptance_warning = false;  // rate outside [0.05, 0.95] after adaptation

  [[nodiscard]] Vector mean() const {
    Vector m = Vector::Zero(samples.front().size());
    for (const auto& s : samples) m += s;
    return m / static_cast<double>(samples.size());
  }

  [[nodiscard]] Vector stddev() const {
    const Vector m = mean();
    Vector v = Vector::Zero(m.size());
    for (const auto& s : samples) v += (s - m).cwiseAbs2();
    const double denom = samples.size() > 1 ? static_cast<double>(samples.size() - 1) : 1.0;
    return (v / denom).cwiseSqrt();
  }
};

struct McmcOptions {
  std::size_t n_samples = 2000;
  std::size_t burn_in = 1000;
  double target_acceptance = 0.3;
  std::optional<Vector> initial_theta;
  std::optional<double> initial_step;
};

namespace detail {

// Stacked features of every (task, arm) latent, with success/failure counts.
struct BblmData {
  Matrix features;  // (tasks * K) x d
  Vector successes;
  Vector failures;
  std::vector<TaskId> tasks;
};

inline BblmData gather_bblm_data(const FeatureMap& fm, const History& h, const MetadataLookup& metadata) {
  BblmData out;
  const auto k = static_cast<Eigen::Index>(fm.arms());
  for (const auto& [task, idx] : h.per_task_index()) out.tasks.push_back(task);
  const auto rows = static_cast<Eigen::Index>(out.tasks.size()) * k;
  out.features.resize(rows, static_cast<Eigen::Index>(fm.dim()));
  out.successes = Vector::Zero(rows);
  out.failures = Vector::Zero(rows);
  for (std::size_t t = 0; t < out.tasks.size(); ++t) {
    const auto base = static_cast<Eigen::Index>(t) * k;
    out.features.middleRows(base, k) = build_task_feature_matrix(fm, metadata(out.tasks[t]));
    for (std::size_t j : h.task_indices(out.tasks[t])) {
      const auto& rec = h[j];
      if (rec.action >= fm.arms()) throw ConfigError("history action out of range");
      const auto row = base + static_cast<Eigen::Index>(rec.action);
      if (rec.reward > 0.5) out.successes(row) += 1.0;
      else out.failures(row) += 1.0;
    }
  }
  return out;
}

inline double latent_log_likelihood(const Vector& eta, const Vector& latent, double psi) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < eta.size(); ++j) {
    const BetaParams p = beta_from_mean_precision(clamp_mean(logistic(eta(j))), psi);
    acc += beta_log_pdf(latent(j), p);
  }
  return acc;
}

// Random-walk Metropolis on theta with the latent means held fixed. Returns
// the accepted flag and updates theta / log-density in place.
struct MetropolisKernel {
  const HierarchyConfig* cfg;
  const Matrix* features;
  Matrix proposal_factor;  // Cholesky factor of Sigma_theta

  [[nodiscard]] double log_density(const Vector& theta, const Vector& latent) const {
    return gaussian_log_density(theta, cfg->mu_theta(), cfg->sigma_theta_cholesky()) +
           latent_log_likelihood(*features * theta, latent, cfg->psi());
  }

  bool step(Vector& theta, double& lp, const Vector& latent, double scale, Rng& rng) const {
    const Vector z = random::standard_normal_vector(rng, theta.size());
    const Vector prop = theta + scale * (proposal_factor * z);
    const double lp_prop = log_density(prop, latent);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double log_u = std::log(u(rng));
    if (log_u < lp_prop - lp) {
      theta = prop;
      lp = lp_prop;
      return true;
    }
    return false;
  }
};

inline void finish_chain(ThetaChain& chain, double step) {
  chain.step_scale = step;
  chain.acceptance_rate =
      chain.proposals == 0 ? 0.0 : static_cast<double>(chain.accepted) / static_cast<double>(chain.proposals);
  chain.acceptance_warning = chain.acceptance_rate < 0.05 || chain.acceptance_rate > 0.95;
}

inline double adapt_step(double step, bool accepted, std::size_t iter, double target) {
  const double gamma = std::pow(static_cast<double>(iter) + 1.0, -0.6);
  return step * std::exp(gamma * ((accepted ? 1.0 : 0.0) - target));
}

}  // namespace detail

// Metropolis-within-Gibbs for theta | H under the Beta-Bernoulli logistic model.
// Each sweep draws every latent r_{i,a} from its Beta-Binomial conditional,
// then takes one random-walk Metropolis step on theta. The step scale follows
// a Robbins-Monro recursion towards the target acceptance during burn-in only.
inline ThetaChain sample_theta_mcmc(const HierarchyConfig& cfg, const FeatureMap& fm, const History& h,
                                    const MetadataLookup& metadata, Rng& rng, const McmcOptions& opt = {}) {
  if (cfg.dim() != fm.dim() || cfg.arms() != fm.arms()) throw ConfigError("HierarchyConfig and FeatureMap disagree");
  if (opt.n_samples < 1) throw ConfigError("sample_theta_mcmc: n_samples must be >= 1");
  const detail::BblmData data = detail::gather_bblm_data(fm, h, metadata);
  const detail::MetropolisKernel kernel{&cfg, &data.features, cfg.sigma_theta_cholesky().lower()};
  const auto d = static_cast<double>(fm.dim());

  Vector theta = opt.initial_theta.value_or(cfg.mu_theta());
  double step = opt.initial_step.value_or(2.38 / std::sqrt(d));
  Vector latent(data.features.rows());
  const double psi = cfg.psi();

  ThetaChain chain;
  chain.samples.reserve(opt.n_samples);
  const std::size_t total = opt.burn_in + opt.n_samples;
  for (std::size_t it = 0; it < total; ++it) {
    const Vector eta = data.features * theta;
    for (Eigen::Index j = 0; j < latent.size(); ++j) {
      const BetaParams prior = beta_from_mean_precision(clamp_mean(logistic(eta(j))), psi);
      const BetaParams post = conjugate_update(prior, data.successes(j), data.failures(j));
      latent(j) = random::beta_variate(rng, post.alpha1, post.alpha2);
    }
    double lp = kernel.log_density(theta, latent);
    const bool acc = kernel.step(theta, lp, latent, step, rng);
    if (it < opt.burn_in) {
      step = detail::adapt_step(step, acc, it, opt.target_acceptance);
    } else {
      ++chain.proposals;
      if (acc) ++chain.accepted;
      chain.samples.push_back(theta);
    }
  }
  detail::finish_chain(chain, step);
  return chain;
}

// Metropolis kernel alone, for a fixed set of latent means (rows of `features`
// paired with entries of `latent`). Used to check the kernel's stationary law.
inline ThetaChain metropolis_theta_fixed_latent(const HierarchyConfig& cfg, const Matrix& features,
                                                const Vector& latent, Rng& rng, const McmcOptions& opt = {}) {
  if (features.rows() != latent.size() || static_cast<std::size_t>(features.cols()) != cfg.dim())
    throw ConfigError("metropolis_theta_fixed_latent: dimension mismatch");
  const detail::MetropolisKernel kernel{&cfg, &features, cfg.sigma_theta_cholesky().lower()};
  Vector theta = opt.initial_theta.value_or(cfg.mu_theta());
  double step = opt.initial_step.value_or(2.38 / std::sqrt(static_cast<double>(cfg.dim())));
  double lp = kernel.log_density(theta, latent);
  ThetaChain chain;
  chain.samples.reserve(opt.n_samples);
  for (std::size_t it = 0; it < opt.burn_in + opt.n_samples; ++it) {
    const bool acc = kernel.step(theta, lp, latent, step, rng);
    if (it < opt.burn_in) {
      step = detail::adapt_step(step, acc, it, opt.target_acceptance);
    } else {
      ++chain.proposals;
      if (acc) ++chain.accepted;
      chain.samples.push_back(theta);
    }
  }
  detail::finish_chain(chain, step);
  return chain;
}

}  // namespace mtts
