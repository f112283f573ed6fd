#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "mtts/bernoulli_posterior.hpp"
#include "mtts/environments.hpp"
#include "mtts/gaussian_posterior.hpp"

namespace mtts {

// Priors handed to the baselines, obtained by marginalizing the generative
// model with the laws of total expectation and total variance.
struct DerivedPriors {
  // Gaussian
  GaussianBelief marginal_gaussian;  // p(r) with theta and x integrated out (OSFA, individual-TS)
  double conditional_variance = 0.0; // sigma1^2 + |theta_{K+1:d}|^2 (meta-TS sigma_m^2)
  double linear_ts_noise = 0.0;      // sigma1^2 + sigma^2
  double meta_hyper_variance = 0.0;  // prior variance of each mu_{m,a}

  // Bernoulli
  std::vector<BetaParams> marginal_beta;            // per arm, Beta(1/2, psi(1/2, var(r)))
  Vector conditional_mean_given_theta;              // E(r_i | theta)
  Vector within_variance;                           // c_b: E_x[var(r | x, theta)]
  Vector between_variance;                          // c'_b: var_x(E(r | x, theta))
  std::vector<std::vector<BetaParams>> bernoulli_candidates;  // meta-TS candidate priors
  std::vector<double> candidate_weights;
};

inline constexpr std::size_t kBernoulliCandidates = 10;

inline DerivedPriors derive_baseline_priors(const PopulationSpec& spec, const Vector& true_theta,
                                            std::size_t n_mc = 20000, std::size_t n_candidates = kBernoulliCandidates) {
  spec.validate();
  const auto k = static_cast<Eigen::Index>(spec.arms);
  const auto tail = static_cast<Eigen::Index>(spec.dim - spec.arms);
  if (static_cast<std::size_t>(true_theta.size()) != spec.dim) throw ConfigError("derive_baseline_priors: theta length != d");
  const double v_theta = spec.theta_var();

  DerivedPriors out;
  const double tail_sq = true_theta.tail(tail).squaredNorm();
  const double marginal_var = spec.sigma1_sq + static_cast<double>(tail) * v_theta + v_theta;
  out.marginal_gaussian = GaussianBelief(Vector::Zero(k), marginal_var * Matrix::Identity(k, k));
  out.conditional_variance = spec.sigma1_sq + tail_sq;
  out.linear_ts_noise = spec.sigma1_sq + spec.sigma * spec.sigma;
  out.meta_hyper_variance = v_theta;

  if (spec.reward != RewardKind::Bernoulli) return out;
  if (n_mc < 1000) throw ConfigError("derive_baseline_priors: n_mc must be >= 1000 for Bernoulli rewards");
  if (n_candidates < 1) throw ConfigError("derive_baseline_priors: need at least one candidate prior");

  Rng rng = random::make_rng(spec.seed, "priors");
  std::normal_distribution<double> z(0.0, 1.0);
  const double psi = spec.psi;
  const double shrink = psi / (1.0 + psi);

  // Given theta: phi^T theta = theta_a + phi~^T theta_tail with phi~ ~ N(0, I).
  out.conditional_mean_given_theta = Vector::Zero(k);
  out.within_variance = Vector::Zero(k);
  out.between_variance = Vector::Zero(k);
  const double tail_norm = std::sqrt(tail_sq);
  for (Eigen::Index a = 0; a < k; ++a) {
    std::vector<double> draws(n_mc);
    double sum = 0.0;
    double within = 0.0;
    for (auto& l : draws) {
      l = clamp_mean(logistic(true_theta(a) + tail_norm * z(rng)));
      sum += l;
      within += l * (1.0 - l);
    }
    const double mean = sum / static_cast<double>(n_mc);
    double ss = 0.0;
    for (double l : draws) ss += (l - mean) * (l - mean);
    out.conditional_mean_given_theta(a) = mean;
    out.within_variance(a) = shrink * within / static_cast<double>(n_mc);
    out.between_variance(a) = ss / static_cast<double>(n_mc);
  }

  // Marginal over theta as well: theta_a ~ N(0, v) and phi~^T theta_tail given
  // theta_tail is N(0, |theta_tail|^2) with |theta_tail|^2 ~ v chi^2_{d-K}.
  {
    std::vector<double> draws(n_mc);
    double sum = 0.0;
    double within = 0.0;
    const double sd = std::sqrt(v_theta);
    for (auto& l : draws) {
      double norm_sq = 0.0;
      for (Eigen::Index j = 0; j < tail; ++j) {
        const double t = sd * z(rng);
        norm_sq += t * t;
      }
      const double head = sd * z(rng);
      l = clamp_mean(logistic(head + std::sqrt(norm_sq) * z(rng)));
      sum += l;
      within += l * (1.0 - l);
    }
    const double mean = sum / static_cast<double>(n_mc);
    double ss = 0.0;
    for (double l : draws) ss += (l - mean) * (l - mean);
    const double var_r = shrink * within / static_cast<double>(n_mc) + ss / static_cast<double>(n_mc);
    const double psi_marginal = precision_from_mean_variance(0.5, var_r);
    out.marginal_beta.assign(spec.arms, beta_from_mean_precision(0.5, psi_marginal));
  }

  // meta-TS candidates: the truth-derived prior plus uniformly drawn means.
  std::vector<BetaParams> truth;
  std::vector<double> precisions;
  for (Eigen::Index a = 0; a < k; ++a) {
    const double mu = out.conditional_mean_given_theta(a);
    const double var = out.within_variance(a) + out.between_variance(a);
    const double prec = precision_from_mean_variance(mu, std::min(var, 0.999 * mu * (1.0 - mu)));
    precisions.push_back(prec);
    truth.push_back(beta_from_mean_precision(mu, prec));
  }
  out.bernoulli_candidates.push_back(truth);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (std::size_t c = 1; c < n_candidates; ++c) {
    std::vector<BetaParams> cand;
    for (Eigen::Index a = 0; a < k; ++a) cand.push_back(beta_from_mean_precision(u(rng), precisions[static_cast<std::size_t>(a)]));
    out.bernoulli_candidates.push_back(std::move(cand));
  }
  out.candidate_weights.assign(n_candidates, 1.0 / static_cast<double>(n_candidates));
  return out;
}

// -1/2 [R~^T (K(Sigma) + sigma^2 I)^{-1} R~ + log|K(Sigma) + sigma^2 I| + n log(2 pi)],
// evaluated blockwise through the workspace.
inline double log_marginal_likelihood(double sigma, const Matrix& sigma_delta, const HierarchyConfig& base,
                                      const FeatureMap& fm, const History& h, const MetadataLookup& metadata) {
  if (h.empty()) throw ConfigError("log_marginal_likelihood: history is empty");
  const HierarchyConfig cfg = base.with_variances(sigma, sigma_delta);
  const KernelWorkspace ws(cfg, fm, metadata, h);
  const auto t = ws.likelihood_terms();
  const double n = static_cast<double>(h.size());
  const double ll = -0.5 * (t.quad + t.logdet + n * std::log(2.0 * std::numbers::pi));
  if (!std::isfinite(ll)) throw NumericalError("log_marginal_likelihood: non-finite value");
  return ll;
}

struct VarianceComponents {
  double sigma = 0.0;
  double sigma1_sq = 0.0;
  double log_likelihood = -std::numeric_limits<double>::infinity();
};

// Grid maximizer of the marginal likelihood over (sigma, sigma1^2) with
// Sigma = sigma1^2 I. Ties go to the smaller sigma1^2.
inline VarianceComponents fit_variance_components(const HierarchyConfig& base, const FeatureMap& fm,
                                                  const History& h, const MetadataLookup& metadata,
                                                  const std::vector<std::pair<double, double>>& grid) {
  if (grid.empty()) throw ConfigError("fit_variance_components: empty grid");
  const auto k = static_cast<Eigen::Index>(fm.arms());
  VarianceComponents best;
  bool have = false;
  for (const auto& [sigma, s1] : grid) {
    const double ll = log_marginal_likelihood(sigma, s1 * Matrix::Identity(k, k), base, fm, h, metadata);
    if (!have || ll > best.log_likelihood || (ll == best.log_likelihood && s1 < best.sigma1_sq)) {
      best = {sigma, s1, ll};
      have = true;
    }
  }
  return best;
}

}  // namespace mtts
