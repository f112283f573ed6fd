#include <catch_amalgamated.hpp>

#include <random>

#include "mtts/environments.hpp"
#include "mtts/priors_eb.hpp"

using namespace mtts;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PopulationSpec spec_for(RewardKind kind, std::size_t tasks) {
  PopulationSpec s;
  s.tasks = tasks;
  s.horizon = 10;
  s.arms = 3;
  s.dim = 6;
  s.reward = kind;
  s.sigma1_sq = 0.5;
  s.seed = 8;
  return s;
}

History uniform_history(const Population& pop, std::size_t rounds, double sigma, std::uint64_t seed) {
  const RewardModel m(pop.spec.reward, sigma, seed);
  History h;
  Rng rng(seed);
  std::uniform_int_distribution<Arm> arm(0, pop.spec.arms - 1);
  for (const auto& t : pop.tasks)
    for (std::size_t r = 1; r <= rounds; ++r) {
      const Arm a = arm(rng);
      h.append({t.id, a, m.draw(t, a, r), r});
    }
  return h;
}

}  // namespace

TEST_CASE("Gaussian baseline priors follow the law of total variance") {
  auto spec = spec_for(RewardKind::Gaussian, 20000);
  const auto pop = generate_population(spec);
  const auto p = derive_baseline_priors(spec, pop.theta);
  const double v = spec.theta_var();
  CHECK_THAT(p.marginal_gaussian.cov(0, 0), WithinAbs(0.5 + 3.0 * v + v, 1e-14));
  CHECK(p.marginal_gaussian.cov(0, 1) == 0.0);
  CHECK_THAT(p.conditional_variance, WithinAbs(0.5 + pop.theta.tail(3).squaredNorm(), 1e-14));
  CHECK_THAT(p.linear_ts_noise, WithinAbs(1.5, 1e-14));

  // Compare against the empirical spread of r_i given theta (x and delta integrated out).
  double ss = 0.0;
  for (const auto& t : pop.tasks) ss += (t.true_means(0) - pop.theta(0)) * (t.true_means(0) - pop.theta(0));
  CHECK_THAT(ss / static_cast<double>(pop.tasks.size()), WithinRel(p.conditional_variance, 0.05));
}

TEST_CASE("Bernoulli baseline priors") {
  auto spec = spec_for(RewardKind::Bernoulli, 20000);
  spec.psi = 0.2;
  const auto pop = generate_population(spec);
  const auto p = derive_baseline_priors(spec, pop.theta);
  REQUIRE(p.marginal_beta.size() == 3);
  CHECK_THAT(p.marginal_beta[0].mean(), WithinAbs(0.5, 1e-12));
  REQUIRE(p.bernoulli_candidates.size() == kBernoulliCandidates);
  double wsum = 0.0;
  for (double w : p.candidate_weights) wsum += w;
  CHECK_THAT(wsum, WithinAbs(1.0, 1e-12));

  // E(r | theta) against the population average of the generated arm means.
  for (Eigen::Index a = 0; a < 3; ++a) {
    double m = 0.0;
    for (const auto& t : pop.tasks) m += t.true_means(a);
    m /= static_cast<double>(pop.tasks.size());
    CHECK_THAT(p.conditional_mean_given_theta(a), WithinAbs(m, 0.01));
  }
  CHECK_THROWS_AS(derive_baseline_priors(spec, pop.theta, 10), ConfigError);
}

TEST_CASE("marginal likelihood matches the dense Gaussian density") {
  auto spec = spec_for(RewardKind::Gaussian, 6);
  const auto pop = generate_population(spec);
  const History h = uniform_history(pop, 4, 1.0, 3);
  const auto base = HierarchyConfig::isotropic(spec.dim, spec.arms, spec.theta_var(), 0.5, 1.0);
  const auto look = pop.metadata_lookup();
  const Matrix sig = 0.7 * Matrix::Identity(3, 3);
  const double ll = log_marginal_likelihood(0.8, sig, base, pop.feature_map, h, look);

  const auto cfg = base.with_variances(0.8, sig);
  const auto s = stack_history_features(pop.feature_map, h, look);
  Matrix cov = build_kernel_matrix(cfg, s.features, h);
  cov.diagonal().array() += 0.64;
  const Eigen::LDLT<Matrix> ldlt(cov);
  const double n = static_cast<double>(h.size());
  const double quad = s.rewards.dot(ldlt.solve(s.rewards));
  const double logdet = ldlt.vectorD().array().log().sum();
  const double expect = -0.5 * (quad + logdet + n * std::log(2.0 * std::numbers::pi));
  CHECK_THAT(ll, WithinAbs(expect, 1e-8));

  // Non-diagonal Sigma goes through the general block path.
  Matrix full = 0.4 * Matrix::Identity(3, 3);
  full(0, 1) = full(1, 0) = 0.1;
  const double ll2 = log_marginal_likelihood(0.8, full, base, pop.feature_map, h, look);
  const auto cfg2 = base.with_variances(0.8, full);
  Matrix cov2 = build_kernel_matrix(cfg2, s.features, h);
  cov2.diagonal().array() += 0.64;
  const Eigen::LDLT<Matrix> l2(cov2);
  const double e2 = -0.5 * (s.rewards.dot(l2.solve(s.rewards)) + l2.vectorD().array().log().sum() +
                            n * std::log(2.0 * std::numbers::pi));
  CHECK_THAT(ll2, WithinAbs(e2, 1e-8));

  CHECK_THROWS_AS(log_marginal_likelihood(0.8, sig, base, pop.feature_map, History{}, look), ConfigError);
}

TEST_CASE("variance components are recovered on a grid") {
  auto spec = spec_for(RewardKind::Gaussian, 200);
  spec.sigma = 1.0;
  spec.sigma1_sq = 0.5;
  const auto pop = generate_population(spec);
  const History h = uniform_history(pop, 30, spec.sigma, 1);
  const auto base = HierarchyConfig::isotropic(spec.dim, spec.arms, spec.theta_var(), 0.5, 1.0);
  std::vector<std::pair<double, double>> grid;
  for (double s : {0.5, 1.0, 2.0})
    for (double s1 : {0.1, 0.5, 1.5}) grid.emplace_back(s, s1);
  const auto fit = fit_variance_components(base, pop.feature_map, h, pop.metadata_lookup(), grid);
  CHECK(fit.sigma == 1.0);
  CHECK(fit.sigma1_sq == 0.5);
  CHECK_THROWS_AS(fit_variance_components(base, pop.feature_map, h, pop.metadata_lookup(), {}), ConfigError);
}
