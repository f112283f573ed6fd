#include <catch_amalgamated.hpp>

#include <random>

#include "bernoulli_fixture.hpp"
#include "mtts/bernoulli_posterior.hpp"
#include "mtts/oracles.hpp"

using namespace mtts;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("mean-precision parameterization") {
  const auto b = beta_from_mean_precision(0.3, 0.1);
  CHECK_THAT(b.alpha1, WithinAbs(3.0, 1e-12));
  CHECK_THAT(b.alpha2, WithinAbs(7.0, 1e-12));
  CHECK_THAT(b.mean(), WithinAbs(0.3, 1e-12));
  CHECK_THAT(b.precision(), WithinAbs(0.1, 1e-12));
  CHECK_THROWS_AS(beta_from_mean_precision(0.0, 0.1), ArgumentError);
  CHECK_THROWS_AS(beta_from_mean_precision(1.0, 0.1), ArgumentError);
  CHECK_THROWS_AS(beta_from_mean_precision(0.5, 0.0), ArgumentError);
}

TEST_CASE("precision from mean and variance inverts the Beta variance") {
  for (double mu : {0.1, 0.5, 0.8}) {
    for (double psi : {0.05, 0.5, 3.0}) {
      const auto b = beta_from_mean_precision(mu, psi);
      CHECK_THAT(precision_from_mean_variance(mu, b.variance()), WithinRel(psi, 1e-10));
    }
  }
  CHECK_THROWS_AS(precision_from_mean_variance(0.5, 0.25), ArgumentError);
  CHECK_THROWS_AS(precision_from_mean_variance(0.5, 0.0), ArgumentError);
}

TEST_CASE("Beta-Binomial update commutes between batch and sequential") {
  Rng rng(9);
  std::bernoulli_distribution coin(0.37);
  const auto prior = beta_from_mean_precision(0.4, 0.2);
  BetaBelief seq{prior};
  double s = 0.0;
  double f = 0.0;
  for (int t = 0; t < 500; ++t) {
    const bool y = coin(rng);
    seq.observe(y ? 1.0 : 0.0);
    (y ? s : f) += 1.0;
  }
  const auto batch = conjugate_update(prior, s, f);
  CHECK(batch.alpha1 == seq.params().alpha1);
  CHECK(batch.alpha2 == seq.params().alpha2);
  CHECK(batch.alpha1 == prior.alpha1 + seq.successes);
  CHECK_THROWS_AS(conjugate_update(prior, -1.0, 0.0), ArgumentError);
  CHECK_THROWS_AS(seq.observe_batch(-1.0, 0.0), ArgumentError);
}

TEST_CASE("logistic saturates without overflow") {
  CHECK(logistic(1000.0) == 1.0);
  CHECK(logistic(-1000.0) == 0.0);
  CHECK(clamp_mean(logistic(1000.0)) == kMeanCeil);
  CHECK_NOTHROW(beta_from_mean_precision(clamp_mean(logistic(-800.0)), 0.1));
}

TEST_CASE("BBLM prior for a task") {
  const auto fm = FeatureMap::indicator_plus_metadata(2, 3);
  const Vector theta = (Vector(3) << 0.5, -0.5, 1.0).finished();
  const Vector x = (Vector(2) << 0.2, -0.4).finished();
  const auto p = bblm_prior_for_task(theta, fm, x, 0.1);
  REQUIRE(p.size() == 2);
  CHECK_THAT(p[0].mean(), WithinAbs(logistic(0.7), 1e-12));
  CHECK_THAT(p[1].mean(), WithinAbs(logistic(-0.9), 1e-12));
}

TEST_CASE("MCMC stationary law matches quadrature in one dimension") {
  const auto prob = testing::scalar_bblm(21, 30, 20, 0.8, 0.5);
  Rng rng(77);
  McmcOptions opt;
  opt.n_samples = 40000;
  opt.burn_in = 2000;
  const auto chain = sample_theta_mcmc(prob.cfg, prob.fm, prob.history, lookup_table(prob.metadata), rng, opt);
  std::vector<double> xs;
  for (const auto& v : chain.samples) xs.push_back(v(0));
  const auto q = oracle::quadrature_theta_counts_1d(0.0, 1.0, prob.cfg.psi(), prob.features, prob.successes,
                                                    prob.failures, -4.0, 4.0, 8001);
  const double tv = oracle::binned_tv_distance(xs, q, 40);
  INFO("tv " << tv << " acceptance " << chain.acceptance_rate);
  CHECK(tv < 0.05);
  CHECK_FALSE(chain.acceptance_warning);
}

TEST_CASE("fixed-latent Metropolis kernel targets the conditional density") {
  const Vector features = (Vector(4) << 0.5, -1.0, 1.5, 0.3).finished();
  const Vector latent = (Vector(4) << 0.7, 0.2, 0.9, 0.55).finished();
  HierarchyConfig cfg(Vector::Zero(1), Matrix::Identity(1, 1), Matrix::Identity(1, 1), 1.0, 0.3);
  Rng rng(4);
  McmcOptions opt;
  opt.n_samples = 50000;
  opt.burn_in = 2000;
  const auto chain = metropolis_theta_fixed_latent(cfg, Matrix(features), latent, rng, opt);
  std::vector<double> xs;
  for (const auto& v : chain.samples) xs.push_back(v(0));
  const auto q = oracle::quadrature_theta_1d(0.0, 1.0, 0.3, features, latent, -5.0, 5.0, 8001);
  CHECK(oracle::binned_tv_distance(xs, q, 40) < 0.05);
}

TEST_CASE("adaptation settles near the target acceptance") {
  const auto prob = testing::scalar_bblm(3, 20, 10, -0.5, 0.2);
  Rng rng(8);
  McmcOptions opt;
  opt.n_samples = 5000;
  opt.burn_in = 3000;
  const auto chain = sample_theta_mcmc(prob.cfg, prob.fm, prob.history, lookup_table(prob.metadata), rng, opt);
  CHECK(chain.acceptance_rate > 0.15);
  CHECK(chain.acceptance_rate < 0.5);
  CHECK(chain.samples.size() == 5000);
}

TEST_CASE("chains are reproducible from the seed") {
  const auto prob = testing::scalar_bblm(3, 10, 5, 0.3, 0.2);
  McmcOptions opt;
  opt.n_samples = 200;
  opt.burn_in = 100;
  Rng a(12);
  Rng b(12);
  const auto ca = sample_theta_mcmc(prob.cfg, prob.fm, prob.history, lookup_table(prob.metadata), a, opt);
  const auto cb = sample_theta_mcmc(prob.cfg, prob.fm, prob.history, lookup_table(prob.metadata), b, opt);
  CHECK(ca.samples.back()(0) == cb.samples.back()(0));
}

TEST_CASE("empty history samples the prior") {
  const auto cfg = HierarchyConfig::isotropic(2, 2, 0.5, 0.1, 1.0, 0.2);
  const auto fm = FeatureMap::indicator_plus_metadata(2, 2);
  std::vector<Vector> md{Vector::Zero(0)};
  Rng rng(2);
  McmcOptions opt;
  opt.n_samples = 20000;
  opt.burn_in = 1000;
  const auto chain = sample_theta_mcmc(cfg, fm, History{}, lookup_table(md), rng, opt);
  const Vector sd = chain.stddev();
  CHECK_THAT(sd(0), WithinAbs(std::sqrt(0.5), 0.05));
  CHECK_THAT(chain.mean()(1), WithinAbs(0.0, 0.1));
}
