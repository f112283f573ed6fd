#include <catch_amalgamated.hpp>

#include <random>

#include "mtts/gaussian_posterior.hpp"
#include "mtts/gp_posterior.hpp"
#include "mtts/oracles.hpp"
#include "test_support.hpp"

using namespace mtts;
using Catch::Matchers::WithinAbs;

namespace {

double belief_gap(const GaussianBelief& a, const GaussianBelief& b) {
  return std::max(linalg::max_abs_diff(a.mean, b.mean), linalg::max_abs_diff(a.cov, b.cov));
}

}  // namespace

TEST_CASE("naive, blocked and joint-conditioning beliefs agree") {
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const bool diag = rep % 2 == 0;
    const auto inst = testing::random_lmm(rng, diag);
    const auto look = lookup_table(inst.metadata);
    const Vector& x = inst.metadata[inst.target];
    const auto naive = posterior_r_naive(inst.cfg, inst.fm, inst.history, look, inst.target, x);
    const auto wood = posterior_r_woodbury(inst.cfg, inst.fm, inst.history, look, inst.target, x);
    const auto joint = oracle::joint_conditioning(inst.cfg, inst.fm, inst.history, look, inst.target, x);
    INFO("rep " << rep << " diag " << diag);
    CHECK(belief_gap(naive, joint) < 1e-8);
    CHECK(belief_gap(wood, joint) < 1e-8);
  }
}

TEST_CASE("theta posterior matches joint conditioning") {
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const auto inst = testing::random_lmm(rng, rep % 2 == 1);
    const auto look = lookup_table(inst.metadata);
    const auto p = posterior_theta(inst.cfg, inst.fm, inst.history, look);
    const auto o = oracle::joint_theta(inst.cfg, inst.fm, inst.history, look);
    CHECK(linalg::max_abs_diff(p.mean, o.mean) < 1e-8);
    CHECK(linalg::max_abs_diff(p.cov, o.cov) < 1e-8);
  }
}

TEST_CASE("empty history returns the prior") {
  const auto cfg = HierarchyConfig::isotropic(3, 2, 0.5, 0.25, 1.0);
  const auto fm = FeatureMap::indicator_plus_metadata(2, 3);
  std::vector<Vector> md{Vector::Constant(2, 0.3)};
  const History h;
  const auto b = posterior_r_woodbury(cfg, fm, h, lookup_table(md), 0, md[0]);
  const Matrix phi = build_task_feature_matrix(fm, md[0]);
  CHECK(linalg::max_abs_diff(b.mean, Vector::Zero(2)) == 0.0);
  CHECK(linalg::max_abs_diff(b.cov, 0.5 * phi * phi.transpose() + 0.25 * Matrix::Identity(2, 2)) < 1e-14);
  const auto t = posterior_theta(cfg, fm, h, lookup_table(md));
  CHECK(linalg::max_abs_diff(t.cov, cfg.sigma_theta()) == 0.0);
}

TEST_CASE("incremental workspace equals batch rebuild") {
  Rng rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    const auto inst = testing::random_lmm(rng, rep % 2 == 0);
    const auto look = lookup_table(inst.metadata);
    KernelWorkspace ws(inst.cfg, inst.fm, look);
    History partial;
    for (const auto& r : inst.history.records()) {
      ws.add(r);
      partial.append(r);
      const auto a = ws.belief(inst.target, inst.metadata[inst.target]);
      const auto b = posterior_r_naive(inst.cfg, inst.fm, partial, look, inst.target, inst.metadata[inst.target]);
      CHECK(belief_gap(a, b) < 1e-8);
    }
  }
}

TEST_CASE("posterior covariance is symmetric PSD and shrinks") {
  Rng rng(23);
  for (int rep = 0; rep < 30; ++rep) {
    const auto inst = testing::random_lmm(rng);
    const auto look = lookup_table(inst.metadata);
    const Vector& x = inst.metadata[inst.target];
    const auto post = posterior_r_woodbury(inst.cfg, inst.fm, inst.history, look, inst.target, x);
    const auto prior = posterior_r_woodbury(inst.cfg, inst.fm, History{}, look, inst.target, x);
    CHECK(linalg::is_symmetric_psd(post.cov));
    CHECK(linalg::is_symmetric_psd(prior.cov - post.cov, 1e-9));
  }
}

TEST_CASE("task posterior matches the scalar normal-normal oracle") {
  const std::vector<double> rewards{0.3, -1.2, 2.5, 0.7};
  const auto o = oracle::scalar_gaussian_update(0.4, 0.8, 1.7, rewards);
  TaskStats st(1);
  for (double r : rewards) st.add(0, r);
  const auto b = gaussian_task_posterior(Vector::Constant(1, 0.4), Matrix::Constant(1, 1, 0.8), 1.7, st);
  CHECK_THAT(b.mean(0), WithinAbs(o.mean, 1e-10));
  CHECK_THAT(b.cov(0, 0), WithinAbs(o.var, 1e-10));
}

TEST_CASE("zero random-effect variance reduces to ridge regression") {
  Rng rng(3);
  const auto cfg = HierarchyConfig::isotropic(4, 2, 0.7, 0.0, 0.9);
  const auto fm = FeatureMap::indicator_plus_metadata(2, 4);
  std::vector<Vector> md;
  for (int i = 0; i < 5; ++i) md.push_back(random::standard_normal_vector(rng, 4));
  History h;
  std::normal_distribution<double> z;
  for (TaskId i = 0; i < 5; ++i)
    for (std::size_t t = 1; t <= 4; ++t) h.append({i, t % 2, z(rng), t});
  const auto look = lookup_table(md);
  const auto s = stack_history_features(fm, h, look);
  const auto ridge = oracle::ridge_theta(cfg, s.features, s.rewards);
  const auto p = posterior_theta(cfg, fm, h, look);
  CHECK(linalg::max_abs_diff(p.mean, ridge.mean) < 1e-10);
  CHECK(linalg::max_abs_diff(p.cov, ridge.cov) < 1e-10);

  const auto b = posterior_r_woodbury(cfg, fm, h, look, 2, md[2]);
  const Matrix phi = build_task_feature_matrix(fm, md[2]);
  CHECK(linalg::max_abs_diff(b.mean, phi * ridge.mean) < 1e-10);
}

TEST_CASE("conditional given theta uses only the task's own history") {
  const auto cfg = HierarchyConfig::isotropic(3, 2, 1.0, 0.5, 1.0);
  const auto fm = FeatureMap::indicator_plus_metadata(2, 3);
  const Vector x = Vector::Constant(2, 0.1);
  const Vector theta = Vector::Constant(3, 0.2);
  History h;
  h.append({0, 0, 1.0, 1});
  h.append({1, 0, 1.0, 1});
  CHECK_THROWS_AS(conditional_r_given_theta(cfg, fm, h, theta, x), ConfigError);
  const auto b = conditional_r_given_theta(cfg, fm, History{}, theta, x);
  CHECK(linalg::max_abs_diff(b.mean, build_task_feature_matrix(fm, x) * theta) == 0.0);
  CHECK_THROWS_AS(conditional_r_given_theta(cfg, fm, History{}, Vector::Zero(2), x), ConfigError);
}

TEST_CASE("singular random-effect covariance is handled without inversion") {
  const Matrix sigma = Matrix::Ones(2, 2) * 0.4;
  HierarchyConfig cfg(Vector::Zero(3), Matrix::Identity(3, 3), sigma, 1.0);
  const auto fm = FeatureMap::indicator_plus_metadata(2, 3);
  std::vector<Vector> md{Vector::Constant(2, 0.5), Vector::Constant(2, -0.5)};
  History h;
  h.append({0, 0, 1.0, 1});
  h.append({0, 1, 0.2, 2});
  h.append({1, 1, -0.4, 1});
  const auto look = lookup_table(md);
  const auto a = posterior_r_naive(cfg, fm, h, look, 0, md[0]);
  const auto b = posterior_r_woodbury(cfg, fm, h, look, 0, md[0]);
  const auto c = oracle::joint_conditioning(cfg, fm, h, look, 0, md[0]);
  CHECK(belief_gap(a, c) < 1e-8);
  CHECK(belief_gap(b, c) < 1e-8);
}

TEST_CASE("posterior is invariant to record order") {
  Rng rng(41);
  const auto inst = testing::random_lmm(rng);
  const auto look = lookup_table(inst.metadata);
  std::vector<InteractionRecord> recs = inst.history.records();
  std::shuffle(recs.begin(), recs.end(), rng);
  History shuffled;
  for (const auto& r : recs) shuffled.append(r);
  const Vector& x = inst.metadata[inst.target];
  const auto a = posterior_r_woodbury(inst.cfg, inst.fm, inst.history, look, inst.target, x);
  const auto b = posterior_r_woodbury(inst.cfg, inst.fm, shuffled, look, inst.target, x);
  CHECK(belief_gap(a, b) < 1e-10);
}

TEST_CASE("unknown task ids are rejected") {
  const auto cfg = HierarchyConfig::isotropic(3, 2, 1.0, 0.5, 1.0);
  const auto fm = FeatureMap::indicator_plus_metadata(2, 3);
  std::vector<Vector> md{Vector::Zero(2)};
  History h;
  h.append({4, 0, 1.0, 1});
  CHECK_THROWS_AS(posterior_r_woodbury(cfg, fm, h, lookup_table(md), 0, md[0]), LookupError);
}

TEST_CASE("sampling from a degenerate belief returns the mean") {
  Rng rng(1);
  const GaussianBelief b(Vector::Constant(2, 3.0), Matrix::Zero(2, 2));
  const Vector s = sample_belief(b, rng);
  CHECK(s(0) == 3.0);
  CHECK(s(1) == 3.0);
}

TEST_CASE("GP posterior with a linear kernel matches the LMM posterior") {
  // phi(x, a) = (1_a, x_a): kernel_a(x, y) = 1 + x_a . y_a under theta ~ N(0, I)
  // is the same prior as the LMM with indicator features, restricted to one arm.
  const auto fm = FeatureMap::indicator_plus_metadata(1, 2);
  const auto cfg = HierarchyConfig::isotropic(2, 1, 1.0, 0.3, 0.8);
  GPConfig gp;
  gp.mean_fns = {[](const Vector&) { return 0.0; }};
  gp.kernel_fns = {[](const Vector& x, const Vector& y) { return 1.0 + x.dot(y); }};
  gp.sigma_delta = Matrix::Constant(1, 1, 0.3);
  gp.sigma_noise = 0.8;
  std::vector<Vector> md{Vector::Constant(1, 0.5), Vector::Constant(1, -1.0), Vector::Constant(1, 2.0)};
  History h;
  h.append({0, 0, 0.4, 1});
  h.append({1, 0, -0.3, 1});
  h.append({0, 0, 0.9, 2});
  const auto look = lookup_table(md);
  const auto a = posterior_r_gp(gp, h, look, 2, md[2]);
  const auto b = posterior_r_naive(cfg, fm, h, look, 2, md[2]);
  CHECK(belief_gap(a, b) < 1e-10);
}
