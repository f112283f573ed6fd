#include <catch_amalgamated.hpp>

#include <set>

#include "mtts/environments.hpp"

using namespace mtts;
using Catch::Matchers::WithinAbs;

namespace {

PopulationSpec small_spec(RewardKind kind = RewardKind::Gaussian) {
  PopulationSpec s;
  s.tasks = 300;
  s.horizon = 5;
  s.arms = 3;
  s.dim = 6;
  s.reward = kind;
  s.seed = 42;
  return s;
}

}  // namespace

TEST_CASE("population generation is deterministic") {
  const auto a = generate_population(small_spec());
  const auto b = generate_population(small_spec());
  CHECK(a.theta == b.theta);
  CHECK(a.tasks[17].true_means == b.tasks[17].true_means);
  auto s = small_spec();
  s.seed = 43;
  CHECK(generate_population(s).theta != a.theta);
}

TEST_CASE("Gaussian population has the LMM structure") {
  auto spec = small_spec();
  spec.tasks = 3000;
  spec.sigma1_sq = 0.5;
  const auto pop = generate_population(spec);
  REQUIRE(pop.metadata[0].size() == static_cast<Eigen::Index>(spec.metadata_dim()));
  const auto fx = fixed_effects(pop);
  double ss = 0.0;
  double n = 0.0;
  for (std::size_t i = 0; i < pop.tasks.size(); ++i) {
    CHECK(pop.conditional_means[i] == fx[i]);
    const Vector delta = pop.tasks[i].true_means - fx[i];
    ss += delta.squaredNorm();
    n += static_cast<double>(delta.size());
  }
  CHECK_THAT(ss / n, WithinAbs(0.5, 0.03));
}

TEST_CASE("sigma1 = 0 makes rewards exactly linear") {
  auto spec = small_spec();
  spec.sigma1_sq = 0.0;
  const auto pop = generate_population(spec);
  const auto fx = fixed_effects(pop);
  for (std::size_t i = 0; i < pop.tasks.size(); ++i) CHECK(pop.tasks[i].true_means == fx[i]);
}

TEST_CASE("Bernoulli population means lie in (0, 1)") {
  const auto pop = generate_population(small_spec(RewardKind::Bernoulli));
  for (const auto& t : pop.tasks) {
    CHECK(t.true_means.minCoeff() > 0.0);
    CHECK(t.true_means.maxCoeff() < 1.0);
  }
}

TEST_CASE("misspecified generator at lambda = 1 equals the LMM generator") {
  auto spec = small_spec();
  const auto lmm = generate_population(spec);
  const auto mis = generate_misspecified(spec);
  for (std::size_t i = 0; i < lmm.tasks.size(); ++i) CHECK(lmm.tasks[i].true_means == mis.tasks[i].true_means);
}

TEST_CASE("misspecified generator at lambda = 0 is the cosine model") {
  auto spec = small_spec();
  spec.misspec_lambda = 0.0;
  const auto pop = make_population(spec);
  const auto fx = fixed_effects(pop);
  double mx = 0.0;
  for (const auto& f : fx) mx = std::max(mx, f.cwiseAbs().maxCoeff());
  CHECK_THAT(pop.normalization, WithinAbs((std::numbers::pi / 2.0) / mx, 1e-12));
  const double c = pop.normalization;
  for (std::size_t i = 0; i < pop.tasks.size(); ++i) {
    const Vector expect = (c * fx[i]).array().cos().matrix() / c;
    CHECK(linalg::max_abs_diff(pop.conditional_means[i], expect) < 1e-12);
  }
}

TEST_CASE("reward draws are keyed and reproducible") {
  const auto pop = generate_population(small_spec());
  const RewardModel m(RewardKind::Gaussian, 1.0, 5);
  const double a = m.draw(pop.tasks[3], 1, 7);
  CHECK(m.draw(pop.tasks[3], 1, 7) == a);
  CHECK(m.draw(pop.tasks[3], 1, 8) != a);
  CHECK(m.draw(pop.tasks[3], 2, 7) != a);
  CHECK_THROWS_AS(m.draw(pop.tasks[3], 3, 1), ConfigError);

  double sum = 0.0;
  double sq = 0.0;
  const int n = 20000;
  for (int t = 1; t <= n; ++t) {
    const double r = m.draw(pop.tasks[0], 0, static_cast<std::size_t>(t)) - pop.tasks[0].true_means(0);
    sum += r;
    sq += r * r;
  }
  CHECK_THAT(sum / n, WithinAbs(0.0, 0.03));
  CHECK_THAT(sq / n, WithinAbs(1.0, 0.04));
}

TEST_CASE("Bernoulli rewards are binary with the right mean") {
  const auto pop = generate_population(small_spec(RewardKind::Bernoulli));
  const RewardModel m(RewardKind::Bernoulli, 0.0, 5);
  double sum = 0.0;
  const int n = 20000;
  for (int t = 1; t <= n; ++t) {
    const double r = m.draw(pop.tasks[1], 2, static_cast<std::size_t>(t));
    CHECK((r == 0.0 || r == 1.0));
    sum += r;
  }
  CHECK_THAT(sum / n, WithinAbs(pop.tasks[1].true_means(2), 0.015));
}

TEST_CASE("schedules") {
  const auto seq = make_schedule(ScheduleKind::Sequential, 3, 2);
  CHECK(seq.stream == std::vector<TaskId>{0, 0, 1, 1, 2, 2});
  CHECK(seq.batch_sizes.size() == 6);
  const auto con = make_schedule(ScheduleKind::Concurrent, 3, 2);
  CHECK(con.stream == std::vector<TaskId>{0, 1, 2, 0, 1, 2});
  CHECK(con.batch_sizes == std::vector<std::size_t>{3, 3});
  const auto cus = make_schedule(ScheduleKind::Custom, 2, 2, {1, 0, 0, 1});
  CHECK(cus.stream.size() == 4);
  CHECK_THROWS_AS(make_schedule(ScheduleKind::Custom, 2, 2, {1, 0, 0}), ScheduleError);
  CHECK_THROWS_AS(make_schedule(ScheduleKind::Custom, 2, 2, {1, 0, 0, 2}), ScheduleError);
}

TEST_CASE("invalid specs are rejected") {
  auto s = small_spec();
  s.dim = 2;
  CHECK_THROWS_AS(generate_population(s), ConfigError);
  s = small_spec();
  s.misspec_lambda = 1.5;
  CHECK_THROWS_AS(generate_population(s), ConfigError);
  s = small_spec(RewardKind::Bernoulli);
  s.misspec_lambda = 0.5;
  CHECK_THROWS_AS(generate_misspecified(s), ConfigError);
}
