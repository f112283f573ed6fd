#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "mtts/metrics.hpp"
#include "mtts/simulation.hpp"

using namespace mtts;
using Catch::Matchers::WithinAbs;

namespace {

RegretLedger random_ledger(std::uint64_t seed, std::size_t seeds, std::size_t tasks, std::size_t rounds) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RegretLedger l;
  for (const char* alg : {"a", "oracle_ts"})
    for (std::uint64_t s = 0; s < seeds; ++s)
      for (TaskId i = 0; i < tasks; ++i)
        for (std::size_t t = 1; t <= rounds; ++t) l.append({alg, s, i, t, 0, 0.0, u(rng)});
  return l;
}

}  // namespace

TEST_CASE("instantaneous regret") {
  TaskInstance t{0, Vector::Zero(0), (Vector(2) << 1.0, 0.0).finished()};
  CHECK(instantaneous_regret(t, 0) == 0.0);
  CHECK(instantaneous_regret(t, 1) == 1.0);
  CHECK_THROWS_AS(instantaneous_regret(t, 2), ConfigError);
}

TEST_CASE("per-task view sums a task's regrets") {
  RegretLedger l;
  l.append({"a", 0, 0, 1, 0, 0.0, 0.5});
  l.append({"a", 0, 0, 2, 0, 0.0, 0.3});
  const auto c = bayes_regret_curve(l, "a", CurveView::PerTaskSequential);
  REQUIRE(c.size() == 1);
  CHECK_THAT(c[0].mean, WithinAbs(0.8, 1e-15));
  CHECK(std::isnan(c[0].se));
}

TEST_CASE("identical seeds have zero standard error") {
  RegretLedger l;
  for (std::uint64_t s : {1u, 2u}) {
    l.append({"a", s, 0, 1, 0, 0.0, 0.4});
    l.append({"a", s, 1, 1, 0, 0.0, 0.2});
  }
  const auto c = bayes_regret_curve(l, "a", CurveView::PerRoundConcurrent);
  REQUIRE(c.size() == 1);
  CHECK(c[0].se == 0.0);
  CHECK_THAT(c[0].mean, WithinAbs(0.3, 1e-15));
}

TEST_CASE("per-round view matches a loop oracle") {
  const auto l = random_ledger(1, 5, 7, 9);
  const auto c = bayes_regret_curve(l, "a", CurveView::PerRoundConcurrent);
  REQUIRE(c.size() == 9);
  for (std::size_t t = 1; t <= 9; ++t) {
    std::vector<double> per_seed(5, 0.0);
    for (const auto& e : l.entries())
      if (e.algorithm == "a" && e.round == t) per_seed[e.seed] += e.inst_regret / 7.0;
    double m = 0.0;
    for (double v : per_seed) m += v / 5.0;
    double ss = 0.0;
    for (double v : per_seed) ss += (v - m) * (v - m);
    CHECK_THAT(c[t - 1].mean, WithinAbs(m, 1e-12));
    CHECK_THAT(c[t - 1].se, WithinAbs(std::sqrt(ss / 4.0 / 5.0), 1e-12));
  }
}

TEST_CASE("curves do not depend on ledger order") {
  const auto l = random_ledger(2, 3, 4, 5);
  auto entries = l.entries();
  std::shuffle(entries.begin(), entries.end(), Rng(3));
  RegretLedger p;
  for (auto& e : entries) p.append(e);
  for (auto view : {CurveView::PerRoundConcurrent, CurveView::PerTaskSequential}) {
    const auto a = bayes_regret_curve(l, "a", view);
    const auto b = bayes_regret_curve(p, "a", view);
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK_THAT(a[j].mean, WithinAbs(b[j].mean, 1e-12));
      CHECK_THAT(a[j].se, WithinAbs(b[j].se, 1e-12));
    }
  }
}

TEST_CASE("multi-task regret of the oracle against itself is zero") {
  const auto l = random_ledger(4, 3, 4, 5);
  for (const auto& p : multi_task_regret_curve(l, "oracle_ts", CurveView::PerTaskSequential)) {
    CHECK(p.mean == 0.0);
    CHECK(p.se == 0.0);
  }
  const auto d = multi_task_regret_curve(l, "a", CurveView::PerRoundConcurrent);
  const auto a = bayes_regret_curve(l, "a", CurveView::PerRoundConcurrent);
  const auto o = bayes_regret_curve(l, "oracle_ts", CurveView::PerRoundConcurrent);
  for (std::size_t j = 0; j < d.size(); ++j) CHECK_THAT(d[j].mean, WithinAbs(a[j].mean - o[j].mean, 1e-12));
}

TEST_CASE("unmatched seeds and missing algorithms are errors") {
  auto l = random_ledger(5, 2, 2, 2);
  l.append({"a", 9, 0, 1, 0, 0.0, 0.1});
  CHECK_THROWS_AS(multi_task_regret_curve(l, "a", CurveView::PerRoundConcurrent), ConfigError);
  CHECK_THROWS_AS(bayes_regret_curve(l, "nope", CurveView::PerRoundConcurrent), ConfigError);
}

TEST_CASE("ledger re-sum equals cumulative regret and is monotone") {
  PopulationSpec spec;
  spec.tasks = 5;
  spec.horizon = 10;
  spec.arms = 3;
  spec.dim = 5;
  spec.seed = 2;
  const auto ctx = make_context(spec, ScheduleKind::Sequential);
  auto agent = make_agent(PolicyKind::IndividualTs, agent_setup(ctx, 1, "individual_ts", 1));
  const auto l = simulate(ctx, *agent, "individual_ts", 7);
  double total = 0.0;
  double prev = 0.0;
  for (const auto& e : l.entries()) {
    const double recomputed = ctx.population.tasks[e.task_id].true_means.maxCoeff() -
                              ctx.population.tasks[e.task_id].true_means(static_cast<Eigen::Index>(e.arm));
    CHECK(e.inst_regret == recomputed);
    total += e.inst_regret;
    CHECK(total >= prev);
    prev = total;
  }
  CHECK_THAT(cumulative_regret_by_seed(l, "individual_ts").at(7), WithinAbs(total, 1e-9));
}

TEST_CASE("paired comparison under common random numbers is tighter") {
  PopulationSpec spec;
  spec.tasks = 10;
  spec.horizon = 20;
  spec.arms = 3;
  spec.dim = 5;
  RegretLedger l;
  for (std::uint64_t s = 0; s < 20; ++s) {
    spec.seed = 1000 + s;
    const auto ctx = make_context(spec, ScheduleKind::Concurrent);
    for (auto k : {PolicyKind::IndividualTs, PolicyKind::OracleTs}) {
      const std::string name(policy_name(k));
      auto agent = make_agent(k, agent_setup(ctx, s, name, 1));
      l.append(simulate(ctx, *agent, name, s));
    }
  }
  const auto a = cumulative_regret_by_seed(l, "individual_ts");
  const auto o = cumulative_regret_by_seed(l, "oracle_ts");
  const auto t = paired_t_test(a, o);
  CHECK(t.se <= unpaired_difference_se(a, o));
}

TEST_CASE("paired t-test") {
  std::map<std::uint64_t, double> a{{1, 1.0}, {2, 2.0}, {3, 3.0}, {4, 4.5}};
  std::map<std::uint64_t, double> b{{1, 2.0}, {2, 2.9}, {3, 4.2}, {4, 5.4}};
  const auto t = paired_t_test(a, b);
  CHECK(t.mean_difference < 0.0);
  CHECK(t.p_one_sided < 0.01);
  CHECK_THAT(t.p_two_sided, WithinAbs(2.0 * t.p_one_sided, 1e-12));
  std::map<std::uint64_t, double> c{{1, 1.0}, {5, 2.0}};
  CHECK_THROWS_AS(paired_t_test(a, c), ConfigError);
}
