// One PASS/FAIL line per acceptance criterion. Exit status 0 iff all pass.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mtts/bench/config.hpp"
#include "mtts/bench/experiment.hpp"
#include "mtts/bench/io.hpp"
#include "mtts/bench/validate.hpp"
#include "mtts/metrics.hpp"
#include "mtts/priors_eb.hpp"

namespace {

using namespace mtts;
using namespace mtts::bench;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::size_t workers() { return std::max<std::size_t>(1, std::thread::hardware_concurrency()); }

ExperimentConfig desk_config(double sigma1_sq, ScheduleKind schedule, std::vector<PolicyKind> policies,
                             std::uint64_t pop_seed) {
  ExperimentConfig cfg;
  cfg.population.reward = RewardKind::Gaussian;
  cfg.population.tasks = 100;
  cfg.population.horizon = 100;
  cfg.population.arms = 4;
  cfg.population.dim = 8;
  cfg.population.sigma = 1.0;
  cfg.population.sigma1_sq = sigma1_sq;
  cfg.population.seed = pop_seed;
  cfg.schedule = schedule;
  for (std::uint64_t s = 0; s < 20; ++s) cfg.seeds.push_back(s);
  cfg.parallelism = workers();
  cfg.plots = false;
  for (auto p : policies) {
    AlgorithmSpec a;
    a.kind = p;
    a.label = std::string(policy_name(p));
    cfg.algorithms.push_back(a);
  }
  validate_config(cfg);
  return cfg;
}

double ratio(const RegretLedger& l, const std::string& a, const std::string& b) {
  double sa = 0.0;
  double sb = 0.0;
  for (const auto& [s, v] : cumulative_regret_by_seed(l, a)) sa += v;
  for (const auto& [s, v] : cumulative_regret_by_seed(l, b)) sb += v;
  return sa / sb;
}

// Mean per-round regret (averaged over tasks) over rounds (T/2, T]: the slope
// of the per-task cumulative regret curve late in the horizon.
double late_slope(const RegretLedger& l, const std::string& alg, std::size_t horizon) {
  const auto curve = bayes_regret_curve(l, alg, CurveView::PerRoundConcurrent);
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& p : curve)
    if (p.index > horizon / 2) {
      s += p.mean;
      ++n;
    }
  return s / static_cast<double>(n);
}

Outcome criterion1() {
  const auto r = checks::path_equivalence(200, 11, 1e-8);
  return {r.passed, r.detail};
}

Outcome criterion2() {
  const auto a = checks::empty_task_identity(200, 12, 1e-10);
  const auto b = checks::theta_marginalization(10, 100000, 13, 3.0);
  return {a.passed && b.passed, "empty H_i: " + a.detail + "; nonempty H_i: " + b.detail};
}

Outcome criterion3() {
  const auto a = checks::beta_commutation(14);
  const auto b = checks::gaussian_scalar_update(15, 1e-10);
  return {a.passed && b.passed, a.detail + "; " + b.detail};
}

Outcome criterion4() {
  McmcOptions opt;
  opt.n_samples = 2000;
  opt.burn_in = 1000;
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const auto r = checks::mcmc_recovery_once(s, 100, 50, 2, 3, 0.1, 3.0, opt);
    ok += r.within ? 1 : 0;
    worst = std::max(worst, r.worst_z);
  }
  const auto tv = checks::mcmc_stationarity_1d(21, 40000, 0.05);
  return {ok >= 9 && tv.passed,
          "recovery " + std::to_string(ok) + "/10 seeds within 3 sd (worst z " + num(worst) + "); " + tv.detail};
}

Outcome criterion5() {
  const std::vector<PolicyKind> pol{PolicyKind::Mtts, PolicyKind::MetaTs, PolicyKind::IndividualTs};
  const auto l25 = run_all(desk_config(0.25, ScheduleKind::Concurrent, pol, 501));
  const auto l50 = run_all(desk_config(0.5, ScheduleKind::Concurrent, pol, 502));
  const double r25 = ratio(l25, "mtts", "individual_ts");
  const double r50 = ratio(l50, "mtts", "individual_ts");
  const auto mtts = cumulative_regret_by_seed(l25, "mtts");
  const auto meta = cumulative_regret_by_seed(l25, "meta_ts");
  const auto indiv = cumulative_regret_by_seed(l25, "individual_ts");
  const auto t1 = paired_t_test(mtts, meta);
  const auto t2 = paired_t_test(meta, indiv);
  const bool pass = r25 <= 0.75 && r50 <= 0.85 && t1.p_one_sided < 0.05 && t2.p_one_sided < 0.05;
  return {pass, "MTTS/individual " + num(r25) + " at 0.25 (<= 0.75), " + num(r50) + " at 0.5 (<= 0.85); p(MTTS<meta) " +
                    num(t1.p_one_sided) + ", p(meta<individual) " + num(t2.p_one_sided)};
}

Outcome criterion6() {
  const auto cfg = desk_config(0.25, ScheduleKind::Sequential,
                               {PolicyKind::Mtts, PolicyKind::IndividualTs, PolicyKind::OracleTs}, 601);
  const auto l = run_all(cfg);
  auto decay = [&](const std::string& alg) {
    const auto c = multi_task_regret_curve(l, alg, CurveView::PerTaskSequential);
    double early = 0.0;
    double late = 0.0;
    for (const auto& p : c) {
      if (p.index < 20) early += p.mean;
      if (p.index >= 80) late += p.mean;
    }
    return late / early;
  };
  const double m = decay("mtts");
  const double i = decay("individual_ts");
  return {m < 0.5 && i > 0.8,
          "MTR tasks 81-100 / tasks 1-20: MTTS " + num(m) + " (< 0.5), individual-TS " + num(i) + " (> 0.8)"};
}

Outcome criterion7() {
  const std::vector<PolicyKind> pol{PolicyKind::Mtts, PolicyKind::Osfa, PolicyKind::LinearTs};
  const auto l5 = run_all(desk_config(0.5, ScheduleKind::Concurrent, pol, 701));
  const auto l0 = run_all(desk_config(0.0, ScheduleKind::Concurrent, pol, 702));
  const double m5 = late_slope(l5, "mtts", 100);
  const double o5 = late_slope(l5, "osfa", 100) / m5;
  const double lin5 = late_slope(l5, "linear_ts", 100) / m5;
  const double lin0 = late_slope(l0, "linear_ts", 100) / late_slope(l0, "mtts", 100);
  return {o5 > 3.0 && lin5 > 3.0 && lin0 <= 1.2,
          "slope ratio vs MTTS at 0.5: OSFA " + num(o5) + ", linear-TS " + num(lin5) + " (> 3); at 0: linear-TS " +
              num(lin0) + " (<= 1.2)"};
}

Outcome criterion8() {
  const std::vector<PolicyKind> pol{PolicyKind::Mtts, PolicyKind::IndividualTs};
  auto run = [&](double lambda, std::uint64_t pop_seed) {
    auto cfg = desk_config(0.25, ScheduleKind::Concurrent, pol, pop_seed);
    cfg.population.misspec_lambda = lambda;
    return run_all(cfg);
  };
  const auto lh = run(0.5, 801);
  const auto l0 = run(0.0, 802);
  const double rh = ratio(lh, "mtts", "individual_ts");
  const double r0 = ratio(l0, "mtts", "individual_ts");
  const auto th = paired_t_test(cumulative_regret_by_seed(lh, "mtts"), cumulative_regret_by_seed(lh, "individual_ts"));
  return {rh <= 1.0 && r0 <= 1.15, "MTTS/individual at lambda 0.5: " + num(rh) + " (<= 1, paired p " +
                                         num(th.p_one_sided) + "); at lambda 0: " + num(r0) + " (<= 1.15)"};
}

Outcome criterion9() {
  std::vector<std::pair<double, double>> grid;
  for (double s : {0.5, 1.0, 2.0})
    for (double s1 : {0.1, 0.25, 0.5, 1.0}) grid.emplace_back(s, s1);
  std::size_t ok = 0;
  std::ostringstream fits;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PopulationSpec spec;
    spec.tasks = 200;
    spec.horizon = 50;
    spec.arms = 4;
    spec.dim = 8;
    spec.sigma = 1.0;
    spec.sigma1_sq = 0.5;
    spec.seed = random::derive(900, "eb", seed);
    const auto pop = generate_population(spec);
    const RewardModel rewards(RewardKind::Gaussian, spec.sigma, spec.seed);
    Rng rng = random::make_rng(spec.seed, "eb-arms");
    std::uniform_int_distribution<Arm> pick(0, spec.arms - 1);
    History h;
    for (const auto& t : pop.tasks)
      for (std::size_t r = 1; r <= spec.horizon; ++r) {
        const Arm a = pick(rng);
        h.append({t.id, a, rewards.draw(t, a, r), r});
      }
    const auto base = HierarchyConfig::isotropic(spec.dim, spec.arms, spec.theta_var(), 0.5, 1.0);
    const auto fit = fit_variance_components(base, pop.feature_map, h, pop.metadata_lookup(), grid);
    const bool hit = fit.sigma == 1.0 && fit.sigma1_sq == 0.5;
    ok += hit ? 1 : 0;
    if (!hit) fits << " seed " << seed << "->(" << fit.sigma << ", " << fit.sigma1_sq << ")";
  }
  return {ok >= 8, std::to_string(ok) + "/10 seeds recover (1, 0.5) (>= 8)" + fits.str()};
}

Outcome criterion10() {
  const fs::path root = fs::temp_directory_path() / "mtts_acceptance_determinism";
  fs::remove_all(root);
  ExperimentConfig cfg = desk_config(0.5, ScheduleKind::Concurrent,
                                     {PolicyKind::Mtts, PolicyKind::MetaTs, PolicyKind::LinearTs}, 1001);
  cfg.population.tasks = 20;
  cfg.population.horizon = 30;
  cfg.seeds = {0, 1, 2};
  cfg.mtr = true;
  cfg.plots = true;
  validate_config(cfg);
  run_experiment(cfg, root / "a");
  const auto from_manifest = load_config(root / "a" / "manifest.json");
  run_experiment(from_manifest, root / "b");
  auto serial = from_manifest;
  serial.parallelism = 1;
  run_experiment(serial, root / "c");
  const auto a = read_file(root / "a" / "ledger.csv");
  const bool same = a == read_file(root / "b" / "ledger.csv") && a == read_file(root / "c" / "ledger.csv");
  fs::remove_all(root);
  return {same, same ? "manifest reruns (parallel and serial) give byte-identical ledger.csv (" +
                           std::to_string(a.size()) + " bytes)"
                     : "ledger.csv differs between manifest reruns"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    double budget_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> all{
      {1, 5, criterion1},   {2, 30, criterion2},  {3, 1, criterion3},   {4, 300, criterion4},
      {5, 600, criterion5}, {6, 600, criterion6}, {7, 300, criterion7}, {8, 600, criterion8},
      {9, 120, criterion9}, {10, 600, criterion10},
  };
  int failures = 0;
  for (const auto& c : all) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << o.detail << " [" << num(secs) << " s, budget "
              << num(c.budget_s) << " s" << (in_time ? "" : ", over budget") << "]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
