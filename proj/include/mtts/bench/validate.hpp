#pragma once

#include <chrono>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mtts/bernoulli_posterior.hpp"
#include "mtts/environments.hpp"
#include "mtts/gaussian_posterior.hpp"
#include "mtts/metrics.hpp"
#include "mtts/oracles.hpp"
#include "mtts/simulation.hpp"

namespace mtts::bench {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<PropertyResult> properties;
  double seconds = 0.0;

  [[nodiscard]] bool passed() const {
    for (const auto& p : properties)
      if (!p.passed) return false;
    return true;
  }
  [[nodiscard]] std::vector<std::string> failing() const {
    std::vector<std::string> out;
    for (const auto& p : properties)
      if (!p.passed) out.push_back(p.name);
    return out;
  }
};

inline void print_report(std::ostream& os, const SuiteReport& r) {
  for (const auto& p : r.properties)
    os << (p.passed ? "[PASS] " : "[FAIL] ") << r.suite << '/' << p.name << ": " << p.detail << '\n';
  os << r.suite << ": " << (r.passed() ? "ok" : "FAILED") << " (" << r.seconds << " s)\n";
}

using PosteriorFn = std::function<GaussianBelief(const HierarchyConfig&, const FeatureMap&, const History&,
                                                 const MetadataLookup&, TaskId, const Vector&)>;

namespace checks {

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

inline double belief_gap(const GaussianBelief& a, const GaussianBelief& b) {
  return std::max(linalg::max_abs_diff(a.mean, b.mean), linalg::max_abs_diff(a.cov, b.cov));
}

// Naive, blocked and joint-conditioning beliefs on random small instances.
inline PropertyResult path_equivalence(std::size_t instances, std::uint64_t seed, double tol,
                                       const PosteriorFn& woodbury = posterior_r_woodbury) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t rep = 0; rep < instances; ++rep) {
    const auto inst = oracle::random_lmm(rng, rep % 2 == 0);
    const auto look = lookup_table(inst.metadata);
    const Vector& x = inst.metadata[inst.target];
    const auto joint = oracle::joint_conditioning(inst.cfg, inst.fm, inst.history, look, inst.target, x);
    const auto naive = posterior_r_naive(inst.cfg, inst.fm, inst.history, look, inst.target, x);
    const auto wood = woodbury(inst.cfg, inst.fm, inst.history, look, inst.target, x);
    worst = std::max({worst, belief_gap(naive, joint), belief_gap(wood, joint), belief_gap(naive, wood)});
  }
  return {"path-equivalence", worst <= tol,
          std::to_string(instances) + " instances, max abs gap " + fmt(worst) + " (tol " + fmt(tol) + ")"};
}

inline PropertyResult theta_equivalence(std::size_t instances, std::uint64_t seed, double tol) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t rep = 0; rep < instances; ++rep) {
    const auto inst = oracle::random_lmm(rng, rep % 2 == 1);
    const auto look = lookup_table(inst.metadata);
    const auto p = posterior_theta(inst.cfg, inst.fm, inst.history, look);
    const auto o = oracle::joint_theta(inst.cfg, inst.fm, inst.history, look);
    worst = std::max({worst, linalg::max_abs_diff(p.mean, o.mean), linalg::max_abs_diff(p.cov, o.cov)});
  }
  return {"theta-posterior-equivalence", worst <= tol, "max abs gap " + fmt(worst)};
}

// With H_i empty, E(r_i | H) = Phi_i E(theta | H).
inline PropertyResult empty_task_identity(std::size_t instances, std::uint64_t seed, double tol) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t rep = 0; rep < instances; ++rep) {
    auto inst = oracle::random_lmm(rng, rep % 2 == 0);
    const TaskId fresh = inst.metadata.size();
    inst.metadata.push_back(random::standard_normal_vector(rng, static_cast<Eigen::Index>(inst.fm.metadata_dim())));
    const auto look = lookup_table(inst.metadata);
    const auto naive = posterior_r_naive(inst.cfg, inst.fm, inst.history, look, fresh, inst.metadata[fresh]);
    const auto theta = posterior_theta(inst.cfg, inst.fm, inst.history, look);
    const Vector via = build_task_feature_matrix(inst.fm, inst.metadata[fresh]) * theta.mean;
    worst = std::max(worst, linalg::max_abs_diff(naive.mean, via));
  }
  return {"empty-task-identity", worst <= tol, "max abs gap " + fmt(worst) + " (tol " + fmt(tol) + ")"};
}

// With H_i nonempty, E(r_i | H) = E_{theta | H} E(r_i | H_i, theta), by Monte Carlo.
inline PropertyResult theta_marginalization(std::size_t instances, std::size_t draws, std::uint64_t seed,
                                            double n_se) {
  Rng rng(seed);
  double worst = 0.0;
  std::size_t tested = 0;
  while (tested < instances) {
    const auto inst = oracle::random_lmm(rng, tested % 2 == 0);
    if (inst.history.task_indices(inst.target).empty()) continue;
    ++tested;
    const auto look = lookup_table(inst.metadata);
    const Vector& x = inst.metadata[inst.target];
    const auto exact = posterior_r_naive(inst.cfg, inst.fm, inst.history, look, inst.target, x);
    const auto tp = posterior_theta(inst.cfg, inst.fm, inst.history, look);
    const History hi = inst.history.task_view(inst.target);
    const auto k = exact.mean.size();
    Vector sum = Vector::Zero(k);
    Vector sq = Vector::Zero(k);
    for (std::size_t j = 0; j < draws; ++j) {
      const Vector th = sample_theta(tp, rng);
      const Vector m = conditional_r_given_theta(inst.cfg, inst.fm, hi, th, x).mean;
      sum += m;
      sq += m.cwiseAbs2();
    }
    const double n = static_cast<double>(draws);
    const Vector mean = sum / n;
    const Vector var = (sq / n - mean.cwiseAbs2()) * (n / (n - 1.0));
    for (Eigen::Index a = 0; a < k; ++a) {
      const double se = std::sqrt(std::max(var(a), 0.0) / n);
      const double z = se > 0.0 ? std::fabs(mean(a) - exact.mean(a)) / se : (mean(a) == exact.mean(a) ? 0.0 : 1e9);
      worst = std::max(worst, z);
    }
  }
  return {"theta-marginalization", worst <= n_se,
          std::to_string(instances) + " instances x " + std::to_string(draws) + " draws, max |gap|/SE " + fmt(worst) +
              " (limit " + fmt(n_se) + ")"};
}

inline PropertyResult incremental_equals_batch(std::size_t instances, std::uint64_t seed, double tol) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t rep = 0; rep < instances; ++rep) {
    const auto inst = oracle::random_lmm(rng, rep % 2 == 0);
    const auto look = lookup_table(inst.metadata);
    KernelWorkspace ws(inst.cfg, inst.fm, look);
    History partial;
    for (const auto& r : inst.history.records()) {
      ws.add(r);
      partial.append(r);
    }
    const auto a = ws.belief(inst.target, inst.metadata[inst.target]);
    const auto b = posterior_r_naive(inst.cfg, inst.fm, partial, look, inst.target, inst.metadata[inst.target]);
    worst = std::max(worst, belief_gap(a, b));
  }
  return {"incremental-equals-batch", worst <= tol, "max abs gap " + fmt(worst)};
}

inline PropertyResult covariance_psd(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t bad = 0;
  for (std::size_t rep = 0; rep < instances; ++rep) {
    const auto inst = oracle::random_lmm(rng);
    const auto look = lookup_table(inst.metadata);
    const auto b = posterior_r_woodbury(inst.cfg, inst.fm, inst.history, look, inst.target, inst.metadata[inst.target]);
    if (!linalg::is_symmetric_psd(b.cov)) ++bad;
  }
  return {"covariance-psd", bad == 0, std::to_string(bad) + " of " + std::to_string(instances) + " not PSD"};
}

inline PropertyResult beta_commutation(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  bool ok = true;
  for (int rep = 0; rep < 100; ++rep) {
    const auto prior = beta_from_mean_precision(u(rng), u(rng));
    std::bernoulli_distribution coin(u(rng));
    BetaBelief seq{prior};
    BetaBelief chunked{prior};
    double s = 0.0;
    double f = 0.0;
    double cs = 0.0;
    double cf = 0.0;
    for (int t = 0; t < 200; ++t) {
      const bool y = coin(rng);
      seq.observe(y ? 1.0 : 0.0);
      (y ? s : f) += 1.0;
      (y ? cs : cf) += 1.0;
      if (t % 17 == 16) {
        chunked.observe_batch(cs, cf);
        cs = cf = 0.0;
      }
    }
    chunked.observe_batch(cs, cf);
    const auto batch = conjugate_update(prior, s, f);
    const auto a = seq.params();
    const auto c = chunked.params();
    ok = ok && batch.alpha1 == a.alpha1 && batch.alpha2 == a.alpha2 && batch.alpha1 == c.alpha1 &&
         batch.alpha2 == c.alpha2;
  }
  return {"beta-batch-sequential-commutation", ok,
          ok ? "bit-identical on 100 streams of 200 (single, chunked, batch)" : "batch and sequential differ"};
}

inline PropertyResult gaussian_scalar_update(std::uint64_t seed, double tol) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const double m0 = z(rng);
    const double v0 = u(rng);
    const double nv = u(rng);
    std::vector<double> rewards;
    TaskStats st(1);
    for (int t = 0; t < 1 + rep % 20; ++t) {
      rewards.push_back(z(rng));
      st.add(0, rewards.back());
    }
    const auto o = oracle::scalar_gaussian_update(m0, v0, nv, rewards);
    const auto b = gaussian_task_posterior(Vector::Constant(1, m0), Matrix::Constant(1, 1, v0), nv, st);
    worst = std::max({worst, std::fabs(b.mean(0) - o.mean), std::fabs(b.cov(0, 0) - o.var)});
  }
  return {"gaussian-scalar-oracle", worst <= tol, "max abs gap " + fmt(worst) + " (tol " + fmt(tol) + ")"};
}

inline PropertyResult mean_precision_roundtrip() {
  double worst = 0.0;
  for (double mu : {0.05, 0.3, 0.5, 0.9})
    for (double psi : {0.01, 0.1, 1.0, 10.0}) {
      const auto b = beta_from_mean_precision(mu, psi);
      worst = std::max({worst, std::fabs(b.mean() - mu) / mu, std::fabs(b.precision() - psi) / psi,
                        std::fabs(precision_from_mean_variance(mu, b.variance()) - psi) / psi});
    }
  return {"mean-precision-roundtrip", worst < 1e-10, "max rel gap " + fmt(worst)};
}

// Full Metropolis-within-Gibbs chain for a scalar theta against the exact
// Beta-Binomial marginal posterior on a grid.
inline PropertyResult mcmc_stationarity_1d(std::uint64_t seed, std::size_t samples, double tol) {
  const auto prob = oracle::scalar_bblm(seed, 30, 20, 0.8, 0.5);
  Rng rng = random::make_rng(seed, "mcmc-chain");
  McmcOptions opt;
  opt.n_samples = samples;
  opt.burn_in = 2000;
  const auto chain = sample_theta_mcmc(prob.cfg, prob.fm, prob.history, lookup_table(prob.metadata), rng, opt);
  std::vector<double> xs;
  for (const auto& v : chain.samples) xs.push_back(v(0));
  const auto q = oracle::quadrature_theta_counts_1d(0.0, 1.0, prob.cfg.psi(), prob.features, prob.successes,
                                                    prob.failures, -4.0, 4.0, 8001);
  const double tv = oracle::binned_tv_distance(xs, q, 40);
  return {"stationarity-d1", tv < tol,
          "TV " + fmt(tv) + " vs quadrature (limit " + fmt(tol) + "), acceptance " + fmt(chain.acceptance_rate)};
}

struct RecoveryOutcome {
  bool within = false;
  double worst_z = 0.0;
  double acceptance = 0.0;
};

// BBLM data with N tasks, T uniformly random pulls each; is the chain mean
// within `n_sd` posterior standard deviations of theta componentwise?
inline RecoveryOutcome mcmc_recovery_once(std::uint64_t seed, std::size_t tasks, std::size_t rounds,
                                          std::size_t arms, std::size_t dim, double psi, double n_sd,
                                          const McmcOptions& opt) {
  PopulationSpec spec;
  spec.tasks = tasks;
  spec.horizon = rounds;
  spec.arms = arms;
  spec.dim = dim;
  spec.reward = RewardKind::Bernoulli;
  spec.psi = psi;
  spec.seed = seed;
  const auto pop = generate_population(spec);
  const RewardModel rewards(RewardKind::Bernoulli, 0.0, seed);
  Rng rng = random::make_rng(seed, "recovery");
  std::uniform_int_distribution<Arm> pick(0, arms - 1);
  History h;
  for (const auto& t : pop.tasks)
    for (std::size_t r = 1; r <= rounds; ++r) {
      const Arm a = pick(rng);
      h.append({t.id, a, rewards.draw(t, a, r), r});
    }
  const auto cfg = HierarchyConfig::isotropic(dim, arms, spec.theta_var(), 0.0, 1.0, psi);
  const auto chain = sample_theta_mcmc(cfg, pop.feature_map, h, pop.metadata_lookup(), rng, opt);
  const Vector m = chain.mean();
  const Vector sd = chain.stddev();
  RecoveryOutcome out{true, 0.0, chain.acceptance_rate};
  for (Eigen::Index j = 0; j < m.size(); ++j) {
    const double z = std::fabs(m(j) - pop.theta(j)) / sd(j);
    out.worst_z = std::max(out.worst_z, z);
    if (!(z <= n_sd)) out.within = false;
  }
  return out;
}

inline PropertyResult mcmc_recovery(std::uint64_t seed) {
  McmcOptions opt;
  opt.n_samples = 2000;
  opt.burn_in = 1000;
  const auto r = mcmc_recovery_once(seed, 100, 50, 2, 3, 0.1, 3.0, opt);
  return {"parameter-recovery", r.within,
          "N=100 T=50 K=2 d=3: max |mean - theta| / sd " + fmt(r.worst_z) + ", acceptance " + fmt(r.acceptance)};
}

inline PropertyResult mcmc_acceptance(std::uint64_t seed) {
  const auto prob = oracle::scalar_bblm(seed, 20, 10, -0.5, 0.2);
  Rng rng = random::make_rng(seed, "acceptance");
  McmcOptions opt;
  opt.n_samples = 3000;
  opt.burn_in = 2000;
  const auto chain = sample_theta_mcmc(prob.cfg, prob.fm, prob.history, lookup_table(prob.metadata), rng, opt);
  return {"acceptance-rate", !chain.acceptance_warning && chain.acceptance_rate > 0.1 && chain.acceptance_rate < 0.6,
          "post-burn-in acceptance " + fmt(chain.acceptance_rate) + " (target 0.3)"};
}

inline RegretLedger small_regret_run(std::uint64_t seed, ScheduleKind sched) {
  PopulationSpec spec;
  spec.tasks = 8;
  spec.horizon = 12;
  spec.arms = 3;
  spec.dim = 5;
  RegretLedger ledger;
  for (std::uint64_t s = 0; s < 3; ++s) {
    spec.seed = random::derive(seed, "regret-suite", s);
    const auto ctx = make_context(spec, sched);
    for (auto k : {PolicyKind::Mtts, PolicyKind::IndividualTs, PolicyKind::OracleTs}) {
      const std::string name(policy_name(k));
      auto agent = make_agent(k, agent_setup(ctx, spec.seed, name, auto_refresh_interval(sched, 8, 12)));
      ledger.append(simulate(ctx, *agent, name, s));
    }
  }
  return ledger;
}

}  // namespace checks

template <class F>
SuiteReport timed_suite(const std::string& name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport r{name, body(), 0.0};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline SuiteReport posterior_suite(const PosteriorFn& woodbury = posterior_r_woodbury) {
  return timed_suite("posterior", [&] {
    return std::vector<PropertyResult>{
        checks::path_equivalence(200, 1, 1e-8, woodbury),
        checks::theta_equivalence(100, 2, 1e-8),
        checks::empty_task_identity(100, 3, 1e-10),
        checks::theta_marginalization(5, 20000, 4, 3.0),
        checks::incremental_equals_batch(50, 5, 1e-8),
        checks::covariance_psd(100, 6),
    };
  });
}

inline SuiteReport conjugacy_suite() {
  return timed_suite("conjugacy", [] {
    return std::vector<PropertyResult>{checks::beta_commutation(1), checks::gaussian_scalar_update(2, 1e-10),
                                       checks::mean_precision_roundtrip()};
  });
}

inline SuiteReport mcmc_suite() {
  return timed_suite("mcmc", [] {
    return std::vector<PropertyResult>{checks::mcmc_stationarity_1d(21, 40000, 0.05), checks::mcmc_recovery(7),
                                       checks::mcmc_acceptance(3)};
  });
}

inline SuiteReport regret_suite() {
  return timed_suite("regret", [] {
    std::vector<PropertyResult> out;
    const auto ledger = checks::small_regret_run(11, ScheduleKind::Sequential);

    double worst = 0.0;
    for (auto v : {CurveView::PerRoundConcurrent, CurveView::PerTaskSequential})
      for (const auto& p : multi_task_regret_curve(ledger, "oracle_ts", v))
        worst = std::max({worst, std::fabs(p.mean), std::fabs(p.se)});
    out.push_back({"oracle-mtr-zero", worst == 0.0, "max |MTR| of oracle vs itself " + checks::fmt(worst)});

    bool nonneg = true;
    bool monotone = true;
    std::map<std::pair<std::string, std::uint64_t>, double> running;
    for (const auto& e : ledger.entries()) {
      nonneg = nonneg && e.inst_regret >= 0.0;
      auto& acc = running[{e.algorithm, e.seed}];
      const double next = acc + e.inst_regret;
      monotone = monotone && next >= acc;
      acc = next;
    }
    out.push_back({"regret-nonnegative", nonneg, "instantaneous regret >= 0 on every entry"});
    out.push_back({"cumulative-monotone", monotone, "cumulative regret non-decreasing"});

    double gap = 0.0;
    for (const auto& alg : ledger.algorithms()) {
      const auto c = bayes_regret_curve(ledger, alg, CurveView::PerTaskSequential);
      double from_curve = 0.0;
      for (const auto& p : c) from_curve += p.mean;
      double direct = 0.0;
      for (const auto& [s, v] : cumulative_regret_by_seed(ledger, alg)) direct += v;
      direct /= static_cast<double>(ledger.seeds(alg).size());
      gap = std::max(gap, std::fabs(from_curve - direct));
    }
    out.push_back({"ledger-resum", gap < 1e-9, "curve total vs raw ledger sum gap " + checks::fmt(gap)});

    auto entries = ledger.entries();
    std::shuffle(entries.begin(), entries.end(), Rng(5));
    RegretLedger shuffled;
    for (auto& e : entries) shuffled.append(e);
    double perm = 0.0;
    for (auto v : {CurveView::PerRoundConcurrent, CurveView::PerTaskSequential}) {
      const auto a = bayes_regret_curve(ledger, "mtts", v);
      const auto b = bayes_regret_curve(shuffled, "mtts", v);
      for (std::size_t j = 0; j < a.size(); ++j)
        perm = std::max({perm, std::fabs(a[j].mean - b[j].mean), std::fabs(a[j].se - b[j].se)});
    }
    out.push_back({"permutation-invariance", perm < 1e-12, "max curve change under shuffling " + checks::fmt(perm)});

    const auto again = checks::small_regret_run(11, ScheduleKind::Sequential);
    bool same = again.size() == ledger.size();
    for (std::size_t j = 0; same && j < ledger.size(); ++j)
      same = ledger.entries()[j].arm == again.entries()[j].arm && ledger.entries()[j].reward == again.entries()[j].reward;
    out.push_back({"run-determinism", same, same ? "repeat run identical" : "repeat run differs"});
    return out;
  });
}

inline SuiteReport run_suite(const std::string& name) {
  if (name == "posterior") return posterior_suite();
  if (name == "conjugacy") return conjugacy_suite();
  if (name == "mcmc") return mcmc_suite();
  if (name == "regret") return regret_suite();
  throw ConfigError("unknown suite '" + name + "' (posterior, conjugacy, mcmc, regret)");
}

}  // namespace mtts::bench
