#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mtts/bench/config.hpp"
#include "mtts/bench/io.hpp"
#include "mtts/bench/plot.hpp"
#include "mtts/metrics.hpp"
#include "mtts/random.hpp"
#include "mtts/simulation.hpp"

#ifndef MTTS_VERSION
#define MTTS_VERSION "0.0.0"
#endif

namespace mtts::bench {

// Each run seed gets its own population; every algorithm sees the same one.
inline std::uint64_t population_seed(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  return random::derive(cfg.population.seed, "run", run_seed);
}

inline PopulationSpec spec_for_seed(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  PopulationSpec s = cfg.population;
  s.seed = population_seed(cfg, run_seed);
  return s;
}

inline RegretLedger run_single(const ExperimentConfig& cfg, const AlgorithmSpec& alg, std::uint64_t run_seed) {
  const PopulationSpec spec = spec_for_seed(cfg, run_seed);
  const auto ctx = make_context(spec, cfg.schedule, cfg.custom_stream, cfg.prior_mc_samples, alg.candidates);
  McmcOptions mcmc;
  mcmc.n_samples = alg.mcmc_samples;
  mcmc.burn_in = alg.mcmc_burn_in;
  const std::size_t refresh = alg.refresh.value_or(auto_refresh_interval(cfg.schedule, spec.tasks, spec.horizon));
  auto agent = make_agent(alg.kind, agent_setup(ctx, spec.seed, alg.label, refresh, mcmc));
  return simulate(ctx, *agent, alg.label, run_seed);
}

// Runs every (algorithm, seed) pair on a worker pool and merges the ledgers
// in (algorithm, seed) order, independent of scheduling.
inline RegretLedger run_all(const ExperimentConfig& cfg) {
  struct Job {
    std::size_t alg;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < cfg.algorithms.size(); ++a)
    for (auto s : cfg.seeds) jobs.push_back({a, s});
  std::vector<RegretLedger> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        results[j] = run_single(cfg, cfg.algorithms[jobs[j].alg], jobs[j].seed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(jobs.size());
      }
    }
  };
  const std::size_t n_threads = std::min(cfg.parallelism, jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  RegretLedger merged;
  for (const auto& r : results) merged.append(r);
  return merged;
}

inline std::string ledger_csv(const RegretLedger& ledger) {
  CsvBuilder csv({"algorithm", "seed", "task_id", "round", "arm", "reward", "inst_regret"});
  for (const auto& e : ledger.entries())
    csv.row({e.algorithm, std::to_string(e.seed), std::to_string(e.task_id), std::to_string(e.round),
             std::to_string(e.arm), format_double(e.reward), format_double(e.inst_regret)});
  return csv.str();
}

struct CurveSet {
  std::string algorithm;
  std::string view;
  Curve curve;
};

inline std::vector<CurveSet> compute_curves(const ExperimentConfig& cfg, const RegretLedger& ledger) {
  std::vector<CurveSet> out;
  for (const auto& a : cfg.algorithms)
    for (auto v : {CurveView::PerRoundConcurrent, CurveView::PerTaskSequential})
      out.push_back({a.label, std::string(to_string(v)), bayes_regret_curve(ledger, a.label, v)});
  if (cfg.mtr) {
    const std::string oracle = cfg.find_policy(PolicyKind::OracleTs)->label;
    for (const auto& a : cfg.algorithms)
      for (auto v : {CurveView::PerRoundConcurrent, CurveView::PerTaskSequential})
        out.push_back({a.label, "mtr_" + std::string(to_string(v)), multi_task_regret_curve(ledger, a.label, v, oracle)});
  }
  return out;
}

inline std::string curves_csv(const std::vector<CurveSet>& curves) {
  CsvBuilder csv({"algorithm", "view", "index", "mean", "se"});
  for (const auto& c : curves)
    for (const auto& p : c.curve)
      csv.row({c.algorithm, c.view, std::to_string(p.index), format_double(p.mean), format_double(p.se)});
  return csv.str();
}

inline std::string summary_csv(const ExperimentConfig& cfg, const RegretLedger& ledger) {
  auto mean_of = [&](const std::string& label) {
    std::vector<double> v;
    for (const auto& [s, x] : cumulative_regret_by_seed(ledger, label)) v.push_back(x);
    return summarize(v);
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const AlgorithmSpec* ind = cfg.find_policy(PolicyKind::IndividualTs);
  const AlgorithmSpec* orc = cfg.find_policy(PolicyKind::OracleTs);
  const double ind_mean = ind ? mean_of(ind->label).mean : nan;
  const double orc_mean = orc ? mean_of(orc->label).mean : nan;
  CsvBuilder csv({"algorithm", "policy", "seeds", "cumulative_regret_mean", "cumulative_regret_se",
                  "ratio_vs_individual_ts", "ratio_vs_oracle_ts"});
  for (const auto& a : cfg.algorithms) {
    const auto s = mean_of(a.label);
    csv.row({a.label, std::string(policy_name(a.kind)), std::to_string(cfg.seeds.size()), format_double(s.mean),
             format_double(s.se), format_double(s.mean / ind_mean), format_double(s.mean / orc_mean)});
  }
  return csv.str();
}

inline std::string plot_for(const std::vector<CurveSet>& curves, const std::string& view, const std::string& title,
                            const std::string& xlabel, const std::string& ylabel) {
  std::vector<PlotSeries> series;
  for (const auto& c : curves) {
    if (c.view != view) continue;
    PlotSeries s{c.algorithm, {}, {}, {}};
    for (const auto& p : c.curve) {
      s.x.push_back(static_cast<double>(p.index));
      s.mean.push_back(p.mean);
      s.se.push_back(p.se);
    }
    series.push_back(std::move(s));
  }
  return render_line_plot(title, xlabel, ylabel, series);
}

struct RunArtifacts {
  fs::path directory;
  std::vector<fs::path> files;
};

inline nlohmann::ordered_json manifest_json(const ExperimentConfig& cfg, const std::vector<std::string>& files) {
  nlohmann::ordered_json m;
  m["software"] = {{"name", "mtts-bench"}, {"version", MTTS_VERSION}};
  m["config"] = to_json(cfg);
  auto seeds = nlohmann::ordered_json::array();
  for (auto s : cfg.seeds) seeds.push_back({{"seed", s}, {"population_seed", population_seed(cfg, s)}});
  m["seeds"] = seeds;
  m["artifacts"] = files;
  m["csv"] = {{"float_format", "%.17g"},
              {"ledger", {"algorithm", "seed", "task_id", "round", "arm", "reward", "inst_regret"}},
              {"curves", {"algorithm", "view", "index", "mean", "se"}},
              {"summary", {"algorithm", "policy", "seeds", "cumulative_regret_mean", "cumulative_regret_se",
                           "ratio_vs_individual_ts", "ratio_vs_oracle_ts"}}};
  return m;
}

inline fs::path output_directory(const ExperimentConfig& cfg, const std::string& fallback_name) {
  return resolve_output(cfg.output.empty() ? fs::path("results") / fallback_name : fs::path(cfg.output));
}

inline RunArtifacts write_artifacts(const ExperimentConfig& cfg, const RegretLedger& ledger, const fs::path& dir) {
  RunArtifacts out{dir, {}};
  std::vector<std::string> names{"ledger.csv", "curves.csv", "summary.csv"};
  const auto curves = compute_curves(cfg, ledger);
  atomic_write(dir / "ledger.csv", ledger_csv(ledger));
  atomic_write(dir / "curves.csv", curves_csv(curves));
  atomic_write(dir / "summary.csv", summary_csv(cfg, ledger));
  if (cfg.plots) {
    atomic_write(dir / "regret_per_round.svg",
                 plot_for(curves, "per_round_concurrent", "Bayes regret per round", "round", "mean regret per task"));
    atomic_write(dir / "regret_per_task.svg",
                 plot_for(curves, "per_task_sequential", "Bayes regret per task", "task", "regret per task"));
    names.push_back("regret_per_round.svg");
    names.push_back("regret_per_task.svg");
    if (cfg.mtr) {
      atomic_write(dir / "mtr_per_task.svg",
                   plot_for(curves, "mtr_per_task_sequential", "Multi-task regret per task", "task", "regret minus oracle"));
      names.push_back("mtr_per_task.svg");
    }
  }
  names.push_back("manifest.json");
  atomic_write(dir / "manifest.json", manifest_json(cfg, names).dump(2) + "\n");
  for (const auto& n : names) out.files.push_back(dir / n);
  return out;
}

inline RunArtifacts run_experiment(const ExperimentConfig& cfg, const fs::path& dir) {
  return write_artifacts(cfg, run_all(cfg), dir);
}

// One CSV of tasks and one of theta per run seed.
inline std::vector<fs::path> export_population(const ExperimentConfig& cfg, const fs::path& dir) {
  std::vector<fs::path> out;
  for (auto s : cfg.seeds) {
    const auto spec = spec_for_seed(cfg, s);
    const auto pop = make_population(spec);
    std::vector<std::string> header{"task_id"};
    for (std::size_t j = 0; j < spec.metadata_dim(); ++j) header.push_back("x_" + std::to_string(j));
    for (std::size_t a = 0; a < spec.arms; ++a) header.push_back("r_" + std::to_string(a));
    for (std::size_t a = 0; a < spec.arms; ++a) header.push_back("prior_mean_" + std::to_string(a));
    CsvBuilder csv(header);
    for (std::size_t i = 0; i < pop.tasks.size(); ++i) {
      std::vector<std::string> row{std::to_string(i)};
      for (Eigen::Index j = 0; j < pop.metadata[i].size(); ++j) row.push_back(format_double(pop.metadata[i](j)));
      for (Eigen::Index a = 0; a < pop.tasks[i].true_means.size(); ++a) row.push_back(format_double(pop.tasks[i].true_means(a)));
      for (Eigen::Index a = 0; a < pop.conditional_means[i].size(); ++a) row.push_back(format_double(pop.conditional_means[i](a)));
      csv.row(row);
    }
    CsvBuilder theta({"index", "theta"});
    for (Eigen::Index j = 0; j < pop.theta.size(); ++j) theta.row({std::to_string(j), format_double(pop.theta(j))});
    const auto base = "population_seed" + std::to_string(s);
    atomic_write(dir / (base + ".csv"), csv.str());
    atomic_write(dir / (base + "_theta.csv"), theta.str());
    out.push_back(dir / (base + ".csv"));
    out.push_back(dir / (base + "_theta.csv"));
  }
  return out;
}

}  // namespace mtts::bench
