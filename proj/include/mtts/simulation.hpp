#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtts/agents.hpp"
#include "mtts/environments.hpp"
#include "mtts/metrics.hpp"
#include "mtts/priors_eb.hpp"

namespace mtts {

// Everything shared by the algorithms run under one seed.
struct SimulationContext {
  Population population;
  DerivedPriors priors;
  HierarchyConfig model;
  InteractionSchedule schedule;
  RewardModel rewards;
};

inline HierarchyConfig model_for(const PopulationSpec& spec) {
  const double sigma = spec.reward == RewardKind::Gaussian ? spec.sigma : 1.0;
  return HierarchyConfig::isotropic(spec.dim, spec.arms, spec.theta_var(), spec.sigma1_sq, sigma, spec.psi);
}

inline SimulationContext make_context(const PopulationSpec& spec, ScheduleKind schedule,
                                      const std::vector<TaskId>& custom_stream = {}, std::size_t n_mc = 20000,
                                      std::size_t n_candidates = kBernoulliCandidates) {
  Population pop = make_population(spec);
  DerivedPriors priors = derive_baseline_priors(spec, pop.theta, n_mc, n_candidates);
  return SimulationContext{std::move(pop), std::move(priors), model_for(spec),
                           make_schedule(schedule, spec.tasks, spec.horizon, custom_stream),
                           RewardModel(spec.reward, spec.sigma, spec.seed)};
}

// "auto" refresh interval: once per task in the sequential setting, once per
// round in the concurrent setting.
inline std::size_t auto_refresh_interval(ScheduleKind kind, std::size_t tasks, std::size_t horizon) {
  switch (kind) {
    case ScheduleKind::Sequential: return horizon;
    case ScheduleKind::Concurrent: return tasks;
    case ScheduleKind::Custom: return 1;
  }
  return 1;
}

inline AgentSetup agent_setup(const SimulationContext& ctx, std::uint64_t agent_seed, std::string label,
                              std::size_t refresh_interval, const McmcOptions& mcmc = {}) {
  AgentSetup s;
  s.reward = ctx.population.spec.reward;
  s.feature_map = &ctx.population.feature_map;
  s.metadata = &ctx.population.metadata;
  s.model = ctx.model;
  s.priors = ctx.priors;
  s.oracle_means = &ctx.population.conditional_means;
  s.seed = agent_seed;
  s.label = std::move(label);
  s.refresh_interval = refresh_interval;
  s.mcmc = mcmc;
  return s;
}

// Runs one agent through the schedule. All decisions of a batch are made
// before any of its rewards are revealed.
inline RegretLedger simulate(const SimulationContext& ctx, Agent& agent, const std::string& algorithm,
                             std::uint64_t seed) {
  const auto& tasks = ctx.population.tasks;
  std::vector<std::size_t> rounds(tasks.size(), 0);
  RegretLedger ledger;
  std::size_t pos = 0;
  std::vector<std::pair<TaskId, Arm>> batch;
  for (std::size_t b : ctx.schedule.batch_sizes) {
    batch.clear();
    for (std::size_t j = 0; j < b; ++j) {
      const TaskId task = ctx.schedule.stream[pos + j];
      batch.emplace_back(task, agent.act(task));
    }
    for (const auto& [task, arm] : batch) {
      const std::size_t round = ++rounds[task];
      const double reward = ctx.rewards.draw(tasks[task], arm, round);
      agent.observe({task, arm, reward, round});
      ledger.append({algorithm, seed, task, round, arm, reward, instantaneous_regret(tasks[task], arm)});
    }
    pos += b;
  }
  return ledger;
}

}  // namespace mtts
