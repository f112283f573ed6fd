#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mtts/bernoulli_posterior.hpp"
#include "mtts/core_model.hpp"
#include "mtts/random.hpp"

namespace mtts {

enum class RewardKind { Gaussian, Bernoulli };

inline const char* to_string(RewardKind k) { return k == RewardKind::Gaussian ? "gaussian" : "bernoulli"; }

struct PopulationSpec {
  std::size_t tasks = 200;   // N
  std::size_t horizon = 200; // T
  std::size_t arms = 8;      // K
  std::size_t dim = 15;      // d
  RewardKind reward = RewardKind::Gaussian;
  double sigma = 1.0;        // reward noise std (Gaussian)
  double sigma1_sq = 0.25;   // Sigma = sigma1_sq I
  double psi = 0.1;          // Beta precision (Bernoulli)
  std::optional<double> theta_variance;  // theta ~ N(0, v I); default 1 / d
  double misspec_lambda = 1.0;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t metadata_dim() const { return arms * (dim - arms); }
  [[nodiscard]] double theta_var() const { return theta_variance.value_or(1.0 / static_cast<double>(dim)); }

  void validate() const {
    if (tasks < 1 || horizon < 1 || arms < 1 || dim < 1) throw ConfigError("PopulationSpec: sizes must be >= 1");
    if (dim < arms) throw ConfigError("PopulationSpec: d must be >= K for the indicator-plus-metadata map");
    if (!(misspec_lambda >= 0.0 && misspec_lambda <= 1.0)) throw ConfigError("PopulationSpec: lambda must lie in [0, 1]");
    if (reward == RewardKind::Gaussian && !(sigma >= 0.0)) throw ConfigError("PopulationSpec: sigma must be >= 0");
    if (!(sigma1_sq >= 0.0)) throw ConfigError("PopulationSpec: sigma1_sq must be >= 0");
    if (reward == RewardKind::Bernoulli && !(psi > 0.0)) throw ConfigError("PopulationSpec: psi must be > 0");
    if (!(theta_var() > 0.0)) throw ConfigError("PopulationSpec: theta variance must be > 0");
  }
};

struct Population {
  PopulationSpec spec;
  FeatureMap feature_map;
  Vector theta;
  std::vector<TaskInstance> tasks;
  std::vector<Vector> metadata;          // metadata[i] == tasks[i].metadata
  std::vector<Vector> conditional_means; // E(r_i | x_i, theta): the oracle prior mean
  double normalization = 1.0;            // c of the misspecified generator

  [[nodiscard]] MetadataLookup metadata_lookup() const { return lookup_table(metadata); }
};

namespace detail {

struct RawDraws {
  Vector theta;
  std::vector<Vector> metadata;
  std::vector<Vector> deltas;    // Gaussian random effects, scaled by sigma1
  std::vector<Vector> uniforms;  // Bernoulli: one Beta draw source per (task, arm)
};

// All population randomness comes from one stream seeded by (seed, "population"),
// consumed in a fixed order so the LMM and misspecified generators share draws.
inline Population draw_population(const PopulationSpec& spec) {
  spec.validate();
  Rng rng = random::make_rng(spec.seed, "population");
  std::normal_distribution<double> z(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto k = static_cast<Eigen::Index>(spec.arms);
  const auto p = static_cast<Eigen::Index>(spec.metadata_dim());

  Population pop{spec, FeatureMap::indicator_plus_metadata(spec.arms, spec.dim), Vector(d), {}, {}, {}, 1.0};
  const double theta_sd = std::sqrt(spec.theta_var());
  for (Eigen::Index j = 0; j < d; ++j) pop.theta(j) = theta_sd * z(rng);

  const double sd1 = std::sqrt(spec.sigma1_sq);
  pop.tasks.resize(spec.tasks);
  pop.metadata.resize(spec.tasks);
  for (std::size_t i = 0; i < spec.tasks; ++i) {
    Vector x(p);
    for (Eigen::Index j = 0; j < p; ++j) x(j) = z(rng);
    Vector delta(k);
    for (Eigen::Index a = 0; a < k; ++a) delta(a) = sd1 * z(rng);
    pop.tasks[i].id = i;
    pop.tasks[i].metadata = x;
    pop.tasks[i].true_means = delta;  // finalized by the caller
    pop.metadata[i] = std::move(x);
  }
  return pop;
}

}  // namespace detail

// Phi_i theta for every task.
inline std::vector<Vector> fixed_effects(const Population& pop) {
  std::vector<Vector> out;
  out.reserve(pop.tasks.size());
  for (const auto& t : pop.tasks) out.push_back(build_task_feature_matrix(pop.feature_map, t.metadata) * pop.theta);
  return out;
}

namespace detail {

inline Population finish_bernoulli(Population pop) {
  Rng rng = random::make_rng(pop.spec.seed, "population/beta");
  const auto fx = fixed_effects(pop);
  pop.conditional_means.clear();
  for (std::size_t i = 0; i < pop.tasks.size(); ++i) {
    Vector mean(fx[i].size());
    Vector r(fx[i].size());
    for (Eigen::Index a = 0; a < fx[i].size(); ++a) {
      mean(a) = clamp_mean(logistic(fx[i](a)));
      const BetaParams bp = beta_from_mean_precision(mean(a), pop.spec.psi);
      r(a) = random::beta_variate(rng, bp.alpha1, bp.alpha2);
    }
    pop.tasks[i].true_means = r;
    pop.conditional_means.push_back(mean);
  }
  return pop;
}

}  // namespace detail

// r_i = Phi_i theta + delta_i (Gaussian) or r_{i,a} ~ Beta(logistic(phi^T theta), psi).
inline Population generate_population(const PopulationSpec& spec) {
  Population pop = detail::draw_population(spec);
  if (spec.reward == RewardKind::Bernoulli) return detail::finish_bernoulli(std::move(pop));
  const auto fx = fixed_effects(pop);
  for (std::size_t i = 0; i < pop.tasks.size(); ++i) {
    pop.tasks[i].true_means = fx[i] + pop.tasks[i].true_means;
    pop.conditional_means.push_back(fx[i]);
  }
  return pop;
}

// r_i = (1 - lambda) cos(c Phi_i theta) / c + lambda Phi_i theta + delta_i, with
// c = (pi / 2) / max |(Phi_i theta)_a| over the population (1 when that max is 0).
inline Population generate_misspecified(const PopulationSpec& spec) {
  if (spec.reward != RewardKind::Gaussian) throw ConfigError("generate_misspecified: Gaussian rewards only");
  Population pop = detail::draw_population(spec);
  const auto fx = fixed_effects(pop);
  double max_abs = 0.0;
  for (const auto& f : fx) max_abs = std::max(max_abs, f.cwiseAbs().maxCoeff());
  const double c = max_abs > 0.0 ? (std::numbers::pi / 2.0) / max_abs : 1.0;
  pop.normalization = c;
  const double lambda = spec.misspec_lambda;
  for (std::size_t i = 0; i < pop.tasks.size(); ++i) {
    const Vector curved = (c * fx[i]).array().cos().matrix() / c;
    const Vector mean = (1.0 - lambda) * curved + lambda * fx[i];
    pop.tasks[i].true_means = mean + pop.tasks[i].true_means;
    pop.conditional_means.push_back(mean);
  }
  return pop;
}

inline Population make_population(const PopulationSpec& spec) {
  if (spec.reward == RewardKind::Gaussian && spec.misspec_lambda < 1.0) return generate_misspecified(spec);
  return generate_population(spec);
}

// Reward noise keyed by (seed, task, round, arm): common random numbers across policies.
class RewardModel {
 public:
  RewardModel(RewardKind kind, double sigma, std::uint64_t seed)
      : kind_(kind), sigma_(sigma), key_(random::derive(seed, "reward")) {}

  [[nodiscard]] double draw(const TaskInstance& task, Arm arm, std::size_t round) const {
    if (arm >= task.arms()) throw ConfigError("draw_reward: arm out of range");
    const random::KeyedDraw kd{random::derive(key_, "noise", task.id, round, arm)};
    const double mean = task.true_means(static_cast<Eigen::Index>(arm));
    if (kind_ == RewardKind::Bernoulli) return kd.uniform() < mean ? 1.0 : 0.0;
    return mean + sigma_ * kd.standard_normal();
  }

  [[nodiscard]] RewardKind kind() const { return kind_; }

 private:
  RewardKind kind_;
  double sigma_;
  std::uint64_t key_;
};

// Free-standing reward draw with a caller-owned stream.
inline double draw_reward(const TaskInstance& task, Arm arm, RewardKind kind, double sigma, Rng& rng) {
  if (arm >= task.arms()) throw ConfigError("draw_reward: arm out of range");
  const double mean = task.true_means(static_cast<Eigen::Index>(arm));
  if (kind == RewardKind::Bernoulli) {
    std::bernoulli_distribution b(std::clamp(mean, 0.0, 1.0));
    return b(rng) ? 1.0 : 0.0;
  }
  std::normal_distribution<double> z(0.0, 1.0);
  return mean + sigma * z(rng);
}

enum class ScheduleKind { Sequential, Concurrent, Custom };

// Ordered decision points, grouped into batches whose decisions are made
// before any of the batch's rewards are revealed.
struct InteractionSchedule {
  ScheduleKind kind = ScheduleKind::Sequential;
  std::vector<TaskId> stream;
  std::vector<std::size_t> batch_sizes;
};

inline InteractionSchedule make_schedule(ScheduleKind kind, std::size_t n_tasks, std::size_t horizon,
                                         const std::vector<TaskId>& custom = {}) {
  InteractionSchedule s;
  s.kind = kind;
  if (n_tasks < 1 || horizon < 1) throw ScheduleError("make_schedule: N and T must be >= 1");
  switch (kind) {
    case ScheduleKind::Sequential:
      for (TaskId i = 0; i < n_tasks; ++i)
        for (std::size_t t = 0; t < horizon; ++t) s.stream.push_back(i);
      s.batch_sizes.assign(s.stream.size(), 1);
      break;
    case ScheduleKind::Concurrent:
      for (std::size_t t = 0; t < horizon; ++t)
        for (TaskId i = 0; i < n_tasks; ++i) s.stream.push_back(i);
      s.batch_sizes.assign(horizon, n_tasks);
      break;
    case ScheduleKind::Custom: {
      std::vector<std::size_t> counts(n_tasks, 0);
      for (TaskId i : custom) {
        if (i >= n_tasks) throw ScheduleError("make_schedule: task id out of range in custom stream");
        ++counts[i];
      }
      for (std::size_t c : counts)
        if (c != horizon) throw ScheduleError("make_schedule: every task must appear exactly T times");
      s.stream = custom;
      s.batch_sizes.assign(s.stream.size(), 1);
      break;
    }
  }
  return s;
}

}  // namespace mtts
