#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtts/bernoulli_posterior.hpp"
#include "mtts/core_model.hpp"
#include "mtts/environments.hpp"
#include "mtts/gaussian_posterior.hpp"
#include "mtts/priors_eb.hpp"
#include "mtts/random.hpp"

namespace mtts {

enum class PolicyKind {
  Mtts,              // exact posterior every decision
  MttsBatched,       // theta refreshed every l records
  MttsModified,      // alignment period, then a fixed learned prior
  OracleTs,
  OracleTsModified,
  Osfa,
  IndividualTs,
  LinearTs,
  MetaTs,
};

inline constexpr std::string_view policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Mtts: return "mtts";
    case PolicyKind::MttsBatched: return "mtts_approx";
    case PolicyKind::MttsModified: return "mtts_modified";
    case PolicyKind::OracleTs: return "oracle_ts";
    case PolicyKind::OracleTsModified: return "oracle_ts_modified";
    case PolicyKind::Osfa: return "osfa";
    case PolicyKind::IndividualTs: return "individual_ts";
    case PolicyKind::LinearTs: return "linear_ts";
    case PolicyKind::MetaTs: return "meta_ts";
  }
  return "unknown";
}

inline std::optional<PolicyKind> parse_policy(std::string_view name) {
  for (auto k : {PolicyKind::Mtts, PolicyKind::MttsBatched, PolicyKind::MttsModified, PolicyKind::OracleTs,
                 PolicyKind::OracleTsModified, PolicyKind::Osfa, PolicyKind::IndividualTs, PolicyKind::LinearTs,
                 PolicyKind::MetaTs})
    if (policy_name(k) == name) return k;
  return std::nullopt;
}

inline constexpr std::size_t kNeverRefresh = std::numeric_limits<std::size_t>::max();

// Lowest index wins ties.
inline Arm argmax_lowest_index(const Vector& v) {
  Arm best = 0;
  for (Eigen::Index a = 1; a < v.size(); ++a)
    if (v(a) > v(static_cast<Eigen::Index>(best))) best = static_cast<Arm>(a);
  return best;
}

// Everything a policy may be told about the problem. `oracle_means` is read
// by the oracle policies only; true reward means are never handed out.
struct AgentSetup {
  RewardKind reward = RewardKind::Gaussian;
  const FeatureMap* feature_map = nullptr;
  const std::vector<Vector>* metadata = nullptr;
  std::optional<HierarchyConfig> model;         // MTTS model and known variances
  DerivedPriors priors;                         // baselines
  const std::vector<Vector>* oracle_means = nullptr;
  std::uint64_t seed = 0;
  std::string label;                            // agent stream name; defaults to the policy name
  std::size_t refresh_interval = 1;             // l for the batched policies and meta-TS
  McmcOptions mcmc;
};

// Receives each sampled arm-value vector before the argmax. Tests use it to
// observe or perturb samples.
using SampleHook = std::function<void(TaskId, Vector&)>;

class Agent {
 public:
  Agent(PolicyKind kind, const AgentSetup& setup)
      : kind_(kind),
        arms_(setup.feature_map ? setup.feature_map->arms() : 0),
        rng_(random::make_rng(setup.seed, "agent/" + (setup.label.empty() ? std::string(policy_name(kind)) : setup.label))) {
    if (!setup.feature_map || !setup.metadata) throw ConfigError("AgentSetup: feature map and metadata are required");
  }
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  [[nodiscard]] virtual Arm act(TaskId task) = 0;

  void observe(const InteractionRecord& rec) {
    if (rec.action >= arms_) throw ConfigError("observe: action out of range");
    history_.append(rec);
    absorb(rec);
  }

  [[nodiscard]] PolicyKind kind() const { return kind_; }
  [[nodiscard]] const History& history() const { return history_; }
  void set_sample_hook(SampleHook hook) { hook_ = std::move(hook); }

 protected:
  virtual void absorb(const InteractionRecord& rec) = 0;

  Arm choose(TaskId task, Vector sample) {
    if (hook_) hook_(task, sample);
    return argmax_lowest_index(sample);
  }

  [[nodiscard]] std::size_t arms() const { return arms_; }
  Rng& rng() { return rng_; }

 private:
  PolicyKind kind_;
  std::size_t arms_;
  Rng rng_;
  History history_;
  SampleHook hook_;
};

namespace detail {

// Counts and sums per (task, arm).
class StatsTable {
 public:
  explicit StatsTable(std::size_t arms) : arms_(arms) {}

  void add(TaskId task, Arm a, double reward) { at(task).add(a, reward); }

  [[nodiscard]] const TaskStats& get(TaskId task) const {
    auto it = table_.find(task);
    return it == table_.end() ? empty() : it->second;
  }

  [[nodiscard]] const std::map<TaskId, TaskStats>& all() const { return table_; }

 private:
  TaskStats& at(TaskId task) {
    auto it = table_.find(task);
    if (it == table_.end()) it = table_.emplace(task, TaskStats(arms_)).first;
    return it->second;
  }
  const TaskStats& empty() const {
    if (!empty_) empty_ = TaskStats(arms_);
    return *empty_;
  }

  std::size_t arms_;
  std::map<TaskId, TaskStats> table_;
  mutable std::optional<TaskStats> empty_;
};

inline Vector sample_beta_posteriors(Rng& rng, const std::vector<BetaParams>& prior, const TaskStats& st) {
  Vector out(static_cast<Eigen::Index>(prior.size()));
  for (std::size_t a = 0; a < prior.size(); ++a) {
    const auto i = static_cast<Eigen::Index>(a);
    const BetaParams post = conjugate_update(prior[a], st.sums(i), st.counts(i) - st.sums(i));
    out(i) = random::beta_variate(rng, post.alpha1, post.alpha2);
  }
  return out;
}

inline std::vector<BetaParams> bblm_prior_from_features(const Matrix& phi, const Vector& theta, double psi) {
  const Vector eta = phi * theta;
  std::vector<BetaParams> out;
  for (Eigen::Index a = 0; a < eta.size(); ++a)
    out.push_back(beta_from_mean_precision(clamp_mean(logistic(eta(a))), psi));
  return out;
}

// Phi_i per task, built on first use.
class FeatureCache {
 public:
  FeatureCache(const FeatureMap& fm, const std::vector<Vector>& metadata) : fm_(&fm), metadata_(&metadata) {}

  const Matrix& operator()(TaskId task) {
    auto it = cache_.find(task);
    if (it != cache_.end()) return it->second;
    if (task >= metadata_->size()) throw LookupError("unknown task id " + std::to_string(task));
    return cache_.emplace(task, build_task_feature_matrix(*fm_, (*metadata_)[task])).first->second;
  }

 private:
  const FeatureMap* fm_;
  const std::vector<Vector>* metadata_;
  std::map<TaskId, Matrix> cache_;
};

}  // namespace detail

// Thompson sampling from the exact LMM posterior p(r_i | H) at every decision.
class MttsAgent final : public Agent {
 public:
  explicit MttsAgent(const AgentSetup& s)
      : Agent(PolicyKind::Mtts, s),
        cfg_(require_model(s)),
        ws_(cfg_, *s.feature_map, lookup_table(*s.metadata)),
        phi_(*s.feature_map, *s.metadata) {
    if (s.reward != RewardKind::Gaussian) throw ConfigError("MttsAgent: exact posterior needs Gaussian rewards");
  }

  Arm act(TaskId task) override {
    const GaussianBelief b = ws_.belief_from_features(task, phi_(task));
    return choose(task, sample_belief(b, rng()));
  }

  [[nodiscard]] const KernelWorkspace& workspace() const { return ws_; }

 private:
  static const HierarchyConfig& require_model(const AgentSetup& s) {
    if (!s.model) throw ConfigError("MTTS requires a HierarchyConfig");
    return *s.model;
  }
  void absorb(const InteractionRecord& rec) override { ws_.add(rec); }

  HierarchyConfig cfg_;
  KernelWorkspace ws_;
  detail::FeatureCache phi_;
};

// Samples theta~ from p(theta | H) once at least l new records have arrived,
// and runs TS(f(r_i | x_i, theta~)) in between. Gaussian rewards use the
// closed-form theta posterior; Bernoulli rewards use the MCMC chain.
class BatchedMttsAgent final : public Agent {
 public:
  explicit BatchedMttsAgent(const AgentSetup& s)
      : Agent(PolicyKind::MttsBatched, s),
        reward_(s.reward),
        cfg_(require_model(s)),
        fm_(s.feature_map),
        metadata_(s.metadata),
        ws_(cfg_, *s.feature_map, lookup_table(*s.metadata)),
        stats_(s.feature_map->arms()),
        phi_(*s.feature_map, *s.metadata),
        refresh_(s.refresh_interval == 0 ? 1 : s.refresh_interval),
        mcmc_(s.mcmc) {}

  Arm act(TaskId task) override {
    if (!theta_ || (refresh_ != kNeverRefresh && staleness_ >= refresh_)) refresh();
    const Matrix& phi = phi_(task);
    if (reward_ == RewardKind::Gaussian) {
      const GaussianBelief b =
          gaussian_task_posterior(phi * *theta_, cfg_.sigma_delta(), cfg_.noise_variance(), stats_.get(task));
      return choose(task, sample_belief(b, rng()));
    }
    const auto prior = detail::bblm_prior_from_features(phi, *theta_, cfg_.psi());
    return choose(task, detail::sample_beta_posteriors(rng(), prior, stats_.get(task)));
  }

  [[nodiscard]] const std::optional<Vector>& theta_cache() const { return theta_; }
  [[nodiscard]] std::size_t staleness() const { return staleness_; }
  [[nodiscard]] std::size_t refresh_count() const { return refreshes_; }
  [[nodiscard]] const std::optional<ThetaChain>& last_chain() const { return chain_; }

 private:
  static const HierarchyConfig& require_model(const AgentSetup& s) {
    if (!s.model) throw ConfigError("MTTS requires a HierarchyConfig");
    return *s.model;
  }

  void refresh() {
    if (reward_ == RewardKind::Gaussian) {
      theta_ = sample_theta(ws_.theta_posterior(), rng());
    } else if (history().empty()) {
      const Vector z = random::standard_normal_vector(rng(), static_cast<Eigen::Index>(cfg_.dim()));
      theta_ = cfg_.mu_theta() + cfg_.sigma_theta_cholesky().lower() * z;
    } else {
      McmcOptions opt = mcmc_;
      if (chain_) {
        opt.initial_theta = chain_->samples.back();
        opt.initial_step = chain_->step_scale;
      }
      chain_ = sample_theta_mcmc(cfg_, *fm_, history(), lookup_table(*metadata_), rng(), opt);
      theta_ = chain_->samples.back();
    }
    staleness_ = 0;
    ++refreshes_;
  }

  void absorb(const InteractionRecord& rec) override {
    if (reward_ == RewardKind::Gaussian) ws_.add(rec);
    stats_.add(rec.task_id, rec.action, rec.reward);
    ++staleness_;
  }

  RewardKind reward_;
  HierarchyConfig cfg_;
  const FeatureMap* fm_;
  const std::vector<Vector>* metadata_;
  KernelWorkspace ws_;
  detail::StatsTable stats_;
  detail::FeatureCache phi_;
  std::size_t refresh_;
  McmcOptions mcmc_;
  std::optional<Vector> theta_;
  std::optional<ThetaChain> chain_;
  std::size_t staleness_ = 0;
  std::size_t refreshes_ = 0;
};

// Round-robin over the K arms for a task's first K rounds, then single-task TS
// with a prior fixed at the end of that alignment period. For MTTS the prior
// is N(Phi_i theta_e, Sigma) with theta_e drawn from p(theta | alignment data
// of all tasks so far); for the oracle it is the true conditional prior.
class AlignedAgent final : public Agent {
 public:
  AlignedAgent(PolicyKind kind, const AgentSetup& s)
      : Agent(kind, s),
        cfg_(require_model(s)),
        alignment_ws_(cfg_, *s.feature_map, lookup_table(*s.metadata)),
        stats_(s.feature_map->arms()),
        phi_(*s.feature_map, *s.metadata),
        oracle_means_(s.oracle_means) {
    if (s.reward != RewardKind::Gaussian) throw ConfigError("alignment-period policies need Gaussian rewards");
    if (kind == PolicyKind::OracleTsModified && !oracle_means_) throw ConfigError("oracle policy needs oracle means");
    if (kind != PolicyKind::MttsModified && kind != PolicyKind::OracleTsModified)
      throw ConfigError("AlignedAgent: unsupported policy");
  }

  Arm act(TaskId task) override {
    const std::size_t round = static_cast<std::size_t>(stats_.get(task).total()) + 1;
    if (round <= arms()) {
      Vector forced = Vector::Zero(static_cast<Eigen::Index>(arms()));
      forced(static_cast<Eigen::Index>(round - 1)) = 1.0;
      return choose(task, forced);
    }
    auto it = prior_mean_.find(task);
    if (it == prior_mean_.end()) {
      Vector m;
      if (kind() == PolicyKind::MttsModified) {
        const Vector theta_e = sample_theta(alignment_ws_.theta_posterior(), rng());
        theta_draws_[task] = theta_e;
        m = phi_(task) * theta_e;
      } else {
        m = (*oracle_means_)[task];
      }
      it = prior_mean_.emplace(task, std::move(m)).first;
    }
    const GaussianBelief b = gaussian_task_posterior(it->second, cfg_.sigma_delta(), cfg_.noise_variance(), stats_.get(task));
    return choose(task, sample_belief(b, rng()));
  }

  // Records that entered the alignment-period posterior.
  [[nodiscard]] std::size_t alignment_records() const { return alignment_ws_.size(); }
  [[nodiscard]] const std::map<TaskId, Vector>& theta_draws() const { return theta_draws_; }
  [[nodiscard]] std::size_t alignment_progress(TaskId task) const {
    return std::min<std::size_t>(static_cast<std::size_t>(stats_.get(task).total()), arms());
  }

 private:
  static const HierarchyConfig& require_model(const AgentSetup& s) {
    if (!s.model) throw ConfigError("alignment-period policies require a HierarchyConfig");
    return *s.model;
  }

  void absorb(const InteractionRecord& rec) override {
    const std::size_t done = static_cast<std::size_t>(stats_.get(rec.task_id).total());
    if (done < arms()) alignment_ws_.add(rec);
    stats_.add(rec.task_id, rec.action, rec.reward);
  }

  HierarchyConfig cfg_;
  KernelWorkspace alignment_ws_;
  detail::StatsTable stats_;
  detail::FeatureCache phi_;
  const std::vector<Vector>* oracle_means_;
  std::map<TaskId, Vector> prior_mean_;
  std::map<TaskId, Vector> theta_draws_;
};

// Single-task TS with the true conditional prior p(r_i | x_i); reads H_i only.
class OracleTsAgent final : public Agent {
 public:
  explicit OracleTsAgent(const AgentSetup& s)
      : Agent(PolicyKind::OracleTs, s), reward_(s.reward), means_(s.oracle_means), stats_(s.feature_map->arms()) {
    if (!means_) throw ConfigError("oracle-TS needs the true conditional means");
    if (s.reward == RewardKind::Gaussian) {
      if (!s.model) throw ConfigError("oracle-TS needs Sigma and sigma");
      sigma_delta_ = s.model->sigma_delta();
      noise_var_ = s.model->noise_variance();
    } else {
      if (!s.model) throw ConfigError("oracle-TS needs psi");
      psi_ = s.model->psi();
    }
  }

  Arm act(TaskId task) override {
    if (task >= means_->size()) throw LookupError("unknown task id " + std::to_string(task));
    const Vector& m = (*means_)[task];
    if (reward_ == RewardKind::Gaussian) {
      const GaussianBelief b = gaussian_task_posterior(m, sigma_delta_, noise_var_, stats_.get(task));
      return choose(task, sample_belief(b, rng()));
    }
    std::vector<BetaParams> prior;
    for (Eigen::Index a = 0; a < m.size(); ++a) prior.push_back(beta_from_mean_precision(clamp_mean(m(a)), psi_));
    return choose(task, detail::sample_beta_posteriors(rng(), prior, stats_.get(task)));
  }

 private:
  void absorb(const InteractionRecord& rec) override { stats_.add(rec.task_id, rec.action, rec.reward); }

  RewardKind reward_;
  const std::vector<Vector>* means_;
  detail::StatsTable stats_;
  Matrix sigma_delta_;
  double noise_var_ = 1.0;
  double psi_ = 1.0;
};

// OSFA pools every record into one belief; individual-TS keeps one per task.
// Both start from the marginal prior p(r).
class IndependentArmsAgent final : public Agent {
 public:
  IndependentArmsAgent(PolicyKind kind, const AgentSetup& s)
      : Agent(kind, s), reward_(s.reward), priors_(s.priors), stats_(s.feature_map->arms()) {
    if (kind != PolicyKind::Osfa && kind != PolicyKind::IndividualTs) throw ConfigError("IndependentArmsAgent: bad policy");
    if (reward_ == RewardKind::Gaussian) {
      if (!s.model) throw ConfigError("TS baselines need the reward noise sigma");
      noise_var_ = s.model->noise_variance();
      if (priors_.marginal_gaussian.mean.size() != static_cast<Eigen::Index>(arms()))
        throw ConfigError("TS baselines need a marginal Gaussian prior");
    } else if (priors_.marginal_beta.size() != arms()) {
      throw ConfigError("TS baselines need a marginal Beta prior");
    }
  }

  Arm act(TaskId task) override {
    const TaskStats& st = stats_.get(key(task));
    if (reward_ == RewardKind::Gaussian) {
      const GaussianBelief b =
          gaussian_task_posterior(priors_.marginal_gaussian.mean, priors_.marginal_gaussian.cov, noise_var_, st);
      return choose(task, sample_belief(b, rng()));
    }
    return choose(task, detail::sample_beta_posteriors(rng(), priors_.marginal_beta, st));
  }

 private:
  [[nodiscard]] TaskId key(TaskId task) const { return kind() == PolicyKind::Osfa ? 0 : task; }
  void absorb(const InteractionRecord& rec) override { stats_.add(key(rec.task_id), rec.action, rec.reward); }

  RewardKind reward_;
  DerivedPriors priors_;
  detail::StatsTable stats_;
  double noise_var_ = 1.0;
};

// r_i = Phi_i theta with no random effect: Bayesian linear regression with
// noise variance sigma1^2 + sigma^2, acting on Phi_i theta~.
class LinearTsAgent final : public Agent {
 public:
  explicit LinearTsAgent(const AgentSetup& s)
      : Agent(PolicyKind::LinearTs, s), phi_(*s.feature_map, *s.metadata) {
    if (s.reward != RewardKind::Gaussian) throw ConfigError("linear-TS is implemented for Gaussian rewards only");
    if (!s.model) throw ConfigError("linear-TS needs the theta prior");
    if (!(s.priors.linear_ts_noise > 0.0)) throw ConfigError("linear-TS needs a positive noise variance");
    noise_var_ = s.priors.linear_ts_noise;
    precision_ = s.model->sigma_theta_inverse();
    rhs_ = s.model->sigma_theta_inverse() * s.model->mu_theta();
  }

  Arm act(TaskId task) override {
    if (!posterior_) {
      const linalg::JitteredCholesky chol(precision_, "linear-TS precision");
      const Matrix cov = linalg::symmetrize(chol.inverse());
      posterior_ = ThetaPosterior(cov * rhs_, cov);
    }
    const Vector theta = sample_theta(*posterior_, rng());
    return choose(task, phi_(task) * theta);
  }

 private:
  void absorb(const InteractionRecord& rec) override {
    const Vector f = phi_(rec.task_id).row(static_cast<Eigen::Index>(rec.action)).transpose();
    precision_.noalias() += f * f.transpose() / noise_var_;
    rhs_ += f * (rec.reward / noise_var_);
    posterior_.reset();
  }

  detail::FeatureCache phi_;
  double noise_var_ = 1.0;
  Matrix precision_;
  Vector rhs_;
  std::optional<ThetaPosterior> posterior_;
};

// meta-TS: r_i ~ N(mu_m, sigma_m^2 I) with unknown mu_m (Gaussian), or a
// categorical posterior over candidate Beta priors (Bernoulli). The
// population-level draw is refreshed every l records; in between each task
// runs single-task TS from that draw with its own history.
class MetaTsAgent final : public Agent {
 public:
  explicit MetaTsAgent(const AgentSetup& s)
      : Agent(PolicyKind::MetaTs, s),
        reward_(s.reward),
        priors_(s.priors),
        stats_(s.feature_map->arms()),
        refresh_(s.refresh_interval == 0 ? 1 : s.refresh_interval) {
    if (reward_ == RewardKind::Gaussian) {
      if (!s.model) throw ConfigError("meta-TS needs sigma and sigma1");
      noise_var_ = s.model->noise_variance();
      sigma1_sq_ = s.model->sigma_delta().diagonal().mean();
      if (!(priors_.conditional_variance >= 0.0) || !(priors_.meta_hyper_variance > 0.0))
        throw ConfigError("meta-TS needs sigma_m^2 and a hyper-prior variance");
    } else if (priors_.bernoulli_candidates.empty()) {
      throw ConfigError("meta-TS needs candidate Beta priors");
    }
  }

  Arm act(TaskId task) override {
    if (!drawn_ || (refresh_ != kNeverRefresh && staleness_ >= refresh_)) refresh();
    const TaskStats& st = stats_.get(task);
    if (reward_ == RewardKind::Gaussian) {
      const auto k = static_cast<Eigen::Index>(arms());
      const GaussianBelief b = gaussian_task_posterior(
          mu_tilde_, priors_.conditional_variance * Matrix::Identity(k, k), noise_var_, st);
      return choose(task, sample_belief(b, rng()));
    }
    return choose(task, detail::sample_beta_posteriors(rng(), priors_.bernoulli_candidates[candidate_], st));
  }

  // Posterior of mu_{m,a}: precision sum_i sigma_{i,a}^{-2} + 1/v and mean
  // (sum_i Rbar_{i,a} / sigma_{i,a}^2) / precision, sigma_{i,a}^2 = sigma1^2 + sigma^2 / n_{i,a}.
  // Tasks that never pulled arm a contribute nothing.
  [[nodiscard]] GaussianBelief mu_posterior() const {
    const auto k = static_cast<Eigen::Index>(arms());
    Vector prec = Vector::Constant(k, 1.0 / priors_.meta_hyper_variance);
    Vector num = Vector::Zero(k);
    for (const auto& [task, st] : stats_.all()) {
      for (Eigen::Index a = 0; a < k; ++a) {
        const double n = st.counts(a);
        if (n == 0.0) continue;
        const double var = sigma1_sq_ + noise_var_ / n;
        prec(a) += 1.0 / var;
        num(a) += (st.sums(a) / n) / var;
      }
    }
    return {num.cwiseQuotient(prec), Matrix(prec.cwiseInverse().asDiagonal())};
  }

  // Normalized categorical weights over the Bernoulli candidates.
  [[nodiscard]] std::vector<double> candidate_posterior() const {
    const auto& cands = priors_.bernoulli_candidates;
    std::vector<double> logw(cands.size());
    for (std::size_t c = 0; c < cands.size(); ++c) {
      double lw = std::log(priors_.candidate_weights.empty() ? 1.0 : priors_.candidate_weights[c]);
      for (const auto& [task, st] : stats_.all()) {
        for (std::size_t a = 0; a < cands[c].size(); ++a) {
          const auto i = static_cast<Eigen::Index>(a);
          const double s = st.sums(i);
          const double f = st.counts(i) - s;
          if (s + f == 0.0) continue;
          const auto& p = cands[c][a];
          lw += log_beta_function(p.alpha1 + s, p.alpha2 + f) - log_beta_function(p.alpha1, p.alpha2);
        }
      }
      logw[c] = lw;
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (auto& w : logw) total += (w = std::exp(w - mx));
    for (auto& w : logw) w /= total;
    return logw;
  }

  [[nodiscard]] const Vector& mu_draw() const { return mu_tilde_; }

 private:
  void refresh() {
    if (reward_ == RewardKind::Gaussian) {
      mu_tilde_ = sample_belief(mu_posterior(), rng());
    } else {
      const auto w = candidate_posterior();
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      candidate_ = pick(rng());
    }
    drawn_ = true;
    staleness_ = 0;
  }

  void absorb(const InteractionRecord& rec) override {
    stats_.add(rec.task_id, rec.action, rec.reward);
    ++staleness_;
  }

  RewardKind reward_;
  DerivedPriors priors_;
  detail::StatsTable stats_;
  std::size_t refresh_;
  double noise_var_ = 1.0;
  double sigma1_sq_ = 0.0;
  bool drawn_ = false;
  std::size_t staleness_ = 0;
  Vector mu_tilde_;
  std::size_t candidate_ = 0;
};

inline std::unique_ptr<Agent> make_agent(PolicyKind kind, const AgentSetup& setup) {
  switch (kind) {
    case PolicyKind::Mtts:
      if (setup.reward == RewardKind::Bernoulli) return std::make_unique<BatchedMttsAgent>(setup);
      return std::make_unique<MttsAgent>(setup);
    case PolicyKind::MttsBatched: return std::make_unique<BatchedMttsAgent>(setup);
    case PolicyKind::MttsModified:
    case PolicyKind::OracleTsModified: return std::make_unique<AlignedAgent>(kind, setup);
    case PolicyKind::OracleTs: return std::make_unique<OracleTsAgent>(setup);
    case PolicyKind::Osfa:
    case PolicyKind::IndividualTs: return std::make_unique<IndependentArmsAgent>(kind, setup);
    case PolicyKind::LinearTs: return std::make_unique<LinearTsAgent>(setup);
    case PolicyKind::MetaTs: return std::make_unique<MetaTsAgent>(setup);
  }
  throw ConfigError("make_agent: unknown policy");
}

}  // namespace mtts
