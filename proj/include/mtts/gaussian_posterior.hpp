#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/LU>

#include "mtts/core_model.hpp"
#include "mtts/linalg.hpp"
#include "mtts/random.hpp"

namespace mtts {

// Multivariate normal over a task's arm means. The covariance is symmetrized
// and tiny negative eigenvalues are clamped on construction.
struct GaussianBelief {
  Vector mean;
  Matrix cov;

  GaussianBelief() = default;
  GaussianBelief(Vector m, const Matrix& c) : mean(std::move(m)), cov(linalg::clamp_psd(c)) {
    if (cov.rows() != mean.size()) throw ConfigError("GaussianBelief: dimension mismatch");
  }
};

// Posterior of the fixed-effect coefficients.
struct ThetaPosterior {
  Vector mean;
  Matrix cov;

  ThetaPosterior() = default;
  ThetaPosterior(Vector m, const Matrix& c) : mean(std::move(m)), cov(linalg::clamp_psd(c)) {
    if (cov.rows() != mean.size()) throw ConfigError("ThetaPosterior: dimension mismatch");
  }
};

// Per-arm counts, reward sums and sums of squares of one task.
struct TaskStats {
  Vector counts;
  Vector sums;
  Vector sum_squares;

  explicit TaskStats(std::size_t arms = 0)
      : counts(Vector::Zero(static_cast<Eigen::Index>(arms))),
        sums(Vector::Zero(static_cast<Eigen::Index>(arms))),
        sum_squares(Vector::Zero(static_cast<Eigen::Index>(arms))) {}

  void add(Arm a, double reward) {
    const auto i = static_cast<Eigen::Index>(a);
    counts(i) += 1.0;
    sums(i) += reward;
    sum_squares(i) += reward * reward;
  }

  [[nodiscard]] double total() const { return counts.sum(); }
};

inline TaskStats collect_task_stats(const History& h, std::size_t arms) {
  TaskStats st(arms);
  for (const auto& r : h.records()) {
    if (r.action >= arms) throw ConfigError("history action out of range");
    st.add(r.action, r.reward);
  }
  return st;
}

inline TaskStats collect_task_stats(const History& h, TaskId task, std::size_t arms) {
  TaskStats st(arms);
  for (std::size_t j : h.task_indices(task)) {
    const auto& r = h[j];
    if (r.action >= arms) throw ConfigError("history action out of range");
    st.add(r.action, r.reward);
  }
  return st;
}

namespace detail {

// G = D^T (sigma^2 I + D Sigma D^T)^{-1} D = (sigma^2 I + N Sigma)^{-1} N, the
// push-through form that needs no inverse of Sigma.
inline Matrix selection_gram(const Matrix& sigma_delta, double noise_var, const Vector& counts) {
  Matrix a = counts.asDiagonal() * sigma_delta;
  a.diagonal().array() += noise_var;
  Eigen::PartialPivLU<Matrix> lu(a);
  return linalg::symmetrize(lu.solve(Matrix(counts.asDiagonal())));
}

inline Vector selection_apply(const Matrix& sigma_delta, double noise_var, const Vector& counts,
                              const Vector& rhs) {
  Matrix a = counts.asDiagonal() * sigma_delta;
  a.diagonal().array() += noise_var;
  return Eigen::PartialPivLU<Matrix>(a).solve(rhs);
}

}  // namespace detail

// Normal-normal update of r_i ~ N(prior_mean, Sigma) with the task's own
// rewards, written without Sigma^{-1} so singular Sigma is allowed.
inline GaussianBelief gaussian_task_posterior(const Vector& prior_mean, const Matrix& sigma_delta,
                                              double noise_var, const TaskStats& stats) {
  if (stats.total() == 0.0) return {prior_mean, sigma_delta};
  const Vector resid = stats.sums - stats.counts.cwiseProduct(prior_mean);
  const Vector mean = prior_mean + sigma_delta * detail::selection_apply(sigma_delta, noise_var, stats.counts, resid);
  const Matrix g = detail::selection_gram(sigma_delta, noise_var, stats.counts);
  return {mean, sigma_delta - sigma_delta * g * sigma_delta};
}

// Prior N(Phi_i theta, Sigma) for task i updated with H_i alone.
inline GaussianBelief conditional_r_given_theta(const HierarchyConfig& cfg, const FeatureMap& fm,
                                                const History& h_i, const Vector& theta_sample,
                                                const Vector& target_x) {
  if (static_cast<std::size_t>(theta_sample.size()) != fm.dim())
    throw ConfigError("conditional_r_given_theta: theta length != d");
  if (!h_i.empty()) {
    const TaskId t = h_i[0].task_id;
    for (const auto& r : h_i.records())
      if (r.task_id != t) throw ConfigError("conditional_r_given_theta: history spans several tasks");
  }
  const Matrix phi_i = build_task_feature_matrix(fm, target_x);
  return gaussian_task_posterior(phi_i * theta_sample, cfg.sigma_delta(), cfg.noise_variance(),
                                 collect_task_stats(h_i, fm.arms()));
}

// Draws N(mean, cov). Always consumes exactly K standard normals.
inline Vector sample_belief(const GaussianBelief& b, Rng& rng) {
  const Vector z = random::standard_normal_vector(rng, b.mean.size());
  return b.mean + linalg::covariance_factor(b.cov) * z;
}

inline Vector sample_theta(const ThetaPosterior& p, Rng& rng) {
  const Vector z = random::standard_normal_vector(rng, p.mean.size());
  return p.mean + linalg::covariance_factor(p.cov) * z;
}

// ---------------------------------------------------------------------------
// Dense kernel path.

// n x n kernel: phi_l^T Sigma_theta phi_m + Sigma_{A_l, A_m} 1(i(l) = i(m)).
inline Matrix build_kernel_matrix(const HierarchyConfig& cfg, const Matrix& features, const History& h) {
  const auto n = static_cast<Eigen::Index>(h.size());
  Matrix k = features * cfg.sigma_theta() * features.transpose();
  const Matrix& s = cfg.sigma_delta();
  for (Eigen::Index l = 0; l < n; ++l) {
    for (Eigen::Index m = 0; m < n; ++m) {
      const auto& rl = h[static_cast<std::size_t>(l)];
      const auto& rm = h[static_cast<std::size_t>(m)];
      if (rl.task_id == rm.task_id)
        k(l, m) += s(static_cast<Eigen::Index>(rl.action), static_cast<Eigen::Index>(rm.action));
    }
  }
  return linalg::symmetrize(k);
}

// K x n cross matrix M_i: entry (a, j) = 1(i(j) = i) Sigma_{A_j, a}.
inline Matrix build_cross_matrix(const HierarchyConfig& cfg, const History& h, TaskId task) {
  const auto k = static_cast<Eigen::Index>(cfg.arms());
  Matrix m = Matrix::Zero(k, static_cast<Eigen::Index>(h.size()));
  for (std::size_t j : h.task_indices(task)) {
    m.col(static_cast<Eigen::Index>(j)) = cfg.sigma_delta().row(static_cast<Eigen::Index>(h[j].action)).transpose();
  }
  return m;
}

inline void check_dims(const HierarchyConfig& cfg, const FeatureMap& fm) {
  if (cfg.dim() != fm.dim() || cfg.arms() != fm.arms())
    throw ConfigError("HierarchyConfig and FeatureMap disagree on K or d");
}

// E(r_i | H) and cov(r_i | H) through one dense solve with (K + sigma^2 I_n).
inline GaussianBelief posterior_r_naive(const HierarchyConfig& cfg, const FeatureMap& fm, const History& h,
                                        const MetadataLookup& metadata, TaskId target_task,
                                        const Vector& target_x) {
  check_dims(cfg, fm);
  const Matrix phi_i = build_task_feature_matrix(fm, target_x);
  const Vector prior_mean = phi_i * cfg.mu_theta();
  const Matrix prior_cov = phi_i * cfg.sigma_theta() * phi_i.transpose() + cfg.sigma_delta();
  if (h.empty()) return {prior_mean, prior_cov};

  const auto stacked = stack_history_features(fm, h, metadata);
  Matrix gram = build_kernel_matrix(cfg, stacked.features, h);
  gram.diagonal().array() += cfg.noise_variance();
  const linalg::JitteredCholesky chol(gram, "K + sigma^2 I");

  const Matrix cross = phi_i * cfg.sigma_theta() * stacked.features.transpose() +
                       build_cross_matrix(cfg, h, target_task);
  const Vector resid = stacked.rewards - stacked.features * cfg.mu_theta();
  const Vector mean = prior_mean + cross * chol.solve(resid);
  const Matrix cov = prior_cov - cross * chol.solve(Matrix(cross.transpose()));
  return {mean, cov};
}

// ---------------------------------------------------------------------------
// Blocked (Woodbury) path.

// (sigma^2 I + sigma1^2 1 1^T)^{-1} for one (task, arm) block of size n,
// by the rank-one Woodbury identity.
inline Matrix rank_one_block_inverse(double noise_var, double sigma1_sq, std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  Matrix out = Matrix::Identity(m, m) / noise_var;
  if (sigma1_sq > 0.0) {
    const double c = 1.0 / (1.0 / sigma1_sq + static_cast<double>(n) / noise_var);
    out.array() -= c / (noise_var * noise_var);
  }
  return out;
}

// 1^T (sigma^2 I + sigma1^2 1 1^T)^{-1} 1 = n / (sigma^2 + n sigma1^2).
inline double rank_one_block_weight(double noise_var, double sigma1_sq, double n) {
  return n / (noise_var + n * sigma1_sq);
}

// The intermediates of the blocked posterior for one target task.
struct WoodburyTerms {
  Matrix sigma_in;   // (Sigma_theta^{-1} + Phi^T B Phi)^{-1}
  Vector j_phi_r;    // Phi^T B R~
  Matrix j_phi_phi;  // Phi^T B Phi
  Matrix j_phi_m;    // M_i B Phi          (K x d)
  Vector j_r_m;      // M_i B R~           (K)
  Matrix j_m;        // M_i B M_i^T        (K x K)
};

// Block-level state of the LMM posterior: B = (J + sigma^2 I)^{-1} is block
// diagonal with one block per task, and every quantity the posterior needs is
// a sum of per-task terms computed from that task's per-arm counts and sums.
// Records are absorbed incrementally. With diagonal Sigma each record touches
// a single (task, arm) rank-one block; otherwise the task block is recomputed.
class KernelWorkspace {
 public:
  KernelWorkspace(const HierarchyConfig& cfg, const FeatureMap& fm, MetadataLookup metadata)
      : cfg_(&cfg), fm_(&fm), metadata_(std::move(metadata)), diagonal_(cfg.sigma_delta_is_diagonal()) {
    check_dims(cfg, fm);
    const auto d = static_cast<Eigen::Index>(fm.dim());
    j_phi_phi_ = Matrix::Zero(d, d);
    j_phi_r_ = Vector::Zero(d);
    phi_v_r_ = Vector::Zero(d);
  }

  KernelWorkspace(const HierarchyConfig& cfg, const FeatureMap& fm, MetadataLookup metadata, const History& h)
      : KernelWorkspace(cfg, fm, std::move(metadata)) {
    for (const auto& r : h.records()) add(r);
  }

  void add(const InteractionRecord& rec) {
    if (rec.action >= fm_->arms()) throw ConfigError("KernelWorkspace: action out of range");
    auto& blk = block(rec.task_id);
    const auto a = static_cast<Eigen::Index>(rec.action);
    if (diagonal_) {
      const double var_a = cfg_->sigma_delta()(a, a);
      const double nv = cfg_->noise_variance();
      const Vector phi = blk.phi.row(a).transpose();
      const double old_w = blk.gram(a, a);
      const double old_g = blk.g_resid(a);
      const double old_graw = blk.g_raw(a);
      blk.stats.add(rec.action, rec.reward);
      const double n = blk.stats.counts(a);
      const double denom = nv + n * var_a;
      const double w = rank_one_block_weight(nv, var_a, n);
      const double g = (blk.stats.sums(a) - n * blk.prior_mean(a)) / denom;
      const double graw = blk.stats.sums(a) / denom;
      blk.gram(a, a) = w;
      blk.g_resid(a) = g;
      blk.g_raw(a) = graw;
      j_phi_phi_.noalias() += (w - old_w) * phi * phi.transpose();
      j_phi_r_ += (g - old_g) * phi;
      phi_v_r_ += (graw - old_graw) * phi;
    } else {
      j_phi_phi_ -= blk.phi.transpose() * blk.gram * blk.phi;
      j_phi_r_ -= blk.phi.transpose() * blk.g_resid;
      phi_v_r_ -= blk.phi.transpose() * blk.g_raw;
      blk.stats.add(rec.action, rec.reward);
      recompute_block(blk);
      j_phi_phi_ += blk.phi.transpose() * blk.gram * blk.phi;
      j_phi_r_ += blk.phi.transpose() * blk.g_resid;
      phi_v_r_ += blk.phi.transpose() * blk.g_raw;
    }
    j_phi_phi_ = linalg::symmetrize(j_phi_phi_);
    ++records_;
    sigma_in_.reset();
  }

  [[nodiscard]] std::size_t size() const { return records_; }

  // Sigma_in = (Sigma_theta^{-1} + Phi^T V^{-1} Phi)^{-1}; also the theta posterior covariance.
  [[nodiscard]] const Matrix& sigma_in() const {
    if (!sigma_in_) {
      if (records_ == 0) {
        sigma_in_ = cfg_->sigma_theta();
      } else {
        Matrix prec = cfg_->sigma_theta_inverse() + j_phi_phi_;
        sigma_in_ = linalg::symmetrize(linalg::JitteredCholesky(prec, "Sigma_in").inverse());
      }
    }
    return *sigma_in_;
  }

  [[nodiscard]] WoodburyTerms terms(TaskId target_task, const Matrix& phi_i) const {
    WoodburyTerms t;
    t.sigma_in = sigma_in();
    t.j_phi_r = j_phi_r_;
    t.j_phi_phi = j_phi_phi_;
    const auto k = phi_i.rows();
    const auto d = phi_i.cols();
    const Matrix& s = cfg_->sigma_delta();
    auto it = blocks_.find(target_task);
    if (it == blocks_.end() || it->second.stats.total() == 0.0) {
      t.j_phi_m = Matrix::Zero(k, d);
      t.j_r_m = Vector::Zero(k);
      t.j_m = Matrix::Zero(k, k);
    } else {
      const auto& blk = it->second;
      t.j_phi_m = s * blk.gram * blk.phi;
      t.j_r_m = s * blk.g_resid;
      t.j_m = s * blk.gram * s;
    }
    return t;
  }

  [[nodiscard]] GaussianBelief belief(TaskId target_task, const Vector& target_x) const {
    const Matrix phi_i = build_task_feature_matrix(*fm_, target_x);
    return belief_from_features(target_task, phi_i);
  }

  [[nodiscard]] GaussianBelief belief_from_features(TaskId target_task, const Matrix& phi_i) const {
    const Matrix& sth = cfg_->sigma_theta();
    const Vector prior_mean = phi_i * cfg_->mu_theta();
    const Matrix prior_cov = phi_i * sth * phi_i.transpose() + cfg_->sigma_delta();
    if (records_ == 0) return {prior_mean, prior_cov};
    const WoodburyTerms t = terms(target_task, phi_i);
    const Matrix p = phi_i * sth;                     // Phi_i Sigma_theta
    const Matrix lhs = p * t.j_phi_phi + t.j_phi_m;   // Phi_i Sigma_theta J_PhiPhi + J_PhiM
    const Vector mean = prior_mean + p * t.j_phi_r + t.j_r_m - lhs * (t.sigma_in * t.j_phi_r);
    const Matrix pm = p * t.j_phi_m.transpose();
    const Matrix cov = prior_cov - t.j_m - p * t.j_phi_phi * p.transpose() - pm - pm.transpose() +
                       lhs * t.sigma_in * lhs.transpose();
    return {mean, cov};
  }

  [[nodiscard]] ThetaPosterior theta_posterior() const {
    if (records_ == 0) return {cfg_->mu_theta(), cfg_->sigma_theta()};
    const Matrix& cov = sigma_in();
    const Vector mean = cov * (phi_v_r_ + cfg_->sigma_theta_inverse() * cfg_->mu_theta());
    return {mean, cov};
  }

  // Per-task statistics of H_i (zeros for unseen tasks).
  [[nodiscard]] TaskStats task_stats(TaskId task) const {
    auto it = blocks_.find(task);
    return it == blocks_.end() ? TaskStats(fm_->arms()) : it->second.stats;
  }

  [[nodiscard]] const Matrix& j_phi_phi() const { return j_phi_phi_; }
  [[nodiscard]] const Vector& j_phi_r() const { return j_phi_r_; }
  [[nodiscard]] const Vector& phi_v_inv_r() const { return phi_v_r_; }

  // Quadratic form and log-determinant pieces of the marginal likelihood:
  //   R~^T (K + sigma^2 I)^{-1} R~ and log |K + sigma^2 I|.
  struct LikelihoodTerms {
    double quad = 0.0;
    double logdet = 0.0;
  };

  [[nodiscard]] LikelihoodTerms likelihood_terms() const {
    LikelihoodTerms out;
    const double nv = cfg_->noise_variance();
    const Matrix& s = cfg_->sigma_delta();
    const auto k = s.rows();
    for (const auto& [task, blk] : blocks_) {
      const Vector& n = blk.stats.counts;
      const Vector resid_sum = blk.stats.sums - n.cwiseProduct(blk.prior_mean);
      // |R~_i|^2 per arm: Q - 2 m S + n m^2
      double rr = 0.0;
      for (Eigen::Index a = 0; a < k; ++a) {
        const double m = blk.prior_mean(a);
        rr += blk.stats.sum_squares(a) - 2.0 * m * blk.stats.sums(a) + n(a) * m * m;
      }
      Matrix a_mat = n.asDiagonal() * s;
      a_mat.diagonal().array() += nv;
      Eigen::PartialPivLU<Matrix> lu(a_mat);
      // R~^T B R~ = sigma^-2 (|R~|^2 - s~^T (sigma^2 I + Sigma N)^{-1} Sigma s~)
      Matrix b_mat = s * n.asDiagonal();
      b_mat.diagonal().array() += nv;
      const Vector sol = Eigen::PartialPivLU<Matrix>(b_mat).solve(Vector(s * resid_sum));
      out.quad += (rr - resid_sum.dot(sol)) / nv;
      // |sigma^2 I + D Sigma D^T| = sigma^{2(n - K)} |sigma^2 I + N Sigma|
      out.logdet += (blk.stats.total() - static_cast<double>(k)) * std::log(nv) +
                    std::log(std::abs(lu.determinant()));
    }
    // Woodbury / determinant lemma on the fixed-effect part.
    Matrix prec = cfg_->sigma_theta_inverse() + j_phi_phi_;
    const linalg::JitteredCholesky chol(prec, "Sigma_in");
    out.quad -= j_phi_r_.dot(chol.solve(j_phi_r_));
    out.logdet += chol.log_determinant() + cfg_->sigma_theta_cholesky().log_determinant();
    return out;
  }

 private:
  struct Block {
    Matrix phi;         // Phi_i
    Vector prior_mean;  // Phi_i mu_theta
    TaskStats stats;
    Matrix gram;     // G_i = D_i^T B_i D_i
    Vector g_resid;  // D_i^T B_i R~_i
    Vector g_raw;    // D_i^T B_i R_i
  };

  Block& block(TaskId task) {
    auto it = blocks_.find(task);
    if (it != blocks_.end()) return it->second;
    const auto k = static_cast<Eigen::Index>(fm_->arms());
    Block b;
    b.phi = build_task_feature_matrix(*fm_, metadata_(task));
    b.prior_mean = b.phi * cfg_->mu_theta();
    b.stats = TaskStats(fm_->arms());
    b.gram = Matrix::Zero(k, k);
    b.g_resid = Vector::Zero(k);
    b.g_raw = Vector::Zero(k);
    return blocks_.emplace(task, std::move(b)).first->second;
  }

  void recompute_block(Block& b) const {
    const double nv = cfg_->noise_variance();
    const Matrix& s = cfg_->sigma_delta();
    const Vector& n = b.stats.counts;
    b.gram = detail::selection_gram(s, nv, n);
    b.g_resid = detail::selection_apply(s, nv, n, b.stats.sums - n.cwiseProduct(b.prior_mean));
    b.g_raw = detail::selection_apply(s, nv, n, b.stats.sums);
  }

  const HierarchyConfig* cfg_;
  const FeatureMap* fm_;
  MetadataLookup metadata_;
  bool diagonal_;
  std::map<TaskId, Block> blocks_;
  Matrix j_phi_phi_;
  Vector j_phi_r_;
  Vector phi_v_r_;
  std::size_t records_ = 0;
  mutable std::optional<Matrix> sigma_in_;
};

inline GaussianBelief posterior_r_woodbury(const HierarchyConfig& cfg, const FeatureMap& fm, const History& h,
                                           const MetadataLookup& metadata, TaskId target_task,
                                           const Vector& target_x) {
  const KernelWorkspace ws(cfg, fm, metadata, h);
  return ws.belief(target_task, target_x);
}

// theta | H ~ N(S (Phi^T V^{-1} R + Sigma_theta^{-1} mu_theta), S),
// S = (Phi^T V^{-1} Phi + Sigma_theta^{-1})^{-1}, V = sigma^2 I + J.
inline ThetaPosterior posterior_theta(const HierarchyConfig& cfg, const FeatureMap& fm, const History& h,
                                      const MetadataLookup& metadata) {
  const KernelWorkspace ws(cfg, fm, metadata, h);
  return ws.theta_posterior();
}

}  // namespace mtts
