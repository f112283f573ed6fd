#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtts/errors.hpp"
#include "mtts/linalg.hpp"

namespace mtts {

using TaskId = std::size_t;
using Arm = std::size_t;

// A bandit task: static metadata and the hidden mean-reward vector.
struct TaskInstance {
  TaskId id = 0;
  Vector metadata;
  Vector true_means;

  [[nodiscard]] std::size_t arms() const { return static_cast<std::size_t>(true_means.size()); }
};

// One decision and its outcome. Arms are 0-based; rounds count from 1.
struct InteractionRecord {
  TaskId task_id = 0;
  Arm action = 0;
  double reward = 0.0;
  std::size_t round = 1;
};

// Pooled interaction log with a per-task index (the H_i views).
class History {
 public:
  void append(const InteractionRecord& rec) {
    if (rec.round < 1) throw ConfigError("History: round_within_task must be >= 1");
    per_task_[rec.task_id].push_back(records_.size());
    records_.push_back(rec);
  }

  [[nodiscard]] std::size_t size() const { return records_.size(); }
  [[nodiscard]] bool empty() const { return records_.empty(); }
  [[nodiscard]] const std::vector<InteractionRecord>& records() const { return records_; }
  [[nodiscard]] const InteractionRecord& operator[](std::size_t j) const { return records_[j]; }

  // Record indices of one task, in append order. Empty for unseen tasks.
  [[nodiscard]] std::span<const std::size_t> task_indices(TaskId task) const {
    auto it = per_task_.find(task);
    if (it == per_task_.end()) return {};
    return it->second;
  }

  [[nodiscard]] const std::map<TaskId, std::vector<std::size_t>>& per_task_index() const {
    return per_task_;
  }

  // The H_i view as its own History.
  [[nodiscard]] History task_view(TaskId task) const {
    History out;
    for (std::size_t j : task_indices(task)) out.append(records_[j]);
    return out;
  }

  [[nodiscard]] History filtered(const std::function<bool(const InteractionRecord&)>& keep) const {
    History out;
    for (const auto& r : records_)
      if (keep(r)) out.append(r);
    return out;
  }

 private:
  std::vector<InteractionRecord> records_;
  std::map<TaskId, std::vector<std::size_t>> per_task_;
};

// phi(x, a): metadata-action pair to a d-dimensional feature vector.
//
// IndicatorPlusMetadata is (1_a, x_block(a)) where the metadata vector holds
// the K per-arm blocks of length d - K back to back, so p = K (d - K). The
// per-task noise draws of the generator live in x and are therefore fixed for
// the lifetime of the task.
class FeatureMap {
 public:
  enum class Kind { IndicatorPlusMetadata, Custom };
  using CustomFn = std::function<Vector(const Vector& x, Arm a)>;

  static FeatureMap indicator_plus_metadata(std::size_t arms, std::size_t dim) {
    if (arms == 0 || dim < arms) throw ConfigError("FeatureMap: need K >= 1 and d >= K");
    FeatureMap fm;
    fm.kind_ = Kind::IndicatorPlusMetadata;
    fm.arms_ = arms;
    fm.dim_ = dim;
    fm.metadata_dim_ = arms * (dim - arms);
    return fm;
  }

  static FeatureMap custom(std::size_t metadata_dim, std::size_t arms, std::size_t dim, CustomFn fn) {
    if (arms == 0 || dim == 0 || !fn) throw ConfigError("FeatureMap: invalid custom map");
    FeatureMap fm;
    fm.kind_ = Kind::Custom;
    fm.arms_ = arms;
    fm.dim_ = dim;
    fm.metadata_dim_ = metadata_dim;
    fm.custom_ = std::move(fn);
    return fm;
  }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] std::size_t arms() const { return arms_; }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::size_t metadata_dim() const { return metadata_dim_; }

  [[nodiscard]] Vector operator()(const Vector& x, Arm a) const {
    check_metadata(x);
    if (a >= arms_) throw ConfigError("FeatureMap: arm out of range");
    if (kind_ == Kind::Custom) {
      Vector out = custom_(x, a);
      if (static_cast<std::size_t>(out.size()) != dim_)
        throw ConfigError("FeatureMap: custom map returned wrong length");
      return out;
    }
    const auto tail = static_cast<Eigen::Index>(dim_ - arms_);
    Vector out = Vector::Zero(static_cast<Eigen::Index>(dim_));
    out(static_cast<Eigen::Index>(a)) = 1.0;
    if (tail > 0) out.tail(tail) = x.segment(static_cast<Eigen::Index>(a) * tail, tail);
    return out;
  }

  void check_metadata(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != metadata_dim_)
      throw ConfigError("FeatureMap: metadata length " + std::to_string(x.size()) +
                        " != p = " + std::to_string(metadata_dim_));
  }

 private:
  Kind kind_ = Kind::IndicatorPlusMetadata;
  std::size_t arms_ = 0;
  std::size_t dim_ = 0;
  std::size_t metadata_dim_ = 0;
  CustomFn custom_;
};

// Phi_i: K x d, row a = phi(x, a).
inline Matrix build_task_feature_matrix(const FeatureMap& fm, const Vector& x) {
  fm.check_metadata(x);
  const auto k = static_cast<Eigen::Index>(fm.arms());
  Matrix out(k, static_cast<Eigen::Index>(fm.dim()));
  for (Eigen::Index a = 0; a < k; ++a) out.row(a) = fm(x, static_cast<Arm>(a)).transpose();
  return out;
}

using MetadataLookup = std::function<const Vector&(TaskId)>;

// Lookup over a table indexed by task id.
inline MetadataLookup lookup_table(const std::vector<Vector>& table) {
  return [&table](TaskId id) -> const Vector& {
    if (id >= table.size()) throw LookupError("unknown task id " + std::to_string(id));
    return table[id];
  };
}

struct StackedFeatures {
  Matrix features;  // n x d, row j = phi(x_{i(j)}, A_j)
  Vector rewards;   // n
};

inline StackedFeatures stack_history_features(const FeatureMap& fm, const History& h,
                                              const MetadataLookup& metadata) {
  const auto n = static_cast<Eigen::Index>(h.size());
  StackedFeatures out{Matrix(n, static_cast<Eigen::Index>(fm.dim())), Vector(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& rec = h[static_cast<std::size_t>(j)];
    out.features.row(j) = fm(metadata(rec.task_id), rec.action).transpose();
    out.rewards(j) = rec.reward;
  }
  return out;
}

// Hyperparameters of the hierarchical model:
//   theta ~ N(mu_theta, Sigma_theta), r_i | x_i, theta ~ N(Phi_i theta, Sigma),
//   R = r_{i,A} + N(0, sigma^2)  (Gaussian)  or  Beta(logistic(phi^T theta), psi) (Bernoulli).
class HierarchyConfig {
 public:
  HierarchyConfig(Vector mu_theta, Matrix sigma_theta, Matrix sigma_delta, double sigma_noise,
                  double psi = 1.0)
      : mu_theta_(std::move(mu_theta)),
        sigma_theta_(std::move(sigma_theta)),
        sigma_delta_(std::move(sigma_delta)),
        sigma_noise_(sigma_noise),
        psi_(psi) {
    const auto d = mu_theta_.size();
    if (sigma_theta_.rows() != d || sigma_theta_.cols() != d)
      throw ConfigError("HierarchyConfig: Sigma_theta must be d x d");
    if (sigma_delta_.rows() != sigma_delta_.cols() || sigma_delta_.rows() == 0)
      throw ConfigError("HierarchyConfig: Sigma must be K x K");
    if (!linalg::is_symmetric_psd(sigma_theta_))
      throw ConfigError("HierarchyConfig: Sigma_theta is not symmetric PSD");
    if (!linalg::is_symmetric_psd(sigma_delta_))
      throw ConfigError("HierarchyConfig: Sigma is not symmetric PSD");
    if (!linalg::is_positive_definite(sigma_theta_))
      throw ConfigError("HierarchyConfig: Sigma_theta is singular");
    if (!(sigma_noise_ > 0.0)) throw ConfigError("HierarchyConfig: sigma must be > 0");
    if (!(psi_ > 0.0)) throw ConfigError("HierarchyConfig: psi must be > 0");
    sigma_theta_ = linalg::symmetrize(sigma_theta_);
    sigma_delta_ = linalg::symmetrize(sigma_delta_);
    sigma_theta_chol_.compute(sigma_theta_, "Sigma_theta");
    sigma_theta_inv_ = linalg::symmetrize(sigma_theta_chol_.inverse());
  }

  // Isotropic convenience: theta ~ N(0, v I_d), Sigma = sigma1_sq I_K.
  static HierarchyConfig isotropic(std::size_t d, std::size_t k, double theta_var, double sigma1_sq,
                                   double sigma, double psi = 1.0) {
    const auto dd = static_cast<Eigen::Index>(d);
    const auto kk = static_cast<Eigen::Index>(k);
    return HierarchyConfig(Vector::Zero(dd), theta_var * Matrix::Identity(dd, dd),
                           sigma1_sq * Matrix::Identity(kk, kk), sigma, psi);
  }

  [[nodiscard]] const Vector& mu_theta() const { return mu_theta_; }
  [[nodiscard]] const Matrix& sigma_theta() const { return sigma_theta_; }
  [[nodiscard]] const Matrix& sigma_theta_inverse() const { return sigma_theta_inv_; }
  [[nodiscard]] const linalg::JitteredCholesky& sigma_theta_cholesky() const { return sigma_theta_chol_; }
  [[nodiscard]] const Matrix& sigma_delta() const { return sigma_delta_; }
  [[nodiscard]] double sigma_noise() const { return sigma_noise_; }
  [[nodiscard]] double noise_variance() const { return sigma_noise_ * sigma_noise_; }
  [[nodiscard]] double psi() const { return psi_; }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(mu_theta_.size()); }
  [[nodiscard]] std::size_t arms() const { return static_cast<std::size_t>(sigma_delta_.rows()); }

  [[nodiscard]] bool sigma_delta_is_diagonal() const {
    return (sigma_delta_ - Matrix(sigma_delta_.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  }

  // Same model with different variance components (used by empirical Bayes).
  [[nodiscard]] HierarchyConfig with_variances(double sigma, const Matrix& sigma_delta) const {
    return HierarchyConfig(mu_theta_, sigma_theta_, sigma_delta, sigma, psi_);
  }

 private:
  Vector mu_theta_;
  Matrix sigma_theta_;
  Matrix sigma_delta_;
  double sigma_noise_;
  double psi_;
  linalg::JitteredCholesky sigma_theta_chol_;
  Matrix sigma_theta_inv_;
};

}  // namespace mtts
