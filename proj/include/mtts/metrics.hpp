#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mtts/core_model.hpp"
#include "mtts/errors.hpp"

namespace mtts {

// max_a r_{i,a} - r_{i,arm}
inline double instantaneous_regret(const TaskInstance& task, Arm arm) {
  if (arm >= task.arms()) throw ConfigError("instantaneous_regret: arm out of range");
  return task.true_means.maxCoeff() - task.true_means(static_cast<Eigen::Index>(arm));
}

struct LedgerEntry {
  std::string algorithm;
  std::uint64_t seed = 0;
  TaskId task_id = 0;
  std::size_t round = 0;  // 1-based within the task
  Arm arm = 0;
  double reward = 0.0;
  double inst_regret = 0.0;
};

class RegretLedger {
 public:
  void append(LedgerEntry e) { entries_.push_back(std::move(e)); }
  void append(const RegretLedger& other) { entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end()); }

  [[nodiscard]] const std::vector<LedgerEntry>& entries() const { return entries_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }

  [[nodiscard]] std::vector<std::string> algorithms() const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
      if (std::find(out.begin(), out.end(), e.algorithm) == out.end()) out.push_back(e.algorithm);
    return out;
  }

  [[nodiscard]] std::set<std::uint64_t> seeds(std::string_view algorithm) const {
    std::set<std::uint64_t> out;
    for (const auto& e : entries_)
      if (e.algorithm == algorithm) out.insert(e.seed);
    return out;
  }

  // Orders by (algorithm, seed, task, round); used for a canonical CSV.
  void sort() {
    std::stable_sort(entries_.begin(), entries_.end(), [](const LedgerEntry& a, const LedgerEntry& b) {
      return std::tie(a.algorithm, a.seed, a.task_id, a.round) < std::tie(b.algorithm, b.seed, b.task_id, b.round);
    });
  }

 private:
  std::vector<LedgerEntry> entries_;
};

enum class CurveView { PerRoundConcurrent, PerTaskSequential };

inline constexpr std::string_view to_string(CurveView v) {
  return v == CurveView::PerRoundConcurrent ? "per_round_concurrent" : "per_task_sequential";
}

struct CurvePoint {
  std::size_t index = 0;  // round (1-based) or task id
  double mean = 0.0;
  double se = 0.0;        // NaN with a single seed
};

using Curve = std::vector<CurvePoint>;

struct SampleSummary {
  double mean = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();
};

// Mean and standard error with the n-1 denominator.
inline SampleSummary summarize(const std::vector<double>& xs) {
  if (xs.empty()) throw ConfigError("summarize: no samples");
  SampleSummary s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double n = static_cast<double>(xs.size());
  s.mean = sum / n;
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

namespace detail {

// seed -> index -> per-seed statistic for one algorithm.
using SeedSeries = std::map<std::uint64_t, std::map<std::size_t, double>>;

inline SeedSeries per_seed_series(const RegretLedger& ledger, std::string_view algorithm, CurveView view) {
  std::map<std::uint64_t, std::map<std::size_t, std::pair<double, std::size_t>>> acc;
  for (const auto& e : ledger.entries()) {
    if (e.algorithm != algorithm) continue;
    const std::size_t idx = view == CurveView::PerRoundConcurrent ? e.round : e.task_id;
    auto& cell = acc[e.seed][idx];
    cell.first += e.inst_regret;
    ++cell.second;
  }
  if (acc.empty()) throw ConfigError("no ledger entries for algorithm '" + std::string(algorithm) + "'");
  SeedSeries out;
  for (const auto& [seed, series] : acc)
    for (const auto& [idx, cell] : series)
      out[seed][idx] = view == CurveView::PerRoundConcurrent ? cell.first / static_cast<double>(cell.second) : cell.first;
  return out;
}

inline Curve aggregate(const SeedSeries& series) {
  std::map<std::size_t, std::vector<double>> by_index;
  for (const auto& [seed, s] : series)
    for (const auto& [idx, v] : s) by_index[idx].push_back(v);
  Curve out;
  for (const auto& [idx, xs] : by_index) {
    const auto s = summarize(xs);
    out.push_back({idx, s.mean, s.se});
  }
  return out;
}

}  // namespace detail

// Per-round view: at round t, the mean over tasks of their round-t regret.
// Per-task view: each task's total regret. Both averaged over seeds.
inline Curve bayes_regret_curve(const RegretLedger& ledger, std::string_view algorithm, CurveView view) {
  return detail::aggregate(detail::per_seed_series(ledger, algorithm, view));
}

// Bayes-regret curve of `algorithm` minus that of `reference` on the same
// seeds; the SE comes from the per-seed paired differences.
inline Curve multi_task_regret_curve(const RegretLedger& ledger, std::string_view algorithm, CurveView view,
                                     std::string_view reference = "oracle_ts") {
  const auto a = detail::per_seed_series(ledger, algorithm, view);
  const auto b = detail::per_seed_series(ledger, reference, view);
  if (a.size() != b.size()) throw ConfigError("multi_task_regret_curve: unmatched seeds");
  detail::SeedSeries diff;
  for (const auto& [seed, sa] : a) {
    auto it = b.find(seed);
    if (it == b.end()) throw ConfigError("multi_task_regret_curve: seed " + std::to_string(seed) + " has no reference run");
    if (sa.size() != it->second.size()) throw ConfigError("multi_task_regret_curve: index sets differ");
    for (const auto& [idx, v] : sa) {
      auto jt = it->second.find(idx);
      if (jt == it->second.end()) throw ConfigError("multi_task_regret_curve: index sets differ");
      diff[seed][idx] = v - jt->second;
    }
  }
  return detail::aggregate(diff);
}

// Total regret per seed.
inline std::map<std::uint64_t, double> cumulative_regret_by_seed(const RegretLedger& ledger, std::string_view algorithm) {
  std::map<std::uint64_t, double> out;
  for (const auto& e : ledger.entries())
    if (e.algorithm == algorithm) out[e.seed] += e.inst_regret;
  if (out.empty()) throw ConfigError("no ledger entries for algorithm '" + std::string(algorithm) + "'");
  return out;
}

// Running sum of a curve's means.
inline std::vector<double> cumulative(const Curve& c) {
  std::vector<double> out;
  double s = 0.0;
  for (const auto& p : c) out.push_back(s += p.mean);
  return out;
}

struct PairedTest {
  double mean_difference = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p_one_sided = 1.0;  // H1: mean(a - b) < 0
  double p_two_sided = 1.0;
};

// Paired t-test on seed-matched values.
inline PairedTest paired_t_test(const std::map<std::uint64_t, double>& a, const std::map<std::uint64_t, double>& b) {
  std::vector<double> d;
  for (const auto& [seed, va] : a) {
    auto it = b.find(seed);
    if (it == b.end()) throw ConfigError("paired_t_test: unmatched seeds");
    d.push_back(va - it->second);
  }
  if (d.size() != b.size() || d.size() < 2) throw ConfigError("paired_t_test: need >= 2 matched seeds");
  const auto s = summarize(d);
  PairedTest out{s.mean, s.se, 0.0, 1.0, 1.0};
  if (s.se == 0.0) {
    out.t = s.mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), s.mean);
    out.p_one_sided = s.mean < 0.0 ? 0.0 : 1.0;
    out.p_two_sided = s.mean == 0.0 ? 1.0 : 0.0;
    return out;
  }
  out.t = s.mean / s.se;
  const boost::math::students_t dist(static_cast<double>(d.size() - 1));
  out.p_one_sided = boost::math::cdf(dist, out.t);
  out.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(out.t)));
  return out;
}

// SE of the difference of means treating the two samples as independent.
inline double unpaired_difference_se(const std::map<std::uint64_t, double>& a, const std::map<std::uint64_t, double>& b) {
  auto values = [](const std::map<std::uint64_t, double>& m) {
    std::vector<double> v;
    for (const auto& [k, x] : m) v.push_back(x);
    return v;
  };
  const auto sa = summarize(values(a));
  const auto sb = summarize(values(b));
  return std::sqrt(sa.se * sa.se + sb.se * sb.se);
}

}  // namespace mtts
