#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace mtts {

using Rng = std::mt19937_64;

namespace random {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named sub-stream seed: derive(master, "population"), derive(master, "agent/mtts"), ...
inline constexpr std::uint64_t derive(std::uint64_t master, std::string_view label) {
  return splitmix64(master ^ splitmix64(hash_label(label)));
}

inline constexpr std::uint64_t derive(std::uint64_t master, std::string_view label,
                                      std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = derive(master, label);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ (c + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

inline Rng make_rng(std::uint64_t master, std::string_view label) {
  return Rng(derive(master, label));
}

// Uniform in the open interval (0, 1) from 53 random bits.
inline double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Counter-based draws keyed by (seed, task, round, arm): identical for every
// policy that pulls the same arm at the same decision point.
struct KeyedDraw {
  std::uint64_t key;

  [[nodiscard]] double uniform() const { return to_unit_open(splitmix64(key)); }

  [[nodiscard]] double standard_normal() const {
    const double u1 = to_unit_open(splitmix64(key ^ 0x5851f42d4c957f2dULL));
    const double u2 = to_unit_open(splitmix64(key ^ 0x14057b7ef767814fULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

inline Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

// Beta(a, b) through two gamma variates.
inline double beta_variate(Rng& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  const double s = x + y;
  if (!(s > 0.0)) return a / (a + b);  // both underflowed
  return x / s;
}

}  // namespace random
}  // namespace mtts
