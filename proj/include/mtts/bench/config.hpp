#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>
#include <json.hpp>

#include "mtts/agents.hpp"
#include "mtts/bench/io.hpp"
#include "mtts/environments.hpp"
#include "mtts/errors.hpp"
#include "mtts/priors_eb.hpp"

namespace mtts::bench {

struct AlgorithmSpec {
  PolicyKind kind = PolicyKind::Mtts;
  std::string label;
  std::optional<std::size_t> refresh;  // nullopt: auto; kNeverRefresh: never
  std::size_t mcmc_samples = 200;
  std::size_t mcmc_burn_in = 200;
  std::size_t candidates = kBernoulliCandidates;
};

struct ExperimentConfig {
  PopulationSpec population;
  ScheduleKind schedule = ScheduleKind::Concurrent;
  std::vector<TaskId> custom_stream;
  std::vector<std::uint64_t> seeds;
  std::size_t parallelism = 1;
  std::string output;
  bool plots = true;
  bool mtr = false;
  std::size_t prior_mc_samples = 20000;
  std::vector<AlgorithmSpec> algorithms;

  [[nodiscard]] const AlgorithmSpec* find_policy(PolicyKind k) const {
    for (const auto& a : algorithms)
      if (a.kind == k) return &a;
    return nullptr;
  }
};

inline const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Sequential: return "sequential";
    case ScheduleKind::Concurrent: return "concurrent";
    case ScheduleKind::Custom: return "custom";
  }
  return "?";
}

namespace detail {

inline void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const YAML::Node& node, const std::string& key, const std::string& where) {
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(where + "." + key + ": " + e.msg);
  }
}

template <class T>
void read_opt(const YAML::Node& node, const std::string& key, T& out, const std::string& where) {
  if (node[key]) out = get<T>(node, key, where);
}

inline std::optional<std::size_t> parse_refresh(const YAML::Node& n) {
  const auto s = n.as<std::string>();
  if (s == "auto") return std::nullopt;
  if (s == "never") return kNeverRefresh;
  try {
    const long long v = std::stoll(s);
    if (v < 1) throw ConfigError("refresh must be >= 1, 'auto' or 'never'");
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw ConfigError("refresh must be an integer, 'auto' or 'never' (got '" + s + "')");
  }
}

}  // namespace detail

inline void validate_config(ExperimentConfig& cfg) {
  cfg.population.validate();
  if (cfg.algorithms.empty()) throw ConfigError("config: at least one algorithm is required");
  if (cfg.seeds.empty()) throw ConfigError("config: seeds must be >= 1");
  if (cfg.parallelism < 1) throw ConfigError("config: parallelism must be >= 1");
  if (cfg.prior_mc_samples < 1000) throw ConfigError("config: prior_mc_samples must be >= 1000");
  std::set<std::uint64_t> unique_seeds(cfg.seeds.begin(), cfg.seeds.end());
  if (unique_seeds.size() != cfg.seeds.size()) throw ConfigError("config: duplicate seeds");
  if (cfg.mtr && !cfg.find_policy(PolicyKind::OracleTs)) {
    AlgorithmSpec oracle;
    oracle.kind = PolicyKind::OracleTs;
    oracle.label = "oracle_ts";
    cfg.algorithms.push_back(oracle);
  }
  std::set<std::string> labels;
  for (const auto& a : cfg.algorithms) {
    if (!labels.insert(a.label).second) throw ConfigError("config: duplicate algorithm label '" + a.label + "'");
    if (a.mcmc_samples < 1) throw ConfigError("config: mcmc_samples must be >= 1");
    if (a.candidates < 1) throw ConfigError("config: candidates must be >= 1");
  }
  if (cfg.schedule == ScheduleKind::Custom)
    (void)make_schedule(cfg.schedule, cfg.population.tasks, cfg.population.horizon, cfg.custom_stream);
  else if (!cfg.custom_stream.empty())
    throw ConfigError("config: custom_stream requires schedule: custom");
}

inline ExperimentConfig parse_config(const YAML::Node& root) {
  detail::check_keys(root, {"population", "schedule", "custom_stream", "seeds", "parallelism", "output", "plots",
                            "mtr", "prior_mc_samples", "algorithms"},
                     "config");
  ExperimentConfig cfg;

  if (!root["population"]) throw ConfigError("config: missing 'population'");
  const auto pop = root["population"];
  const std::string pw = "population";
  detail::check_keys(pop, {"reward", "tasks", "horizon", "arms", "dim", "sigma", "sigma1_sq", "psi", "theta_variance",
                           "lambda", "seed"},
                     pw);
  auto& ps = cfg.population;
  if (pop["reward"]) {
    const auto r = detail::get<std::string>(pop, "reward", pw);
    if (r == "gaussian") ps.reward = RewardKind::Gaussian;
    else if (r == "bernoulli") ps.reward = RewardKind::Bernoulli;
    else throw ConfigError("population.reward must be 'gaussian' or 'bernoulli'");
  }
  detail::read_opt(pop, "tasks", ps.tasks, pw);
  detail::read_opt(pop, "horizon", ps.horizon, pw);
  detail::read_opt(pop, "arms", ps.arms, pw);
  detail::read_opt(pop, "dim", ps.dim, pw);
  detail::read_opt(pop, "sigma", ps.sigma, pw);
  detail::read_opt(pop, "sigma1_sq", ps.sigma1_sq, pw);
  detail::read_opt(pop, "psi", ps.psi, pw);
  if (pop["theta_variance"]) ps.theta_variance = detail::get<double>(pop, "theta_variance", pw);
  detail::read_opt(pop, "lambda", ps.misspec_lambda, pw);
  detail::read_opt(pop, "seed", ps.seed, pw);

  if (root["schedule"]) {
    const auto s = detail::get<std::string>(root, "schedule", "config");
    if (s == "sequential") cfg.schedule = ScheduleKind::Sequential;
    else if (s == "concurrent") cfg.schedule = ScheduleKind::Concurrent;
    else if (s == "custom") cfg.schedule = ScheduleKind::Custom;
    else throw ConfigError("schedule must be 'sequential', 'concurrent' or 'custom'");
  }
  if (root["custom_stream"]) cfg.custom_stream = detail::get<std::vector<TaskId>>(root, "custom_stream", "config");

  if (!root["seeds"]) throw ConfigError("config: missing 'seeds'");
  if (root["seeds"].IsSequence()) {
    cfg.seeds = detail::get<std::vector<std::uint64_t>>(root, "seeds", "config");
  } else {
    const auto n = detail::get<long long>(root, "seeds", "config");
    if (n < 1) throw ConfigError("config: seeds must be >= 1");
    for (long long s = 0; s < n; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  detail::read_opt(root, "parallelism", cfg.parallelism, "config");
  detail::read_opt(root, "output", cfg.output, "config");
  detail::read_opt(root, "plots", cfg.plots, "config");
  detail::read_opt(root, "mtr", cfg.mtr, "config");
  detail::read_opt(root, "prior_mc_samples", cfg.prior_mc_samples, "config");

  if (!root["algorithms"] || !root["algorithms"].IsSequence()) throw ConfigError("config: 'algorithms' must be a list");
  for (const auto& node : root["algorithms"]) {
    const std::string aw = "algorithms[]";
    detail::check_keys(node, {"name", "label", "refresh", "mcmc_samples", "mcmc_burn_in", "candidates"}, aw);
    if (!node["name"]) throw ConfigError("algorithms[]: missing 'name'");
    AlgorithmSpec a;
    const auto name = detail::get<std::string>(node, "name", aw);
    const auto kind = parse_policy(name);
    if (!kind) throw ConfigError("algorithms[]: unknown algorithm '" + name + "'");
    a.kind = *kind;
    a.label = node["label"] ? detail::get<std::string>(node, "label", aw) : name;
    if (node["refresh"]) a.refresh = detail::parse_refresh(node["refresh"]);
    detail::read_opt(node, "mcmc_samples", a.mcmc_samples, aw);
    detail::read_opt(node, "mcmc_burn_in", a.mcmc_burn_in, aw);
    detail::read_opt(node, "candidates", a.candidates, aw);
    cfg.algorithms.push_back(a);
  }
  validate_config(cfg);
  return cfg;
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json pop;
  const auto& ps = cfg.population;
  pop["reward"] = to_string(ps.reward);
  pop["tasks"] = ps.tasks;
  pop["horizon"] = ps.horizon;
  pop["arms"] = ps.arms;
  pop["dim"] = ps.dim;
  pop["sigma"] = ps.sigma;
  pop["sigma1_sq"] = ps.sigma1_sq;
  pop["psi"] = ps.psi;
  if (ps.theta_variance) pop["theta_variance"] = *ps.theta_variance;
  pop["lambda"] = ps.misspec_lambda;
  pop["seed"] = ps.seed;

  nlohmann::ordered_json out;
  out["population"] = pop;
  out["schedule"] = to_string(cfg.schedule);
  if (!cfg.custom_stream.empty()) out["custom_stream"] = cfg.custom_stream;
  out["seeds"] = cfg.seeds;
  out["parallelism"] = cfg.parallelism;
  out["output"] = cfg.output;
  out["plots"] = cfg.plots;
  out["mtr"] = cfg.mtr;
  out["prior_mc_samples"] = cfg.prior_mc_samples;
  auto algs = nlohmann::ordered_json::array();
  for (const auto& a : cfg.algorithms) {
    nlohmann::ordered_json j;
    j["name"] = std::string(policy_name(a.kind));
    j["label"] = a.label;
    if (!a.refresh) j["refresh"] = "auto";
    else if (*a.refresh == kNeverRefresh) j["refresh"] = "never";
    else j["refresh"] = *a.refresh;
    j["mcmc_samples"] = a.mcmc_samples;
    j["mcmc_burn_in"] = a.mcmc_burn_in;
    j["candidates"] = a.candidates;
    algs.push_back(j);
  }
  out["algorithms"] = algs;
  return out;
}

// Reads a YAML config, or the "config" member of a run manifest (.json).
inline ExperimentConfig load_config(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    if (path.extension() == ".json") {
      const auto manifest = nlohmann::json::parse(text);
      if (!manifest.contains("config")) throw ConfigError(path.string() + ": manifest has no 'config' member");
      return parse_config(YAML::Load(manifest["config"].dump()));
    }
    return parse_config(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace mtts::bench
