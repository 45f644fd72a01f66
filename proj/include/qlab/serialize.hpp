#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "qlab/experiments.hpp"
#include "qlab/mdp.hpp"
#include "qlab/policies.hpp"

namespace qlab {

using Json = nlohmann::json;

/// MDP file format: keys n_states, n_actions, transition (3-D array), reward
/// (2-D array), gamma, initial_dist, and optional features (2-D array).
Json mdp_to_json(const Mdp& mdp, const FeatureMap* features = nullptr);

struct LoadedMdp {
  Mdp mdp;
  std::optional<FeatureMap> features;
};

/// Parses and validates; throws std::invalid_argument on malformed documents
/// or invariant violations.
LoadedMdp mdp_from_json(const Json& doc);

void save_mdp(const std::string& path, const Mdp& mdp, const FeatureMap* features = nullptr);
LoadedMdp load_mdp(const std::string& path);

Json policy_to_json(const PolicyMatrix& policy);

Json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const Json& doc);
ExperimentConfig load_config(const std::string& path);

/// stats.csv writer/reader; full-precision (17 significant digits) decimal
/// floats, header t,mean,min,max,var,n_alive.
void write_stats_csv(const std::string& path, const EnsembleStats& stats);
EnsembleStats read_stats_csv(const std::string& path);

/// Build stamp embedded at configure time (git describe), or "unknown".
std::string build_stamp();

}  // namespace qlab
