#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "memshare/envs.hpp"
#include "memshare/training.hpp"

namespace memshare::config {

// Flat JSON run configuration. Required keys: task, algo, episodes. Every
// other key has a documented default (see README); unknown keys are rejected.
struct RunConfig {
  train::TrainConfig train;
  env::EnvConfig env;
  nlohmann::json resolved;  // full flat document, defaults applied
};

RunConfig from_flat_json(const nlohmann::json& doc);

// Overrides are `key=value` pairs; values parse as JSON and fall back to
// plain strings. File values lose to overrides.
RunConfig load_run_config(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::string>>& overrides = {});

nlohmann::json to_json(const train::TrainConfig& t);
nlohmann::json to_json(const env::EnvConfig& e);
train::TrainConfig train_from_json(const nlohmann::json& doc);
env::EnvConfig env_from_json(const nlohmann::json& doc);

// The resolved flat document for a (train, env) pair, suitable for manifests.
nlohmann::json resolve_flat(const train::TrainConfig& t, const env::EnvConfig& e);

}  // namespace memshare::config
