#include "memshare/config.hpp"

#include <fstream>
#include <set>

#include "memshare/errors.hpp"

namespace memshare::config {

namespace {

using nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // run
      "task", "algo", "variant", "episodes", "seed", "jobs",
      // learning
      "gamma", "tau", "lr_critic", "lr_actor", "batch", "update_every",
      "buffer_capacity", "gumbel_temp", "ou_theta", "ou_sigma", "noise_decay",
      "eval_every", "eval_episodes",
      // architecture
      "memory_size", "embed_dim", "context_dim", "enc_hidden", "act_hidden",
      "critic_hidden", "actor_hidden",
      // environment
      "n_agents", "horizon", "vision_radius", "n_food", "n_poison", "n_sensors",
      "damping", "force_scale", "max_speed", "agent_radius", "landmark_radius",
      "food_radius", "poison_radius", "target_drift", "target_max_speed",
      // rewards
      "collision_penalty", "sync_reward", "not_sync_penalty", "sync_shaping",
      "sequential_reward", "simultaneous_penalty", "food_reward",
      "poison_penalty"};
  return keys;
}

template <typename T>
T get_or(const json& doc, const std::string& key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key \"" + key + "\" has the wrong type");
  }
}

std::string get_required_string(const json& doc, const std::string& key) {
  if (!doc.contains(key)) {
    throw ConfigError("missing required key \"" + key + "\"");
  }
  if (!doc.at(key).is_string()) {
    throw ConfigError("config key \"" + key + "\" must be a string");
  }
  return doc.at(key).get<std::string>();
}

std::vector<int> get_int_list(const json& doc, const std::string& key,
                              std::vector<int> fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_array()) {
    throw ConfigError("config key \"" + key + "\" must be an array of integers");
  }
  std::vector<int> out;
  for (const json& e : v) {
    if (!e.is_number_integer()) {
      throw ConfigError("config key \"" + key + "\" must be an array of integers");
    }
    out.push_back(e.get<int>());
  }
  return out;
}

}  // namespace

RunConfig from_flat_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (known_keys().find(it.key()) == known_keys().end()) {
      throw ConfigError("unknown config key \"" + it.key() + "\"");
    }
  }

  RunConfig rc;
  env::EnvConfig& e = rc.env;
  train::TrainConfig& t = rc.train;

  e.task = env::task_from_name(get_required_string(doc, "task"));
  t.algo = train::algo_from_name(get_required_string(doc, "algo"));
  if (!doc.contains("episodes")) {
    throw ConfigError("missing required key \"episodes\"");
  }
  t.episodes = get_or<long>(doc, "episodes", 0);

  t.variant = md::variant_from_name(get_or<std::string>(doc, "variant", "full"));
  t.seed = get_or<std::uint64_t>(doc, "seed", 0);
  t.jobs = get_or<int>(doc, "jobs", 1);
  t.gamma = get_or<double>(doc, "gamma", 0.95);
  t.tau = get_or<double>(doc, "tau", 0.01);
  t.lr_critic = get_or<double>(doc, "lr_critic", 1e-3);
  t.lr_actor = get_or<double>(doc, "lr_actor", 1e-4);
  t.batch = get_or<int>(doc, "batch", 1024);
  t.update_every = get_or<int>(doc, "update_every", 100);
  t.buffer_capacity = get_or<long>(doc, "buffer_capacity", 1000000);
  t.gumbel_temp = get_or<double>(doc, "gumbel_temp", 1.0);
  t.ou_theta = get_or<double>(doc, "ou_theta", 0.15);
  t.ou_sigma = get_or<double>(doc, "ou_sigma", 0.3);
  t.noise_decay = get_or<bool>(doc, "noise_decay", true);
  t.eval_every = get_or<int>(doc, "eval_every", 100);
  t.eval_episodes = get_or<int>(doc, "eval_episodes", 10);
  t.memory_size = get_or<int>(doc, "memory_size", 200);
  t.embed_dim = get_or<int>(doc, "embed_dim", 200);
  t.context_dim = get_or<int>(doc, "context_dim", 200);
  t.enc_hidden = get_or<int>(doc, "enc_hidden", 512);
  t.act_hidden = get_or<int>(doc, "act_hidden", 256);
  t.critic_hidden = get_int_list(doc, "critic_hidden", {1024, 512, 256});
  t.actor_hidden = get_int_list(doc, "actor_hidden", {512, 256});

  e.n_agents = get_or<int>(doc, "n_agents", 2);
  e.horizon = get_or<int>(doc, "horizon",
                          e.task == env::Task::waterworld ? 1000 : 100);
  e.vision_radius = get_or<double>(doc, "vision_radius", 0.5);
  e.n_food = get_or<int>(doc, "n_food", 5);
  e.n_poison = get_or<int>(doc, "n_poison", 10);
  e.n_sensors = get_or<int>(doc, "n_sensors", 16);
  e.damping = get_or<double>(doc, "damping", 0.75);
  e.force_scale = get_or<double>(doc, "force_scale", 0.1);
  e.max_speed = get_or<double>(doc, "max_speed", 1.0);
  e.agent_radius = get_or<double>(doc, "agent_radius", 0.05);
  e.landmark_radius = get_or<double>(doc, "landmark_radius", 0.05);
  e.food_radius = get_or<double>(doc, "food_radius", 0.06);
  e.poison_radius = get_or<double>(doc, "poison_radius", 0.04);
  e.target_drift = get_or<double>(doc, "target_drift", 0.02);
  e.target_max_speed = get_or<double>(doc, "target_max_speed", 0.05);
  e.collision_penalty = get_or<double>(doc, "collision_penalty", 1.0);
  e.sync_reward = get_or<double>(doc, "sync_reward", 2.0);
  e.not_sync_penalty = get_or<double>(doc, "not_sync_penalty", 0.25);
  e.sync_shaping = get_or<double>(doc, "sync_shaping", 0.01);
  e.sequential_reward = get_or<double>(doc, "sequential_reward", 2.0);
  e.simultaneous_penalty = get_or<double>(doc, "simultaneous_penalty", 1.0);
  e.food_reward = get_or<double>(doc, "food_reward", 10.0);
  e.poison_penalty = get_or<double>(doc, "poison_penalty", 1.0);

  t.validate();
  e.validate();
  rc.resolved = resolve_flat(t, e);
  return rc;
}

RunConfig load_run_config(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& err) {
    throw ConfigError("config parse error in " + path.string() + ": " + err.what());
  }
  for (const auto& [key, value] : overrides) {
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;  // bare string
    }
    doc[key] = parsed;
  }
  return from_flat_json(doc);
}

json to_json(const train::TrainConfig& t) {
  return json{{"algo", train::algo_name(t.algo)},
              {"variant", md::variant_name(t.variant)},
              {"gamma", t.gamma},
              {"tau", t.tau},
              {"lr_critic", t.lr_critic},
              {"lr_actor", t.lr_actor},
              {"batch", t.batch},
              {"update_every", t.update_every},
              {"episodes", t.episodes},
              {"buffer_capacity", t.buffer_capacity},
              {"memory_size", t.memory_size},
              {"embed_dim", t.embed_dim},
              {"context_dim", t.context_dim},
              {"enc_hidden", t.enc_hidden},
              {"act_hidden", t.act_hidden},
              {"critic_hidden", t.critic_hidden},
              {"actor_hidden", t.actor_hidden},
              {"gumbel_temp", t.gumbel_temp},
              {"ou_theta", t.ou_theta},
              {"ou_sigma", t.ou_sigma},
              {"noise_decay", t.noise_decay},
              {"eval_every", t.eval_every},
              {"eval_episodes", t.eval_episodes},
              {"seed", t.seed},
              {"jobs", t.jobs}};
}

json to_json(const env::EnvConfig& e) {
  return json{{"task", env::task_name(e.task)},
              {"n_agents", e.n_agents},
              {"horizon", e.horizon},
              {"vision_radius", e.vision_radius},
              {"n_food", e.n_food},
              {"n_poison", e.n_poison},
              {"n_sensors", e.n_sensors},
              {"damping", e.damping},
              {"force_scale", e.force_scale},
              {"max_speed", e.max_speed},
              {"agent_radius", e.agent_radius},
              {"landmark_radius", e.landmark_radius},
              {"food_radius", e.food_radius},
              {"poison_radius", e.poison_radius},
              {"target_drift", e.target_drift},
              {"target_max_speed", e.target_max_speed},
              {"collision_penalty", e.collision_penalty},
              {"sync_reward", e.sync_reward},
              {"not_sync_penalty", e.not_sync_penalty},
              {"sync_shaping", e.sync_shaping},
              {"sequential_reward", e.sequential_reward},
              {"simultaneous_penalty", e.simultaneous_penalty},
              {"food_reward", e.food_reward},
              {"poison_penalty", e.poison_penalty}};
}

train::TrainConfig train_from_json(const json& doc) {
  train::TrainConfig t;
  t.algo = train::algo_from_name(doc.at("algo").get<std::string>());
  t.variant = md::variant_from_name(doc.value("variant", std::string("full")));
  t.gamma = doc.at("gamma").get<double>();
  t.tau = doc.at("tau").get<double>();
  t.lr_critic = doc.at("lr_critic").get<double>();
  t.lr_actor = doc.at("lr_actor").get<double>();
  t.batch = doc.at("batch").get<int>();
  t.update_every = doc.at("update_every").get<int>();
  t.episodes = doc.at("episodes").get<long>();
  t.buffer_capacity = doc.at("buffer_capacity").get<long>();
  t.memory_size = doc.at("memory_size").get<int>();
  t.embed_dim = doc.at("embed_dim").get<int>();
  t.context_dim = doc.at("context_dim").get<int>();
  t.enc_hidden = doc.at("enc_hidden").get<int>();
  t.act_hidden = doc.at("act_hidden").get<int>();
  t.critic_hidden = doc.at("critic_hidden").get<std::vector<int>>();
  t.actor_hidden = doc.at("actor_hidden").get<std::vector<int>>();
  t.gumbel_temp = doc.at("gumbel_temp").get<double>();
  t.ou_theta = doc.at("ou_theta").get<double>();
  t.ou_sigma = doc.at("ou_sigma").get<double>();
  t.noise_decay = doc.at("noise_decay").get<bool>();
  t.eval_every = doc.at("eval_every").get<int>();
  t.eval_episodes = doc.at("eval_episodes").get<int>();
  t.seed = doc.at("seed").get<std::uint64_t>();
  t.jobs = doc.value("jobs", 1);
  return t;
}

env::EnvConfig env_from_json(const json& doc) {
  env::EnvConfig e;
  e.task = env::task_from_name(doc.at("task").get<std::string>());
  e.n_agents = doc.at("n_agents").get<int>();
  e.horizon = doc.at("horizon").get<int>();
  e.vision_radius = doc.at("vision_radius").get<double>();
  e.n_food = doc.at("n_food").get<int>();
  e.n_poison = doc.at("n_poison").get<int>();
  e.n_sensors = doc.at("n_sensors").get<int>();
  e.damping = doc.at("damping").get<double>();
  e.force_scale = doc.at("force_scale").get<double>();
  e.max_speed = doc.at("max_speed").get<double>();
  e.agent_radius = doc.at("agent_radius").get<double>();
  e.landmark_radius = doc.at("landmark_radius").get<double>();
  e.food_radius = doc.at("food_radius").get<double>();
  e.poison_radius = doc.at("poison_radius").get<double>();
  e.target_drift = doc.at("target_drift").get<double>();
  e.target_max_speed = doc.at("target_max_speed").get<double>();
  e.collision_penalty = doc.at("collision_penalty").get<double>();
  e.sync_reward = doc.at("sync_reward").get<double>();
  e.not_sync_penalty = doc.at("not_sync_penalty").get<double>();
  e.sync_shaping = doc.at("sync_shaping").get<double>();
  e.sequential_reward = doc.at("sequential_reward").get<double>();
  e.simultaneous_penalty = doc.at("simultaneous_penalty").get<double>();
  e.food_reward = doc.at("food_reward").get<double>();
  e.poison_penalty = doc.at("poison_penalty").get<double>();
  return e;
}

json resolve_flat(const train::TrainConfig& t, const env::EnvConfig& e) {
  json flat = to_json(e);
  const json tj = to_json(t);
  for (auto it = tj.begin(); it != tj.end(); ++it) flat[it.key()] = it.value();
  return flat;
}

}  // namespace memshare::config
