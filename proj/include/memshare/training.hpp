#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memshare/envs.hpp"
#include "memshare/memdevice.hpp"
#include "memshare/nn.hpp"
#include "memshare/rng.hpp"

namespace memshare::train {

using nn::Vec;

enum class Algo { md_maddpg, maddpg, ma_maddpg };

const char* algo_name(Algo a);
Algo algo_from_name(const std::string& name);

// Replay record: joint observations, next observations, executed joint
// actions, per-agent memory snapshots (empty for memoryless baselines),
// per-agent rewards.
struct Transition {
  std::vector<Vec> obs;
  std::vector<Vec> next_obs;
  std::vector<Vec> actions;
  std::vector<Vec> memory;
  Vec rewards;
};

// Fixed-capacity ring, FIFO eviction, uniform sampling with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  bool ready(std::size_t batch) const { return count_ >= batch; }

  // Uniform with replacement; an empty result is the not-ready signal (an
  // empty buffer cannot be sampled). Training gates updates on ready(batch).
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

  // Insertion order, oldest first.
  const Transition& at(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t next_ = 0;
  std::size_t count_ = 0;
};

// Discrete-time Ornstein-Uhlenbeck process:
// x_{t+1} = x_t + theta (mu - x_t) + sigma eps,  eps ~ N(0, I).
struct OUNoise {
  Vec x;
  double theta = 0.15;
  double sigma = 0.3;
  double mu = 0.0;

  explicit OUNoise(int dim, double theta_ = 0.15, double sigma_ = 0.3,
                   double mu_ = 0.0)
      : x(dim, 0.0), theta(theta_), sigma(sigma_), mu(mu_) {}

  void reset() { std::fill(x.begin(), x.end(), mu); }
  const Vec& next(Rng& rng);
};

// softmax((logits + Gumbel noise) / temperature); differentiable w.r.t.
// logits given the sampled output.
Vec gumbel_softmax(std::span<const double> logits, double temperature, Rng& rng);
Vec gumbel_softmax_backward(std::span<const double> output,
                            std::span<const double> upstream, double temperature);

struct TrainConfig {
  Algo algo = Algo::md_maddpg;
  md::Variant variant = md::Variant::full;
  double gamma = 0.95;
  double tau = 0.01;
  double lr_critic = 1e-3;
  double lr_actor = 1e-4;
  int batch = 1024;
  int update_every = 100;  // environment samples between update rounds
  long episodes = 0;
  long buffer_capacity = 1000000;
  int memory_size = 200;
  int embed_dim = 200;
  int context_dim = 200;
  int enc_hidden = 512;
  int act_hidden = 256;
  std::vector<int> critic_hidden{1024, 512, 256};
  std::vector<int> actor_hidden{512, 256};  // maddpg / ma-maddpg actors
  double gumbel_temp = 1.0;
  double ou_theta = 0.15;
  double ou_sigma = 0.3;
  bool noise_decay = true;  // sigma -> 0 over the first 80% of episodes
  int eval_every = 100;
  int eval_episodes = 10;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

struct AgentNets {
  Algo algo = Algo::md_maddpg;
  md::MdPolicyParams actor_md, target_actor_md;
  nn::Mlp actor_net, target_actor_net;  // baselines
  nn::Mlp critic, target_critic;
  nn::AdamState opt_actor, opt_critic;

  std::vector<nn::ParamMatrix*> actor_params();
  std::vector<nn::ParamMatrix*> target_actor_params();
  std::vector<std::pair<std::string, const nn::ParamMatrix*>> named_actor_params() const;
  std::vector<std::pair<std::string, const nn::ParamMatrix*>> named_critic_params() const;
};

struct Model {
  TrainConfig tcfg;
  env::EnvConfig ecfg;
  std::vector<AgentNets> agents;
  long episodes_trained = 0;
};

Model init_model(const TrainConfig& tcfg, const env::EnvConfig& ecfg, Rng& rng);

// Critic input is all observations then all actions, in agent order.
Vec build_critic_input(const std::vector<Vec>& obs, const std::vector<Vec>& actions);
int critic_input_dim(const TrainConfig& tcfg, const env::EnvConfig& ecfg);

// One Adam step on the mean-squared TD error for agent i's critic; target
// actions come from the target actors fed next observations and the stored
// memory snapshots. Returns the loss.
double critic_update(Model& model, int agent,
                     std::span<const Transition* const> batch, Rng& rng);

// One Adam ascent step along grad_theta mu * grad_a Q for agent i's actor;
// agent i's action is recomputed from (o_i, m_i), others come from the
// stored batch. Returns the policy-gradient norm.
double actor_update(Model& model, int agent,
                    std::span<const Transition* const> batch, Rng& rng);

void update_targets(Model& model);

// ---- rollouts (shared by training, evaluation and trace recording) ----

struct StepRecord {
  int t = 0;
  const std::vector<Vec>* obs = nullptr;      // observations the agents acted on
  const std::vector<Vec>* actions = nullptr;  // executed actions
  const std::vector<Vec>* memory = nullptr;   // per-agent pre-write snapshots
  const std::vector<Vec>* writes = nullptr;   // per-agent written messages
  const std::vector<Vec>* reads = nullptr;    // per-agent read vectors
  const env::StepResult* result = nullptr;
};

struct RolloutOptions {
  bool explore = false;
  std::vector<OUNoise>* ou = nullptr;  // required when explore
  Rng* act_rng = nullptr;              // required when explore (OU + Gumbel)
  double corruption_std = 0.0;         // execution-time memory noise
  Rng* corruption_rng = nullptr;
  // Replace the channel with fresh noise before every read instead of
  // perturbing it after writes (the corruption limit's sanity reference).
  bool randomize_memory = false;
  bool record_trace = true;
  // May mutate the model (training updates networks between steps).
  std::function<void(const StepRecord&)> on_step;
};

struct EpisodeResult {
  Vec reward_sum;  // per agent
  env::EpisodeTrace trace;
};

EpisodeResult run_episode(Model& model, env::Env& env, std::uint64_t seed,
                          const RolloutOptions& opts);

// ---- training loop ----

struct CurveRow {
  long episode = 0;
  Vec eval_reward;  // per agent, mean episode reward over the eval rollouts
  double critic_loss = 0.0;
  double actor_grad_norm = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<CurveRow> curve;
};

// Runs the full loop: sequential memory-mediated acting, replay with
// snapshots, an update round every `update_every` samples, soft target
// updates, periodic greedy evaluations. On a TrainingFault a diagnostic
// checkpoint is saved to fault_dir (if given) before rethrowing.
TrainResult train(const TrainConfig& tcfg, const env::EnvConfig& ecfg,
                  const std::optional<std::filesystem::path>& fault_dir = {});

void write_curve_csv(const std::vector<CurveRow>& curve, int n_agents,
                     const std::string& path);

void save_model(const Model& model, const std::filesystem::path& dir);
Model load_model(const std::filesystem::path& dir);

}  // namespace memshare::train
