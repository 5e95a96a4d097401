#include "memshare/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "memshare/checkpoint.hpp"
#include "memshare/config.hpp"
#include "memshare/csv.hpp"
#include "memshare/errors.hpp"

namespace memshare::train {

const char* algo_name(Algo a) {
  switch (a) {
    case Algo::md_maddpg: return "md-maddpg";
    case Algo::maddpg: return "maddpg";
    case Algo::ma_maddpg: return "ma-maddpg";
  }
  return "?";
}

Algo algo_from_name(const std::string& name) {
  if (name == "md-maddpg") return Algo::md_maddpg;
  if (name == "maddpg") return Algo::maddpg;
  if (name == "ma-maddpg") return Algo::ma_maddpg;
  throw ConfigError("unknown algorithm: " + name);
}

// ---- replay buffer ----

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (count_ < capacity_) {
    ring_.push_back(std::move(t));
    count_ += 1;
  } else {
    ring_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch,
                                                    Rng& rng) const {
  std::vector<const Transition*> out;
  if (count_ == 0) return out;  // not ready
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    out.push_back(&ring_[rng.uniform_int(0, count_ - 1)]);
  }
  return out;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (count_ < capacity_) return ring_[i];
  return ring_[(next_ + i) % capacity_];
}

// ---- exploration noise ----

const Vec& OUNoise::next(Rng& rng) {
  for (double& v : x) {
    v = v + theta * (mu - v) + sigma * rng.normal();
  }
  return x;
}

// ---- gumbel-softmax ----

Vec gumbel_softmax(std::span<const double> logits, double temperature, Rng& rng) {
  if (temperature <= 0.0) throw ConfigError("gumbel_softmax: temperature must be > 0");
  Vec z(logits.size());
  double zmax = -1e300;
  for (size_t i = 0; i < z.size(); ++i) {
    z[i] = (logits[i] + rng.gumbel()) / temperature;
    zmax = std::max(zmax, z[i]);
  }
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

Vec gumbel_softmax_backward(std::span<const double> output,
                            std::span<const double> upstream,
                            double temperature) {
  double dot = 0.0;
  for (size_t i = 0; i < output.size(); ++i) dot += upstream[i] * output[i];
  Vec d(output.size());
  for (size_t i = 0; i < output.size(); ++i) {
    d[i] = output[i] * (upstream[i] - dot) / temperature;
  }
  return d;
}

// ---- model setup ----

void TrainConfig::validate() const {
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("gamma must lie in [0,1)");
  if (tau <= 0.0 || tau > 1.0) throw ConfigError("tau must lie in (0,1]");
  if (batch <= 0) throw ConfigError("batch must be positive");
  if (update_every <= 0) throw ConfigError("update_every must be positive");
  if (episodes < 0) throw ConfigError("episodes must be non-negative");
  if (buffer_capacity <= 0) throw ConfigError("buffer_capacity must be positive");
  if (memory_size < 0) throw ConfigError("memory_size must be non-negative");
  if (embed_dim <= 0) throw ConfigError("embed_dim must be positive");
  if (context_dim < 0) throw ConfigError("context_dim must be non-negative");
  if (gumbel_temp <= 0.0) throw ConfigError("gumbel_temp must be positive");
  if (eval_every <= 0) throw ConfigError("eval_every must be positive");
  if (eval_episodes <= 0) throw ConfigError("eval_episodes must be positive");
  if (jobs <= 0) throw ConfigError("jobs must be positive");
  if (variant != md::Variant::full && algo != Algo::md_maddpg) {
    throw ConfigError("ablation variants apply only to md-maddpg");
  }
}

std::vector<nn::ParamMatrix*> AgentNets::actor_params() {
  if (algo == Algo::md_maddpg) return actor_md.param_list();
  return nn::mlp_params(actor_net);
}

std::vector<nn::ParamMatrix*> AgentNets::target_actor_params() {
  if (algo == Algo::md_maddpg) return target_actor_md.param_list();
  return nn::mlp_params(target_actor_net);
}

namespace {

std::vector<std::pair<std::string, const nn::ParamMatrix*>> named_mlp(
    const std::string& prefix, const nn::Mlp& net) {
  std::vector<std::pair<std::string, const nn::ParamMatrix*>> out;
  for (size_t l = 0; l < net.w.size(); ++l) {
    out.emplace_back(prefix + "." + std::to_string(l) + ".w", &net.w[l]);
    out.emplace_back(prefix + "." + std::to_string(l) + ".b", &net.b[l]);
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, const nn::ParamMatrix*>>
AgentNets::named_actor_params() const {
  if (algo == Algo::md_maddpg) return actor_md.named_params();
  return named_mlp("actor", actor_net);
}

std::vector<std::pair<std::string, const nn::ParamMatrix*>>
AgentNets::named_critic_params() const {
  return named_mlp("critic", critic);
}

int critic_input_dim(const TrainConfig& tcfg, const env::EnvConfig& ecfg) {
  (void)tcfg;
  return ecfg.n_agents * (ecfg.obs_dim() + ecfg.action_dim());
}

Model init_model(const TrainConfig& tcfg, const env::EnvConfig& ecfg, Rng& rng) {
  tcfg.validate();
  ecfg.validate();
  Model model;
  model.tcfg = tcfg;
  model.ecfg = ecfg;
  const int n = ecfg.n_agents;
  const int obs = ecfg.obs_dim();
  const int adim = ecfg.action_dim();
  const nn::Act head_act = ecfg.discrete() ? nn::Act::gumbel_head : nn::Act::tanh;
  for (int i = 0; i < n; ++i) {
    AgentNets a;
    a.algo = tcfg.algo;
    Rng actor_rng = rng.child("actor", static_cast<std::uint64_t>(i));
    Rng critic_rng = rng.child("critic", static_cast<std::uint64_t>(i));
    if (tcfg.algo == Algo::md_maddpg) {
      md::MdConfig mc;
      mc.obs_dim = obs;
      mc.action_dim = adim;
      mc.discrete = ecfg.discrete();
      mc.embed = tcfg.embed_dim;
      mc.context = tcfg.context_dim;
      mc.memory = tcfg.memory_size;
      mc.enc_hidden = tcfg.enc_hidden;
      mc.act_hidden = tcfg.act_hidden;
      mc.variant = tcfg.variant;
      a.actor_md = md::make_md_policy(mc, actor_rng);
      a.target_actor_md = a.actor_md;
    } else {
      const int in = tcfg.algo == Algo::ma_maddpg ? n * obs : obs;
      a.actor_net = nn::make_mlp(
          nn::dense_spec(in, tcfg.actor_hidden, adim, nn::Act::relu, head_act),
          actor_rng);
      a.target_actor_net = a.actor_net;
    }
    a.critic = nn::make_mlp(
        nn::dense_spec(critic_input_dim(tcfg, ecfg), tcfg.critic_hidden, 1,
                       nn::Act::relu, nn::Act::linear),
        critic_rng);
    a.target_critic = a.critic;
    {
      auto ps = a.actor_params();
      a.opt_actor = nn::make_adam({ps.begin(), ps.end()});
      auto cs = nn::mlp_params(a.critic);
      a.opt_critic = nn::make_adam({cs.begin(), cs.end()});
    }
    model.agents.push_back(std::move(a));
  }
  return model;
}

Vec build_critic_input(const std::vector<Vec>& obs,
                       const std::vector<Vec>& actions) {
  Vec in;
  size_t total = 0;
  for (const Vec& o : obs) total += o.size();
  for (const Vec& a : actions) total += a.size();
  in.reserve(total);
  for (const Vec& o : obs) in.insert(in.end(), o.begin(), o.end());
  for (const Vec& a : actions) in.insert(in.end(), a.begin(), a.end());
  return in;
}

namespace {

// Head output (logits or squashed action) of one actor; `memory` is the
// stored snapshot for MD agents and ignored otherwise.
Vec actor_head(const Model& model, int agent, bool target,
               const std::vector<Vec>& obs_all, std::span<const double> memory,
               md::MdStepCache* md_cache = nullptr,
               nn::MlpCache* net_cache = nullptr) {
  const AgentNets& a = model.agents[agent];
  switch (a.algo) {
    case Algo::md_maddpg: {
      const md::MdPolicyParams& p = target ? a.target_actor_md : a.actor_md;
      return md::policy_step(p, obs_all[agent], memory, md_cache).action;
    }
    case Algo::maddpg: {
      const nn::Mlp& net = target ? a.target_actor_net : a.actor_net;
      if (net_cache != nullptr) {
        nn::mlp_forward(net, obs_all[agent], *net_cache);
        return net_cache->output();
      }
      return nn::mlp_forward(net, obs_all[agent]);
    }
    case Algo::ma_maddpg: {
      const nn::Mlp& net = target ? a.target_actor_net : a.actor_net;
      Vec in;
      for (const Vec& o : obs_all) in.insert(in.end(), o.begin(), o.end());
      if (net_cache != nullptr) {
        nn::mlp_forward(net, in, *net_cache);
        return net_cache->output();
      }
      return nn::mlp_forward(net, in);
    }
  }
  return {};
}

std::span<const double> snapshot_of(const Transition& tr, int agent) {
  if (tr.memory.empty()) return {};
  return tr.memory[agent];
}

double norm_of(const std::vector<nn::ParamMatrix*>& blocks) {
  double s = 0.0;
  for (const nn::ParamMatrix* b : blocks) {
    for (double v : b->values) s += v * v;
  }
  return std::sqrt(s);
}

}  // namespace

double critic_update(Model& model, int agent,
                     std::span<const Transition* const> batch, Rng& rng) {
  if (batch.empty()) throw ConfigError("critic_update: empty minibatch");
  AgentNets& a = model.agents[agent];
  const double gamma = model.tcfg.gamma;
  const double temp = model.tcfg.gumbel_temp;
  const bool discrete = model.ecfg.discrete();
  const int n = model.ecfg.n_agents;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  nn::Mlp grads = nn::zeros_like(a.critic);
  nn::MlpCache q_cache, qt_cache;
  std::vector<Vec> next_actions(n);
  double loss = 0.0;
  const Vec upstream_template(1, 0.0);
  for (const Transition* tr : batch) {
    for (int k = 0; k < n; ++k) {
      Vec head = actor_head(model, k, /*target=*/true, tr->next_obs,
                            snapshot_of(*tr, k));
      next_actions[k] = discrete ? gumbel_softmax(head, temp, rng) : std::move(head);
    }
    nn::mlp_forward(a.target_critic, build_critic_input(tr->next_obs, next_actions),
                    qt_cache);
    const double y = tr->rewards[agent] + gamma * qt_cache.output()[0];
    nn::mlp_forward(a.critic, build_critic_input(tr->obs, tr->actions), q_cache);
    const double diff = q_cache.output()[0] - y;
    loss += diff * diff * inv_b;
    Vec upstream{2.0 * diff * inv_b};
    nn::mlp_backward_acc(a.critic, q_cache, upstream, grads, nullptr);
  }
  if (!std::isfinite(loss)) {
    throw TrainingFault("critic_update: non-finite loss for agent " +
                        std::to_string(agent));
  }
  auto params = nn::mlp_params(a.critic);
  auto gparams = nn::mlp_params(grads);
  nn::adam_step(params, {gparams.begin(), gparams.end()}, a.opt_critic,
                model.tcfg.lr_critic);
  return loss;
}

double actor_update(Model& model, int agent,
                    std::span<const Transition* const> batch, Rng& rng) {
  if (batch.empty()) throw ConfigError("actor_update: empty minibatch");
  AgentNets& a = model.agents[agent];
  const double temp = model.tcfg.gumbel_temp;
  const bool discrete = model.ecfg.discrete();
  const int adim = model.ecfg.action_dim();
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  // Gradient containers matching the actor kind.
  md::MdPolicyParams md_grads;
  nn::Mlp net_grads;
  if (a.algo == Algo::md_maddpg) {
    md_grads = md::zeros_like(a.actor_md);
  } else {
    net_grads = nn::zeros_like(a.actor_net);
  }
  nn::Mlp critic_scratch = nn::zeros_like(a.critic);  // grads discarded

  const int slice_start = model.ecfg.n_agents * model.ecfg.obs_dim() + agent * adim;

  md::MdStepCache md_cache;
  nn::MlpCache net_cache, q_cache;
  std::vector<Vec> joint(model.ecfg.n_agents);
  for (const Transition* tr : batch) {
    Vec head = actor_head(model, agent, /*target=*/false, tr->obs,
                          snapshot_of(*tr, agent),
                          a.algo == Algo::md_maddpg ? &md_cache : nullptr,
                          a.algo == Algo::md_maddpg ? nullptr : &net_cache);
    Vec my_action = discrete ? gumbel_softmax(head, temp, rng) : head;
    for (int k = 0; k < model.ecfg.n_agents; ++k) {
      joint[k] = k == agent ? my_action : tr->actions[k];
    }
    nn::mlp_forward(a.critic, build_critic_input(tr->obs, joint), q_cache);
    Vec upstream{1.0};
    Vec d_input;
    nn::mlp_backward_acc(a.critic, q_cache, upstream, critic_scratch, &d_input);
    Vec d_action(d_input.begin() + slice_start,
                 d_input.begin() + slice_start + adim);
    Vec d_head =
        discrete ? gumbel_softmax_backward(my_action, d_action, temp) : d_action;
    for (double& v : d_head) v *= inv_b;
    if (a.algo == Algo::md_maddpg) {
      md::policy_backward(a.actor_md, md_cache, d_head, {}, md_grads, nullptr);
    } else {
      nn::mlp_backward_acc(a.actor_net, net_cache, d_head, net_grads, nullptr);
    }
  }

  std::vector<nn::ParamMatrix*> gparams = a.algo == Algo::md_maddpg
                                              ? md_grads.param_list()
                                              : nn::mlp_params(net_grads);
  const double norm = norm_of(gparams);
  if (!std::isfinite(norm)) {
    throw TrainingFault("actor_update: non-finite policy gradient for agent " +
                        std::to_string(agent));
  }
  // Ascend J: Adam minimizes, so feed -grad(J).
  nn::scale_params(gparams, -1.0);
  auto params = a.actor_params();
  nn::adam_step(params, {gparams.begin(), gparams.end()}, a.opt_actor,
                model.tcfg.lr_actor);
  return norm;
}

void update_targets(Model& model) {
  for (AgentNets& a : model.agents) {
    auto tp = a.target_actor_params();
    auto sp = a.actor_params();
    nn::soft_update(tp, {sp.begin(), sp.end()}, model.tcfg.tau);
    auto tc = nn::mlp_params(a.target_critic);
    auto sc = nn::mlp_params(a.critic);
    nn::soft_update(tc, {sc.begin(), sc.end()}, model.tcfg.tau);
  }
}

// ---- rollouts ----

namespace {

Vec one_hot_argmax(std::span<const double> logits) {
  size_t best = 0;
  for (size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  Vec out(logits.size(), 0.0);
  out[best] = 1.0;
  return out;
}

}  // namespace

EpisodeResult run_episode(Model& model, env::Env& env, std::uint64_t seed,
                          const RolloutOptions& opts) {
  const env::EnvConfig& ecfg = env.config();
  const int n = ecfg.n_agents;
  const bool discrete = ecfg.discrete();
  const bool is_md = model.tcfg.algo == Algo::md_maddpg;
  if (opts.explore && (opts.ou == nullptr || opts.act_rng == nullptr)) {
    throw ConfigError("run_episode: exploration requires noise state and rng");
  }
  if (opts.corruption_std > 0.0 || opts.randomize_memory) {
    if (!is_md) {
      throw ConfigError("memory corruption applies only to md-maddpg policies");
    }
    if (opts.corruption_rng == nullptr) {
      throw ConfigError("run_episode: corruption requires a dedicated rng");
    }
  }

  std::vector<Vec> obs = env.reset(seed);
  Vec memory(is_md ? model.tcfg.memory_size : 0, 0.0);
  if (opts.explore) {
    for (OUNoise& noise : *opts.ou) noise.reset();
  }

  EpisodeResult res;
  res.reward_sum.assign(n, 0.0);
  env::EpisodeTrace& trace = res.trace;
  trace.task = ecfg.task;
  trace.n_agents = n;
  trace.action_dim = ecfg.action_dim();
  trace.seed = seed;
  for (const env::Body& b : env.state().agents) {
    trace.initial_pos.push_back(b.pos.x);
    trace.initial_pos.push_back(b.pos.y);
  }
  for (const env::Body& b : env.state().landmarks) {
    trace.landmark_pos.push_back(b.pos.x);
    trace.landmark_pos.push_back(b.pos.y);
  }

  std::vector<Vec> actions(n), snapshots, writes, reads;
  if (is_md) {
    snapshots.resize(n);
    writes.resize(n);
    reads.resize(n);
  }

  for (int t = 0; t < ecfg.horizon; ++t) {
    for (int i = 0; i < n; ++i) {
      Vec head;
      if (is_md) {
        if (opts.randomize_memory) {
          for (double& v : memory) {
            v = opts.corruption_std * opts.corruption_rng->normal();
          }
        }
        md::MdStepOutput step = md::policy_step(model.agents[i].actor_md, obs[i],
                                                memory);
        snapshots[i] = std::move(step.memory_snapshot);
        writes[i] = step.m_prime;
        reads[i] = std::move(step.read_vec);
        memory = std::move(step.m_prime);
        if (opts.corruption_std > 0.0) {
          for (double& v : memory) {
            v += opts.corruption_std * opts.corruption_rng->normal();
          }
        }
        head = std::move(step.action);
      } else {
        head = actor_head(model, i, /*target=*/false, obs, {});
      }
      if (discrete) {
        if (opts.explore) {
          const Vec& noise = (*opts.ou)[i].next(*opts.act_rng);
          for (size_t d = 0; d < head.size(); ++d) head[d] += noise[d];
          actions[i] = gumbel_softmax(head, model.tcfg.gumbel_temp, *opts.act_rng);
        } else {
          actions[i] = one_hot_argmax(head);
        }
      } else {
        if (opts.explore) {
          const Vec& noise = (*opts.ou)[i].next(*opts.act_rng);
          for (size_t d = 0; d < head.size(); ++d) {
            head[d] = std::clamp(head[d] + noise[d], -1.0, 1.0);
          }
        }
        actions[i] = std::move(head);
      }
    }

    env::StepResult sr = env.step(actions);
    for (int i = 0; i < n; ++i) res.reward_sum[i] += sr.rewards[i];

    if (opts.record_trace) {
      env::TraceRow row;
      row.t = t;
      for (const env::Body& b : env.state().agents) {
        row.agent_pos.push_back(b.pos.x);
        row.agent_pos.push_back(b.pos.y);
      }
      for (const Vec& a : actions) {
        row.actions.insert(row.actions.end(), a.begin(), a.end());
      }
      row.rewards = sr.rewards;
      row.flags = sr.flags;
      trace.rows.push_back(std::move(row));
    }

    if (opts.on_step) {
      StepRecord rec;
      rec.t = t;
      rec.obs = &obs;
      rec.actions = &actions;
      rec.memory = &snapshots;
      rec.writes = &writes;
      rec.reads = &reads;
      rec.result = &sr;
      opts.on_step(rec);
    }
    obs = std::move(sr.obs);
    if (sr.done) break;
  }

  if (opts.record_trace) {
    std::vector<int> phases = env::phase_of(trace, ecfg.task);
    for (size_t t = 0; t < trace.rows.size(); ++t) trace.rows[t].phase = phases[t];
  }
  return res;
}

// ---- training loop ----

namespace {

// One fixed evaluation seed set for every log point, so curve movement
// reflects policy changes rather than layout resampling.
Vec greedy_eval_rewards(Model& model, const env::EnvConfig& ecfg,
                        const Rng& root, int episodes) {
  env::Env env(ecfg);
  Vec mean(ecfg.n_agents, 0.0);
  RolloutOptions opts;
  opts.explore = false;
  opts.record_trace = false;
  for (int j = 0; j < episodes; ++j) {
    const std::uint64_t seed =
        root.child("curve-eval", static_cast<std::uint64_t>(j)).next_u64();
    EpisodeResult ep = run_episode(model, env, seed, opts);
    for (int i = 0; i < ecfg.n_agents; ++i) mean[i] += ep.reward_sum[i];
  }
  for (double& v : mean) v /= static_cast<double>(episodes);
  return mean;
}

}  // namespace

TrainResult train(const TrainConfig& tcfg, const env::EnvConfig& ecfg,
                  const std::optional<std::filesystem::path>& fault_dir) {
  tcfg.validate();
  ecfg.validate();
  Rng root(tcfg.seed);
  Rng init_rng = root.child("init");
  TrainResult result;
  result.model = init_model(tcfg, ecfg, init_rng);
  Model& model = result.model;

  env::Env env(ecfg);
  ReplayBuffer buffer(static_cast<std::size_t>(tcfg.buffer_capacity));
  Rng act_rng = root.child("act");
  Rng update_rng = root.child("update");
  std::vector<OUNoise> ou;
  for (int i = 0; i < ecfg.n_agents; ++i) {
    ou.emplace_back(ecfg.action_dim(), tcfg.ou_theta, tcfg.ou_sigma);
  }

  long samples = 0;
  double last_loss = 0.0;
  double last_norm = 0.0;

  auto log_point = [&](long episode) {
    CurveRow row;
    row.episode = episode;
    row.eval_reward = greedy_eval_rewards(model, ecfg, root, tcfg.eval_episodes);
    row.critic_loss = last_loss;
    row.actor_grad_norm = last_norm;
    result.curve.push_back(std::move(row));
  };

  log_point(0);

  RolloutOptions opts;
  opts.explore = true;
  opts.ou = &ou;
  opts.act_rng = &act_rng;
  opts.record_trace = false;
  opts.on_step = [&](const StepRecord& rec) {
    Transition tr;
    tr.obs = *rec.obs;
    tr.next_obs = rec.result->obs;
    tr.actions = *rec.actions;
    tr.memory = *rec.memory;
    tr.rewards = rec.result->rewards;
    buffer.push(std::move(tr));
    samples += 1;
    if (samples % tcfg.update_every == 0 &&
        buffer.ready(static_cast<std::size_t>(tcfg.batch))) {
      double loss_acc = 0.0;
      double norm_acc = 0.0;
      for (int i = 0; i < ecfg.n_agents; ++i) {
        auto batch = buffer.sample(static_cast<std::size_t>(tcfg.batch), update_rng);
        loss_acc += critic_update(model, i, batch, update_rng);
        norm_acc += actor_update(model, i, batch, update_rng);
      }
      update_targets(model);
      last_loss = loss_acc / ecfg.n_agents;
      last_norm = norm_acc / ecfg.n_agents;
    }
  };

  try {
    for (long ep = 0; ep < tcfg.episodes; ++ep) {
      double scale = 1.0;
      if (tcfg.noise_decay && tcfg.episodes > 0) {
        const double cutoff = 0.8 * static_cast<double>(tcfg.episodes);
        scale = std::max(0.0, 1.0 - static_cast<double>(ep) / cutoff);
      }
      for (OUNoise& noise : ou) noise.sigma = tcfg.ou_sigma * scale;
      const std::uint64_t ep_seed =
          root.child("episode", static_cast<std::uint64_t>(ep)).next_u64();
      run_episode(model, env, ep_seed, opts);
      if ((ep + 1) % tcfg.eval_every == 0 || ep + 1 == tcfg.episodes) {
        log_point(ep + 1);
      }
    }
  } catch (const TrainingFault&) {
    if (fault_dir.has_value()) {
      std::filesystem::create_directories(*fault_dir);
      save_model(model, *fault_dir);
    }
    throw;
  }
  model.episodes_trained = tcfg.episodes;
  return result;
}

void write_curve_csv(const std::vector<CurveRow>& curve, int n_agents,
                     const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write learning curve: " + path);
  os << "episode";
  for (int i = 0; i < n_agents; ++i) os << ",eval_reward_a" << i;
  os << ",critic_loss,actor_grad_norm\n";
  for (const CurveRow& row : curve) {
    os << row.episode;
    for (double v : row.eval_reward) os << "," << csv::g17(v);
    os << "," << csv::g17(row.critic_loss) << "," << csv::g17(row.actor_grad_norm)
       << "\n";
  }
}

void save_model(const Model& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json doc;
  doc["format"] = "memshare-model";
  doc["episodes_trained"] = model.episodes_trained;
  doc["train_config"] = config::to_json(model.tcfg);
  doc["env_config"] = config::to_json(model.ecfg);
  std::ofstream os(dir / "model.json");
  if (!os) throw ConfigError("cannot write model manifest in " + dir.string());
  os << doc.dump(2) << "\n";
  for (size_t i = 0; i < model.agents.size(); ++i) {
    const AgentNets& a = model.agents[i];
    nlohmann::json desc{{"kind", a.algo == Algo::md_maddpg ? "md-policy" : "mlp-actor"},
                        {"agent", i}};
    nn::save_checkpoint(dir / ("agent" + std::to_string(i) + "_actor.ckpt"),
                        desc.dump(), a.named_actor_params());
    nlohmann::json cdesc{{"kind", "mlp-critic"}, {"agent", i}};
    nn::save_checkpoint(dir / ("agent" + std::to_string(i) + "_critic.ckpt"),
                        cdesc.dump(), a.named_critic_params());
  }
}

Model load_model(const std::filesystem::path& dir) {
  std::ifstream is(dir / "model.json");
  if (!is) throw ConfigError("missing model manifest: " + (dir / "model.json").string());
  nlohmann::json doc = nlohmann::json::parse(is);
  TrainConfig tcfg = config::train_from_json(doc.at("train_config"));
  env::EnvConfig ecfg = config::env_from_json(doc.at("env_config"));
  Rng scratch(0);
  Rng init = scratch.child("init");
  Model model = init_model(tcfg, ecfg, init);
  model.episodes_trained = doc.value("episodes_trained", 0L);
  for (size_t i = 0; i < model.agents.size(); ++i) {
    AgentNets& a = model.agents[i];
    auto actor_ck =
        nn::load_checkpoint(dir / ("agent" + std::to_string(i) + "_actor.ckpt"));
    std::vector<std::pair<std::string, nn::ParamMatrix*>> dest;
    for (auto& [name, mat] : a.named_actor_params()) {
      dest.emplace_back(name, const_cast<nn::ParamMatrix*>(mat));
    }
    nn::restore_params(actor_ck, dest);
    auto critic_ck =
        nn::load_checkpoint(dir / ("agent" + std::to_string(i) + "_critic.ckpt"));
    std::vector<std::pair<std::string, nn::ParamMatrix*>> cdest;
    for (auto& [name, mat] : a.named_critic_params()) {
      cdest.emplace_back(name, const_cast<nn::ParamMatrix*>(mat));
    }
    nn::restore_params(critic_ck, cdest);
    // Targets track the restored nets.
    if (a.algo == Algo::md_maddpg) {
      a.target_actor_md = a.actor_md;
    } else {
      a.target_actor_net = a.actor_net;
    }
    a.target_critic = a.critic;
  }
  return model;
}

}  // namespace memshare::train
