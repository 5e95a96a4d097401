#include "memshare/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "memshare/csv.hpp"
#include "memshare/errors.hpp"

namespace memshare::env {

namespace {

double dist(const Vec2& a, const Vec2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

double clamp(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

}  // namespace

const char* task_name(Task t) {
  switch (t) {
    case Task::cn: return "cn";
    case Task::po_cn: return "po-cn";
    case Task::sync_cn: return "sync-cn";
    case Task::sequential_cn: return "sequential-cn";
    case Task::swapping_cn: return "swapping-cn";
    case Task::waterworld: return "waterworld";
  }
  return "?";
}

Task task_from_name(const std::string& name) {
  if (name == "cn") return Task::cn;
  if (name == "po-cn") return Task::po_cn;
  if (name == "sync-cn") return Task::sync_cn;
  if (name == "sequential-cn") return Task::sequential_cn;
  if (name == "swapping-cn") return Task::swapping_cn;
  if (name == "waterworld") return Task::waterworld;
  throw ConfigError("unknown task: " + name);
}

int EnvConfig::obs_dim() const {
  switch (task) {
    case Task::po_cn:
      // self pos+vel, then [dx, dy, visible] per landmark and per other agent
      return 4 + 3 * n_landmarks() + 3 * (n_agents - 1);
    case Task::waterworld:
      // self pos+vel, then per sensor: nearest food/poison/agent reading
      return 4 + 3 * n_sensors;
    default:
      return 4 + 2 * n_landmarks() + 2 * (n_agents - 1);
  }
}

void EnvConfig::validate() const {
  if (n_agents < 2) throw ConfigError("env config: n_agents must be >= 2");
  if (horizon <= 0) throw ConfigError("env config: horizon must be positive");
  if (task == Task::po_cn || task == Task::waterworld) {
    if (vision_radius <= 0.0) {
      throw ConfigError("env config: vision_radius must be positive");
    }
  }
  if (task == Task::waterworld) {
    if (n_food <= 0 || n_poison < 0) {
      throw ConfigError("env config: waterworld needs n_food > 0, n_poison >= 0");
    }
    if (n_sensors <= 0) throw ConfigError("env config: n_sensors must be positive");
  }
  if (agent_radius <= 0.0 || (task != Task::waterworld && landmark_radius <= 0.0)) {
    throw ConfigError("env config: radii must be positive");
  }
}

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)), rng_(0) {
  cfg_.validate();
}

namespace {

constexpr int kPlacementRetries = 1000;
constexpr double kPlacementMargin = 0.9;  // keep spawns off the walls

Vec2 sample_pos(Rng& rng) {
  return {rng.uniform(-kPlacementMargin, kPlacementMargin),
          rng.uniform(-kPlacementMargin, kPlacementMargin)};
}

}  // namespace

void Env::place_entities() {
  std::vector<Body>* groups[] = {&world_.agents, &world_.landmarks, &world_.food,
                                 &world_.poison};
  std::vector<const Body*> placed;
  for (auto* group : groups) {
    for (Body& b : *group) {
      bool ok = false;
      for (int attempt = 0; attempt < kPlacementRetries && !ok; ++attempt) {
        b.pos = sample_pos(rng_);
        ok = true;
        for (const Body* other : placed) {
          if (dist(b.pos, other->pos) <= b.radius + other->radius) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) {
        throw ConfigError("env reset: cannot place entities without overlap; "
                          "arena too crowded");
      }
      b.vel = {0.0, 0.0};
      placed.push_back(&b);
    }
  }
}

std::vector<Vec> Env::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  world_ = WorldState{};
  world_.agents.assign(cfg_.n_agents, Body{{}, {}, cfg_.agent_radius});
  world_.landmarks.assign(cfg_.n_landmarks(), Body{{}, {}, cfg_.landmark_radius});
  if (cfg_.task == Task::waterworld) {
    world_.food.assign(cfg_.n_food, Body{{}, {}, cfg_.food_radius});
    world_.poison.assign(cfg_.n_poison, Body{{}, {}, cfg_.poison_radius});
  }
  place_entities();
  if (cfg_.task == Task::swapping_cn) {
    world_.assignment.resize(cfg_.n_agents);
    for (int i = 0; i < cfg_.n_agents; ++i) world_.assignment[i] = i;
  }
  world_.was_occupied.assign(world_.landmarks.size(), false);

  std::vector<Vec> obs(cfg_.n_agents);
  for (int i = 0; i < cfg_.n_agents; ++i) obs[i] = observe(i);
  return obs;
}

StepResult Env::step(const std::vector<Vec>& joint_actions) {
  if (static_cast<int>(joint_actions.size()) != cfg_.n_agents) {
    throw ConfigError("env step: expected " + std::to_string(cfg_.n_agents) +
                      " actions, got " + std::to_string(joint_actions.size()));
  }
  const int adim = cfg_.action_dim();
  for (const Vec& a : joint_actions) {
    if (static_cast<int>(a.size()) != adim) {
      throw ConfigError("env step: action length " + std::to_string(a.size()) +
                        " != " + std::to_string(adim));
    }
  }

  // Agent physics.
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const Vec& a = joint_actions[i];
    Vec2 ctrl;
    if (cfg_.discrete()) {
      ctrl = {a[1] - a[2], a[3] - a[4]};
    } else {
      ctrl = {clamp(a[0], -1.0, 1.0), clamp(a[1], -1.0, 1.0)};
    }
    Body& body = world_.agents[i];
    body.vel.x = cfg_.damping * body.vel.x + cfg_.force_scale * ctrl.x;
    body.vel.y = cfg_.damping * body.vel.y + cfg_.force_scale * ctrl.y;
    const double speed = std::hypot(body.vel.x, body.vel.y);
    if (speed > cfg_.max_speed) {
      body.vel.x *= cfg_.max_speed / speed;
      body.vel.y *= cfg_.max_speed / speed;
    }
    body.pos.x = clamp(body.pos.x + body.vel.x, -1.0, 1.0);
    body.pos.y = clamp(body.pos.y + body.vel.y, -1.0, 1.0);
  }

  // Waterworld targets drift with a seeded random walk and bounce off walls.
  if (cfg_.task == Task::waterworld) {
    std::vector<Body>* targets[] = {&world_.food, &world_.poison};
    for (auto* group : targets) {
      for (Body& b : *group) {
        b.vel.x += rng_.normal(0.0, cfg_.target_drift);
        b.vel.y += rng_.normal(0.0, cfg_.target_drift);
        const double speed = std::hypot(b.vel.x, b.vel.y);
        if (speed > cfg_.target_max_speed) {
          b.vel.x *= cfg_.target_max_speed / speed;
          b.vel.y *= cfg_.target_max_speed / speed;
        }
        b.pos.x += b.vel.x;
        b.pos.y += b.vel.y;
        if (b.pos.x < -1.0 || b.pos.x > 1.0) {
          b.vel.x = -b.vel.x;
          b.pos.x = clamp(b.pos.x, -1.0, 1.0);
        }
        if (b.pos.y < -1.0 || b.pos.y > 1.0) {
          b.vel.y = -b.vel.y;
          b.pos.y = clamp(b.pos.y, -1.0, 1.0);
        }
      }
    }
  }

  StepResult out;
  out.rewards.assign(cfg_.n_agents, 0.0);
  out.flags = score_step(joint_actions, out.rewards);

  world_.t += 1;
  out.done = world_.t >= cfg_.horizon;
  out.obs.resize(cfg_.n_agents);
  for (int i = 0; i < cfg_.n_agents; ++i) out.obs[i] = observe(i);
  return out;
}

StepFlags Env::score_step(const std::vector<Vec>& /*actions*/, Vec& rewards) {
  StepFlags flags;
  const int n = cfg_.n_agents;

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (dist(world_.agents[i].pos, world_.agents[j].pos) <
          world_.agents[i].radius + world_.agents[j].radius) {
        flags.collisions += 1;
      }
    }
  }

  const double thr = cfg_.occupation_threshold();
  std::vector<bool> occupied(world_.landmarks.size(), false);
  std::vector<double> min_dist(world_.landmarks.size(), 0.0);
  for (size_t l = 0; l < world_.landmarks.size(); ++l) {
    double best = 1e300;
    for (int i = 0; i < n; ++i) {
      const double d = dist(world_.agents[i].pos, world_.landmarks[l].pos);
      best = std::min(best, d);
      if (d < thr) occupied[l] = true;
    }
    min_dist[l] = best;
  }
  const int occupied_count =
      static_cast<int>(std::count(occupied.begin(), occupied.end(), true));

  double team = 0.0;
  switch (cfg_.task) {
    case Task::cn:
    case Task::po_cn: {
      for (double d : min_dist) team -= d;
      team -= 2.0 * cfg_.collision_penalty * flags.collisions;
      flags.sync_occupation = !occupied.empty() &&
                              occupied_count == static_cast<int>(occupied.size());
      flags.not_sync_occupation = occupied_count == 1;
      break;
    }
    case Task::sync_cn: {
      flags.sync_occupation = !occupied.empty() &&
                              occupied_count == static_cast<int>(occupied.size());
      flags.not_sync_occupation = occupied_count == 1;
      if (flags.sync_occupation) team += cfg_.sync_reward;
      if (flags.not_sync_occupation) team -= cfg_.not_sync_penalty;
      for (double d : min_dist) team -= cfg_.sync_shaping * d;
      break;
    }
    case Task::sequential_cn: {
      flags.sync_occupation = !occupied.empty() &&
                              occupied_count == static_cast<int>(occupied.size());
      flags.not_sync_occupation = occupied_count == 1;
      if (occupied_count == 1) {
        for (size_t l = 0; l < occupied.size(); ++l) {
          if (occupied[l] && !world_.was_occupied[l]) flags.new_occupations += 1;
        }
      }
      team += cfg_.sequential_reward * flags.new_occupations;
      if (occupied_count >= 2) team -= cfg_.simultaneous_penalty;
      for (size_t l = 0; l < occupied.size(); ++l) {
        world_.was_occupied[l] = occupied[l];
      }
      break;
    }
    case Task::swapping_cn: {
      int on_assigned = 0;
      double shaped = 0.0;
      for (int i = 0; i < n; ++i) {
        const Body& lm = world_.landmarks[world_.assignment[i]];
        const double d = dist(world_.agents[i].pos, lm.pos);
        if (d < thr) on_assigned += 1;
        shaped += d;
      }
      const bool all_on = on_assigned == n;
      flags.sync_occupation = all_on;
      flags.not_sync_occupation = on_assigned == 1;
      if (all_on) team += cfg_.sync_reward;
      if (flags.not_sync_occupation) team -= cfg_.not_sync_penalty;
      team -= cfg_.sync_shaping * shaped;
      if (all_on && !world_.was_all_assigned && world_.completions_total < 2) {
        world_.completions_total += 1;
        flags.completions = 1;
        if (world_.completions_total == 1) {
          // One swap per episode: rotate every agent's target.
          std::vector<int> next(world_.assignment.size());
          for (int i = 0; i < n; ++i) {
            next[i] = world_.assignment[(i + 1) % n];
          }
          world_.assignment = next;
        }
      }
      world_.was_all_assigned = all_on;
      break;
    }
    case Task::waterworld: {
      const double food_thr = cfg_.agent_radius + cfg_.food_radius;
      for (Body& f : world_.food) {
        bool all_reach = true;
        for (int i = 0; i < n && all_reach; ++i) {
          if (dist(world_.agents[i].pos, f.pos) >= food_thr) all_reach = false;
        }
        if (all_reach) {
          flags.food_captured += 1;
          f.pos = sample_pos(rng_);
          f.vel = {0.0, 0.0};
        }
      }
      const double poison_thr = cfg_.agent_radius + cfg_.poison_radius;
      std::vector<int> hits(n, 0);
      for (const Body& p : world_.poison) {
        for (int i = 0; i < n; ++i) {
          if (dist(world_.agents[i].pos, p.pos) < poison_thr) hits[i] += 1;
        }
      }
      for (int i = 0; i < n; ++i) {
        flags.poison_hits += hits[i];
        rewards[i] = cfg_.food_reward * flags.food_captured -
                     cfg_.poison_penalty * hits[i];
      }
      return flags;
    }
  }

  for (int i = 0; i < n; ++i) rewards[i] = team;
  return flags;
}

Vec Env::observe(int agent) const {
  if (agent < 0 || agent >= cfg_.n_agents) {
    throw ConfigError("observe: agent index out of range");
  }
  const Body& self = world_.agents[agent];
  Vec obs;
  obs.reserve(cfg_.obs_dim());
  obs.push_back(self.pos.x);
  obs.push_back(self.pos.y);
  obs.push_back(self.vel.x);
  obs.push_back(self.vel.y);

  auto push_entity = [&](const Vec2& pos, bool partial) {
    const double dx = pos.x - self.pos.x;
    const double dy = pos.y - self.pos.y;
    if (!partial) {
      obs.push_back(dx);
      obs.push_back(dy);
      return;
    }
    const bool visible = std::hypot(dx, dy) < cfg_.vision_radius;
    obs.push_back(visible ? dx : 0.0);
    obs.push_back(visible ? dy : 0.0);
    obs.push_back(visible ? 1.0 : 0.0);
  };

  switch (cfg_.task) {
    case Task::waterworld: {
      // K evenly spaced range sensors; each reports the nearest in-range
      // food/poison/other-agent distance in its angular sector, 1.0 if none.
      const int k = cfg_.n_sensors;
      std::vector<double> food_read(k, 1.0), poison_read(k, 1.0), agent_read(k, 1.0);
      auto scan = [&](const Vec2& pos, std::vector<double>& readings) {
        const double dx = pos.x - self.pos.x;
        const double dy = pos.y - self.pos.y;
        const double d = std::hypot(dx, dy);
        if (d >= cfg_.vision_radius) return;
        double angle = std::atan2(dy, dx);
        if (angle < 0.0) angle += 2.0 * M_PI;
        const int idx =
            static_cast<int>(std::lround(angle / (2.0 * M_PI) * k)) % k;
        readings[idx] = std::min(readings[idx], d / cfg_.vision_radius);
      };
      for (const Body& f : world_.food) scan(f.pos, food_read);
      for (const Body& p : world_.poison) scan(p.pos, poison_read);
      for (int i = 0; i < cfg_.n_agents; ++i) {
        if (i != agent) scan(world_.agents[i].pos, agent_read);
      }
      for (int s = 0; s < k; ++s) {
        obs.push_back(food_read[s]);
        obs.push_back(poison_read[s]);
        obs.push_back(agent_read[s]);
      }
      break;
    }
    default: {
      const bool partial = cfg_.task == Task::po_cn;
      if (cfg_.task == Task::swapping_cn) {
        // Assigned landmark first so the target swap is observable.
        push_entity(world_.landmarks[world_.assignment[agent]].pos, partial);
        for (size_t l = 0; l < world_.landmarks.size(); ++l) {
          if (static_cast<int>(l) != world_.assignment[agent]) {
            push_entity(world_.landmarks[l].pos, partial);
          }
        }
      } else {
        for (const Body& lm : world_.landmarks) push_entity(lm.pos, partial);
      }
      for (int i = 0; i < cfg_.n_agents; ++i) {
        if (i != agent) push_entity(world_.agents[i].pos, partial);
      }
      break;
    }
  }
  return obs;
}

std::vector<int> phase_of(const EpisodeTrace& trace, Task task) {
  std::vector<int> labels(trace.rows.size(), 0);
  int cum = 0;
  for (size_t t = 0; t < trace.rows.size(); ++t) {
    const StepFlags& f = trace.rows[t].flags;
    switch (task) {
      case Task::cn:
      case Task::po_cn:
        labels[t] = 0;
        break;
      case Task::sync_cn:
        labels[t] = f.sync_occupation ? 2 : (f.not_sync_occupation ? 1 : 0);
        break;
      case Task::sequential_cn:
        labels[t] = cum;
        cum += f.new_occupations;
        break;
      case Task::swapping_cn:
        labels[t] = std::min(cum, 2);
        cum += f.completions;
        break;
      case Task::waterworld:
        labels[t] = cum;
        cum += f.food_captured;
        break;
    }
  }
  return labels;
}

void write_trace_csv(const EpisodeTrace& trace, std::ostream& os) {
  os << "t";
  for (int i = 0; i < trace.n_agents; ++i) os << ",pos_x" << i << ",pos_y" << i;
  for (int i = 0; i < trace.n_agents; ++i) {
    for (int d = 0; d < trace.action_dim; ++d) os << ",a" << i << "_" << d;
  }
  for (int i = 0; i < trace.n_agents; ++i) os << ",reward" << i;
  os << ",collisions,sync_occupation,not_sync_occupation,new_occupations,"
        "completions,food_captured,poison_hits,phase\n";
  for (const TraceRow& row : trace.rows) {
    os << row.t;
    for (double v : row.agent_pos) os << "," << csv::g17(v);
    for (double v : row.actions) os << "," << csv::g17(v);
    for (double v : row.rewards) os << "," << csv::g17(v);
    os << "," << row.flags.collisions << "," << (row.flags.sync_occupation ? 1 : 0)
       << "," << (row.flags.not_sync_occupation ? 1 : 0) << ","
       << row.flags.new_occupations << "," << row.flags.completions << ","
       << row.flags.food_captured << "," << row.flags.poison_hits << ","
       << row.phase << "\n";
  }
}

void write_trace_csv(const EpisodeTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write trace csv: " + path);
  write_trace_csv(trace, os);
}

}  // namespace memshare::env
