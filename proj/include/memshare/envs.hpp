#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "memshare/nn.hpp"
#include "memshare/rng.hpp"

namespace memshare::env {

using nn::Vec;

enum class Task { cn, po_cn, sync_cn, sequential_cn, swapping_cn, waterworld };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Arena is [-1,1]^2 with hard clamping; all distances in world units.
struct EnvConfig {
  Task task = Task::cn;
  int n_agents = 2;
  int horizon = 100;
  double vision_radius = 0.5;  // po_cn and waterworld
  int n_food = 5;
  int n_poison = 10;
  int n_sensors = 16;
  double damping = 0.75;
  double force_scale = 0.1;
  double max_speed = 1.0;
  double agent_radius = 0.05;
  double landmark_radius = 0.05;
  double food_radius = 0.06;
  double poison_radius = 0.04;
  double target_drift = 0.02;      // waterworld target velocity random walk
  double target_max_speed = 0.05;
  double collision_penalty = 1.0;
  double sync_reward = 2.0;
  double not_sync_penalty = 0.25;
  double sync_shaping = 0.01;
  double sequential_reward = 2.0;
  double simultaneous_penalty = 1.0;
  double food_reward = 10.0;
  double poison_penalty = 1.0;

  bool discrete() const { return task != Task::waterworld; }
  int n_landmarks() const { return task == Task::waterworld ? 0 : n_agents; }
  // Discrete: 5-way move (stay, +x, -x, +y, -y) as a relaxed one-hot;
  // continuous: force direction in [-1,1]^2.
  int action_dim() const { return discrete() ? 5 : 2; }
  int obs_dim() const;
  double occupation_threshold() const { return agent_radius + landmark_radius; }
  void validate() const;
};

struct Body {
  Vec2 pos;
  Vec2 vel;
  double radius = 0.0;
};

struct WorldState {
  std::vector<Body> agents;
  std::vector<Body> landmarks;
  std::vector<Body> food;
  std::vector<Body> poison;
  std::vector<int> assignment;       // swapping_cn: agent -> landmark
  std::vector<bool> was_occupied;    // per landmark, previous step
  bool was_all_assigned = false;     // swapping_cn edge detection
  int completions_total = 0;
  int t = 0;
};

struct StepFlags {
  int collisions = 0;            // colliding unordered agent pairs
  bool sync_occupation = false;  // all landmarks (or assignments) occupied
  bool not_sync_occupation = false;  // exactly one occupied
  int new_occupations = 0;       // sequential_cn: landmark newly occupied alone
  int completions = 0;           // swapping_cn: simultaneous assigned occupation
  int food_captured = 0;
  int poison_hits = 0;           // contacts summed over agents
};

struct StepResult {
  std::vector<Vec> obs;
  Vec rewards;
  StepFlags flags;
  bool done = false;
};

class Env {
 public:
  explicit Env(EnvConfig cfg);

  // Deterministic for a given (config, seed); rejection sampling keeps the
  // initial layout overlap-free.
  std::vector<Vec> reset(std::uint64_t seed);
  StepResult step(const std::vector<Vec>& joint_actions);
  Vec observe(int agent) const;

  const WorldState& state() const { return world_; }
  // Scripted placements for tests and tools.
  WorldState& mutable_state() { return world_; }
  const EnvConfig& config() const { return cfg_; }

 private:
  void place_entities();
  StepFlags score_step(const std::vector<Vec>& actions, Vec& rewards);

  EnvConfig cfg_;
  WorldState world_;
  Rng rng_;
};

struct TraceRow {
  int t = 0;
  std::vector<double> agent_pos;  // x0,y0,x1,y1,...
  std::vector<double> actions;    // executed, n_agents * action_dim
  Vec rewards;
  StepFlags flags;
  int phase = 0;
};

struct EpisodeTrace {
  Task task = Task::cn;
  int n_agents = 0;
  int action_dim = 0;
  std::uint64_t seed = 0;
  std::vector<double> initial_pos;   // agent positions after reset
  std::vector<double> landmark_pos;  // static over an episode
  std::vector<TraceRow> rows;
};

// Per-timestep sub-task labels derived from the recorded event flags.
std::vector<int> phase_of(const EpisodeTrace& trace, Task task);

void write_trace_csv(const EpisodeTrace& trace, std::ostream& os);
void write_trace_csv(const EpisodeTrace& trace, const std::string& path);

}  // namespace memshare::env
