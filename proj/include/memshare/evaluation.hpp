#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memshare/envs.hpp"
#include "memshare/training.hpp"

namespace memshare::eval {

using nn::Vec;

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
};

// Table-style metric summary over evaluation episodes; metrics that do not
// apply to a task are reported as zeros.
struct MetricsReport {
  long n_episodes = 0;
  Stat reward;
  Stat avg_distance;
  Stat collisions;
  Stat sync_occupations;
  Stat not_sync_occupations;
  Stat food_targets;
  Stat poison_targets;
};

struct EpisodeMetrics {
  long episode = 0;
  std::uint64_t seed = 0;
  double reward = 0.0;  // episode return, averaged over agents
  double avg_distance = 0.0;
  double collisions = 0.0;
  double sync_occupations = 0.0;
  double not_sync_occupations = 0.0;
  double food_targets = 0.0;
  double poison_targets = 0.0;
};

EpisodeMetrics metrics_from_trace(const env::EpisodeTrace& trace,
                                  const env::EnvConfig& ecfg,
                                  const Vec& reward_sum);

MetricsReport summarize(const std::vector<EpisodeMetrics>& rows);

struct EvalOptions {
  long n_episodes = 1000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Greedy execution (no exploration noise, hard argmax), memory reset per
// episode. Deterministic given (model, seed).
MetricsReport evaluate(train::Model& model, const env::EnvConfig& ecfg,
                       const EvalOptions& opts,
                       std::vector<EpisodeMetrics>* rows = nullptr);

// As evaluate, but N(0, noise_std^2) is added to the message after every
// write commit, execution time only. Episode seeds are shared with evaluate
// so clean/corrupted comparisons are paired.
MetricsReport evaluate_corrupted(train::Model& model, const env::EnvConfig& ecfg,
                                 const EvalOptions& opts, double noise_std,
                                 std::vector<EpisodeMetrics>* rows = nullptr);

void write_episode_csv(const std::vector<EpisodeMetrics>& rows,
                       const std::string& path);
void write_report_csv(const MetricsReport& report, const std::string& path);

enum class GridAxis { n_agents, memory_size, seed, variant };

const char* grid_axis_name(GridAxis a);
GridAxis grid_axis_from_name(const std::string& name);

struct GridCell {
  std::string axis;
  std::string value;
  bool ok = false;
  std::string error;
  MetricsReport report;
};

// One independent train + evaluate per grid point; a failed cell is recorded
// and the grid continues.
std::vector<GridCell> run_experiment_grid(const train::TrainConfig& base_t,
                                          const env::EnvConfig& base_e,
                                          GridAxis axis,
                                          const std::vector<std::string>& values,
                                          long eval_episodes,
                                          std::uint64_t eval_seed);

void write_grid_csv(const std::vector<GridCell>& cells, const std::string& path);

// Throws IncompatibilityError when the model nets cannot consume the task's
// observation/action dimensions.
void check_compatible(const train::Model& model, const env::EnvConfig& ecfg);

}  // namespace memshare::eval
