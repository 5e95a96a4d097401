#include "memshare/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "memshare/csv.hpp"
#include "memshare/errors.hpp"

namespace memshare::eval {

EpisodeMetrics metrics_from_trace(const env::EpisodeTrace& trace,
                                  const env::EnvConfig& ecfg,
                                  const Vec& reward_sum) {
  EpisodeMetrics m;
  m.seed = trace.seed;
  for (double r : reward_sum) m.reward += r;
  m.reward /= static_cast<double>(reward_sum.size());

  for (const env::TraceRow& row : trace.rows) {
    m.collisions += row.flags.collisions;
    m.sync_occupations += row.flags.sync_occupation ? 1.0 : 0.0;
    m.not_sync_occupations += row.flags.not_sync_occupation ? 1.0 : 0.0;
    m.food_targets += row.flags.food_captured;
    m.poison_targets += row.flags.poison_hits;
  }

  switch (ecfg.task) {
    case env::Task::cn:
    case env::Task::po_cn:
    case env::Task::sync_cn: {
      // Mean over steps and landmarks of the closest-agent distance.
      const size_t n_lm = trace.landmark_pos.size() / 2;
      if (n_lm == 0 || trace.rows.empty()) break;
      double acc = 0.0;
      for (const env::TraceRow& row : trace.rows) {
        for (size_t l = 0; l < n_lm; ++l) {
          double best = 1e300;
          for (int i = 0; i < trace.n_agents; ++i) {
            const double dx = row.agent_pos[2 * i] - trace.landmark_pos[2 * l];
            const double dy = row.agent_pos[2 * i + 1] - trace.landmark_pos[2 * l + 1];
            best = std::min(best, std::hypot(dx, dy));
          }
          acc += best;
        }
      }
      m.avg_distance = acc / (static_cast<double>(trace.rows.size()) * n_lm);
      break;
    }
    case env::Task::sequential_cn:
    case env::Task::swapping_cn: {
      // Cumulative path length summed over agents.
      std::vector<double> prev = trace.initial_pos;
      double acc = 0.0;
      for (const env::TraceRow& row : trace.rows) {
        for (int i = 0; i < trace.n_agents; ++i) {
          acc += std::hypot(row.agent_pos[2 * i] - prev[2 * i],
                            row.agent_pos[2 * i + 1] - prev[2 * i + 1]);
        }
        prev = row.agent_pos;
      }
      m.avg_distance = acc;
      break;
    }
    case env::Task::waterworld:
      break;
  }
  return m;
}

namespace {

Stat stat_of(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

}  // namespace

MetricsReport summarize(const std::vector<EpisodeMetrics>& rows) {
  MetricsReport rep;
  rep.n_episodes = static_cast<long>(rows.size());
  auto collect = [&](auto field) {
    std::vector<double> xs;
    xs.reserve(rows.size());
    for (const EpisodeMetrics& r : rows) xs.push_back(r.*field);
    return stat_of(xs);
  };
  rep.reward = collect(&EpisodeMetrics::reward);
  rep.avg_distance = collect(&EpisodeMetrics::avg_distance);
  rep.collisions = collect(&EpisodeMetrics::collisions);
  rep.sync_occupations = collect(&EpisodeMetrics::sync_occupations);
  rep.not_sync_occupations = collect(&EpisodeMetrics::not_sync_occupations);
  rep.food_targets = collect(&EpisodeMetrics::food_targets);
  rep.poison_targets = collect(&EpisodeMetrics::poison_targets);
  return rep;
}

void check_compatible(const train::Model& model, const env::EnvConfig& ecfg) {
  const env::EnvConfig& trained = model.ecfg;
  if (trained.obs_dim() != ecfg.obs_dim() ||
      trained.action_dim() != ecfg.action_dim() ||
      trained.n_agents != ecfg.n_agents) {
    throw IncompatibilityError(
        "checkpoint expects obs/action/agents " +
        std::to_string(trained.obs_dim()) + "/" +
        std::to_string(trained.action_dim()) + "/" +
        std::to_string(trained.n_agents) + ", task requires " +
        std::to_string(ecfg.obs_dim()) + "/" + std::to_string(ecfg.action_dim()) +
        "/" + std::to_string(ecfg.n_agents));
  }
}

namespace {

MetricsReport run_eval(train::Model& model, const env::EnvConfig& ecfg,
                       const EvalOptions& opts, double noise_std,
                       std::vector<EpisodeMetrics>* rows_out) {
  check_compatible(model, ecfg);
  if (noise_std > 0.0 && model.tcfg.algo != train::Algo::md_maddpg) {
    throw ConfigError("memory corruption applies only to md-maddpg checkpoints");
  }
  if (opts.n_episodes <= 0) throw ConfigError("evaluate: n_episodes must be positive");

  const Rng root(opts.seed);
  std::vector<EpisodeMetrics> rows(static_cast<size_t>(opts.n_episodes));
  auto worker = [&](long begin, long end) {
    env::Env env(ecfg);
    for (long e = begin; e < end; ++e) {
      const std::uint64_t ep_seed =
          root.child("eval-episode", static_cast<std::uint64_t>(e)).next_u64();
      Rng corruption =
          root.child("corruption", static_cast<std::uint64_t>(e));
      train::RolloutOptions ro;
      ro.explore = false;
      ro.record_trace = true;
      if (noise_std > 0.0) {
        ro.corruption_std = noise_std;
        ro.corruption_rng = &corruption;
      }
      train::EpisodeResult ep = train::run_episode(model, env, ep_seed, ro);
      rows[e] = metrics_from_trace(ep.trace, ecfg, ep.reward_sum);
      rows[e].episode = e;
    }
  };

  const int jobs = std::max(1, opts.jobs);
  if (jobs == 1 || opts.n_episodes < 2 * jobs) {
    worker(0, opts.n_episodes);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (opts.n_episodes + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
      const long b = j * chunk;
      const long e = std::min(opts.n_episodes, b + chunk);
      if (b >= e) break;
      pool.emplace_back(worker, b, e);
    }
    for (std::thread& t : pool) t.join();
  }

  if (rows_out != nullptr) *rows_out = rows;
  return summarize(rows);
}

}  // namespace

MetricsReport evaluate(train::Model& model, const env::EnvConfig& ecfg,
                       const EvalOptions& opts,
                       std::vector<EpisodeMetrics>* rows) {
  return run_eval(model, ecfg, opts, 0.0, rows);
}

MetricsReport evaluate_corrupted(train::Model& model, const env::EnvConfig& ecfg,
                                 const EvalOptions& opts, double noise_std,
                                 std::vector<EpisodeMetrics>* rows) {
  if (model.tcfg.algo != train::Algo::md_maddpg) {
    throw ConfigError("memory corruption applies only to md-maddpg checkpoints");
  }
  if (noise_std < 0.0) throw ConfigError("noise std must be non-negative");
  return run_eval(model, ecfg, opts, noise_std, rows);
}

void write_episode_csv(const std::vector<EpisodeMetrics>& rows,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write episode metrics: " + path);
  os << "episode,seed,reward,avg_distance,collisions,sync_occupations,"
        "not_sync_occupations,food_targets,poison_targets\n";
  for (const EpisodeMetrics& r : rows) {
    os << r.episode << "," << r.seed << "," << csv::g17(r.reward) << ","
       << csv::g17(r.avg_distance) << "," << csv::g17(r.collisions) << ","
       << csv::g17(r.sync_occupations) << "," << csv::g17(r.not_sync_occupations)
       << "," << csv::g17(r.food_targets) << "," << csv::g17(r.poison_targets)
       << "\n";
  }
}

void write_report_csv(const MetricsReport& rep, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write report: " + path);
  os << "n_episodes,reward_mean,reward_std,avg_distance_mean,avg_distance_std,"
        "collisions_mean,collisions_std,sync_occupations_mean,"
        "sync_occupations_std,not_sync_occupations_mean,"
        "not_sync_occupations_std,food_targets_mean,food_targets_std,"
        "poison_targets_mean,poison_targets_std\n";
  os << rep.n_episodes << "," << csv::g17(rep.reward.mean) << ","
     << csv::g17(rep.reward.stddev) << "," << csv::g17(rep.avg_distance.mean)
     << "," << csv::g17(rep.avg_distance.stddev) << ","
     << csv::g17(rep.collisions.mean) << "," << csv::g17(rep.collisions.stddev)
     << "," << csv::g17(rep.sync_occupations.mean) << ","
     << csv::g17(rep.sync_occupations.stddev) << ","
     << csv::g17(rep.not_sync_occupations.mean) << ","
     << csv::g17(rep.not_sync_occupations.stddev) << ","
     << csv::g17(rep.food_targets.mean) << "," << csv::g17(rep.food_targets.stddev)
     << "," << csv::g17(rep.poison_targets.mean) << ","
     << csv::g17(rep.poison_targets.stddev) << "\n";
}

const char* grid_axis_name(GridAxis a) {
  switch (a) {
    case GridAxis::n_agents: return "n-agents";
    case GridAxis::memory_size: return "memory-size";
    case GridAxis::seed: return "seed";
    case GridAxis::variant: return "variant";
  }
  return "?";
}

GridAxis grid_axis_from_name(const std::string& name) {
  if (name == "n-agents") return GridAxis::n_agents;
  if (name == "memory-size") return GridAxis::memory_size;
  if (name == "seed") return GridAxis::seed;
  if (name == "variant") return GridAxis::variant;
  throw ConfigError("unknown sweep axis: " + name);
}

std::vector<GridCell> run_experiment_grid(const train::TrainConfig& base_t,
                                          const env::EnvConfig& base_e,
                                          GridAxis axis,
                                          const std::vector<std::string>& values,
                                          long eval_episodes,
                                          std::uint64_t eval_seed) {
  if (values.empty()) throw ConfigError("experiment grid needs at least one value");
  std::vector<GridCell> cells;
  for (const std::string& value : values) {
    GridCell cell;
    cell.axis = grid_axis_name(axis);
    cell.value = value;
    try {
      train::TrainConfig tcfg = base_t;
      env::EnvConfig ecfg = base_e;
      switch (axis) {
        case GridAxis::n_agents:
          ecfg.n_agents = std::stoi(value);
          break;
        case GridAxis::memory_size:
          tcfg.memory_size = std::stoi(value);
          break;
        case GridAxis::seed:
          tcfg.seed = static_cast<std::uint64_t>(std::stoull(value));
          break;
        case GridAxis::variant:
          tcfg.variant = md::variant_from_name(value);
          if (tcfg.algo != train::Algo::md_maddpg) {
            throw ConfigError("ablation variants require algo md-maddpg");
          }
          break;
      }
      train::TrainResult tr = train::train(tcfg, ecfg);
      EvalOptions opts;
      opts.n_episodes = eval_episodes;
      opts.seed = eval_seed;
      cell.report = evaluate(tr.model, ecfg, opts);
      cell.ok = true;
    } catch (const std::exception& err) {
      cell.ok = false;
      cell.error = err.what();
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

void write_grid_csv(const std::vector<GridCell>& cells, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write grid csv: " + path);
  os << "axis,value,status,error,n_episodes,reward_mean,reward_std,"
        "avg_distance_mean,avg_distance_std,collisions_mean,collisions_std,"
        "sync_occupations_mean,sync_occupations_std,not_sync_occupations_mean,"
        "not_sync_occupations_std,food_targets_mean,food_targets_std,"
        "poison_targets_mean,poison_targets_std\n";
  for (const GridCell& c : cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    const MetricsReport& r = c.report;
    os << c.axis << "," << c.value << "," << (c.ok ? "ok" : "failed") << ","
       << err << "," << r.n_episodes << "," << csv::g17(r.reward.mean) << ","
       << csv::g17(r.reward.stddev) << "," << csv::g17(r.avg_distance.mean) << ","
       << csv::g17(r.avg_distance.stddev) << "," << csv::g17(r.collisions.mean)
       << "," << csv::g17(r.collisions.stddev) << ","
       << csv::g17(r.sync_occupations.mean) << ","
       << csv::g17(r.sync_occupations.stddev) << ","
       << csv::g17(r.not_sync_occupations.mean) << ","
       << csv::g17(r.not_sync_occupations.stddev) << ","
       << csv::g17(r.food_targets.mean) << "," << csv::g17(r.food_targets.stddev)
       << "," << csv::g17(r.poison_targets.mean) << ","
       << csv::g17(r.poison_targets.stddev) << "\n";
  }
}

}  // namespace memshare::eval
