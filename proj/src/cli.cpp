#include "memshare/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "memshare/commanalysis.hpp"
#include "memshare/config.hpp"
#include "memshare/errors.hpp"
#include "memshare/evaluation.hpp"
#include "memshare/training.hpp"

namespace memshare::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersionTag = "memshare 0.1.0";

std::string timestamp_utc() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc;
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm_utc);
  return buf;
}

std::string iso_utc() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc;
  gmtime_r(&now, &tm_utc);
  char buf[40];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

fs::path runs_root(const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  if (const char* env = std::getenv("MEMSHARE_RUNS_DIR"); env != nullptr && *env) {
    return env;
  }
  return "runs";
}

fs::path make_run_dir(const fs::path& root, const std::string& stem) {
  fs::create_directories(root);
  fs::path dir = root / (stem + "-" + timestamp_utc());
  for (int suffix = 1; fs::exists(dir); ++suffix) {
    dir = root / (stem + "-" + timestamp_utc() + "-" + std::to_string(suffix));
  }
  fs::create_directories(dir);
  return dir;
}

struct Manifest {
  fs::path path;
  json doc;

  void start(const json& resolved, std::uint64_t seed) {
    doc["version"] = kVersionTag;
    doc["config"] = resolved;
    doc["seed"] = seed;
    doc["started"] = iso_utc();
    doc["finished"] = nullptr;
    doc["status"] = "running";
    doc["artifacts"] = json::object();
    flush();
  }

  void add_artifact(const std::string& name, const std::string& rel) {
    doc["artifacts"][name] = rel;
  }

  void finish(const std::string& status) {
    doc["finished"] = iso_utc();
    doc["status"] = status;
    flush();
  }

  void flush() {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write manifest: " + path.string());
    os << doc.dump(2) << "\n";
  }
};

std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& sets, const std::string& seed,
    const std::string& episodes) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const std::string& kv : sets) {
    const auto pos = kv.find('=');
    if (pos == std::string::npos || pos == 0) {
      throw ConfigError("override \"" + kv + "\" is not key=value");
    }
    overrides.emplace_back(kv.substr(0, pos), kv.substr(pos + 1));
  }
  if (!seed.empty()) overrides.emplace_back("seed", seed);
  if (!episodes.empty()) overrides.emplace_back("episodes", episodes);
  return overrides;
}

fs::path model_dir_of(const fs::path& run) {
  if (fs::exists(run / "model.json")) return run;
  if (fs::exists(run / "model" / "model.json")) return run / "model";
  throw ConfigError("no model checkpoint under " + run.string());
}

int cmd_train(const std::string& config_path,
              const std::vector<std::pair<std::string, std::string>>& overrides,
              const std::string& out_flag) {
  config::RunConfig rc = config::load_run_config(config_path, overrides);
  const std::string stem = std::string(env::task_name(rc.env.task)) + "-" +
                           train::algo_name(rc.train.algo) + "-" +
                           std::to_string(rc.train.seed);
  const fs::path dir = make_run_dir(runs_root(out_flag), stem);
  Manifest manifest{dir / "manifest.json", {}};
  manifest.start(rc.resolved, rc.train.seed);
  try {
    train::TrainResult result = train::train(rc.train, rc.env, dir / "fault");
    train::save_model(result.model, dir / "model");
    train::write_curve_csv(result.curve, rc.env.n_agents,
                           (dir / "curve.csv").string());
    manifest.add_artifact("model", "model");
    manifest.add_artifact("curve", "curve.csv");
    manifest.finish("complete");
  } catch (...) {
    manifest.finish("failed");
    throw;
  }
  std::cout << dir.string() << "\n";
  return 0;
}

void print_report(const eval::MetricsReport& rep) {
  auto line = [](const char* name, const eval::Stat& s) {
    std::cout << "  " << name << ": " << s.mean << " +/- " << s.stddev << "\n";
  };
  std::cout << "episodes: " << rep.n_episodes << "\n";
  line("reward", rep.reward);
  line("avg distance", rep.avg_distance);
  line("collisions", rep.collisions);
  line("sync occupations", rep.sync_occupations);
  line("not-sync occupations", rep.not_sync_occupations);
  line("food targets", rep.food_targets);
  line("poison targets", rep.poison_targets);
}

int cmd_eval(const std::string& run, long episodes, std::uint64_t seed, int jobs,
             double noise_std, bool corrupted) {
  const fs::path model_dir = model_dir_of(run);
  train::Model model = train::load_model(model_dir);
  std::string tag;
  if (corrupted) {
    std::ostringstream name;
    name << "corrupt-" << noise_std << "-" << seed << "-" << episodes;
    tag = name.str();
  } else {
    tag = "eval-" + std::to_string(seed) + "-" + std::to_string(episodes);
  }
  const fs::path out = fs::path(run) / tag;
  fs::create_directories(out);
  Manifest manifest{out / "manifest.json", {}};
  json inputs{{"command", corrupted ? "corrupt" : "eval"},
              {"checkpoint", model_dir.string()},
              {"episodes", episodes},
              {"jobs", jobs}};
  if (corrupted) inputs["noise_std"] = noise_std;
  manifest.start(inputs, seed);

  eval::EvalOptions opts;
  opts.n_episodes = episodes;
  opts.seed = seed;
  opts.jobs = jobs;
  std::vector<eval::EpisodeMetrics> rows;
  eval::MetricsReport rep;
  try {
    if (corrupted) {
      rep = eval::evaluate_corrupted(model, model.ecfg, opts, noise_std, &rows);
    } else {
      rep = eval::evaluate(model, model.ecfg, opts, &rows);
    }
    eval::write_episode_csv(rows, (out / "episodes.csv").string());
    eval::write_report_csv(rep, (out / "report.csv").string());
    manifest.add_artifact("episodes", "episodes.csv");
    manifest.add_artifact("report", "report.csv");
    manifest.finish("complete");
  } catch (...) {
    manifest.finish("failed");
    throw;
  }
  print_report(rep);
  std::cout << out.string() << "\n";
  return 0;
}

int cmd_grid(const std::string& config_path,
             const std::vector<std::pair<std::string, std::string>>& overrides,
             const std::string& out_flag, const std::string& axis_spec,
             long eval_episodes, std::uint64_t eval_seed, const char* kind) {
  const auto pos = axis_spec.find('=');
  if (pos == std::string::npos) {
    throw ConfigError("axis must be <name>=v1,v2,... (got \"" + axis_spec + "\")");
  }
  const eval::GridAxis axis = eval::grid_axis_from_name(axis_spec.substr(0, pos));
  std::vector<std::string> values;
  std::stringstream ss(axis_spec.substr(pos + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) values.push_back(item);
  }
  if (values.empty()) throw ConfigError("axis has no values: " + axis_spec);

  config::RunConfig rc = config::load_run_config(config_path, overrides);
  const std::string stem = std::string(env::task_name(rc.env.task)) + "-" + kind +
                           "-" + eval::grid_axis_name(axis) + "-" +
                           std::to_string(rc.train.seed);
  const fs::path dir = make_run_dir(runs_root(out_flag), stem);
  Manifest manifest{dir / "manifest.json", {}};
  json resolved = rc.resolved;
  resolved["sweep_axis"] = axis_spec;
  manifest.start(resolved, rc.train.seed);
  try {
    auto cells = eval::run_experiment_grid(rc.train, rc.env, axis, values,
                                           eval_episodes, eval_seed);
    eval::write_grid_csv(cells, (dir / "grid.csv").string());
    manifest.add_artifact("grid", "grid.csv");
    manifest.finish("complete");
    for (const auto& c : cells) {
      std::cout << c.axis << "=" << c.value << ": "
                << (c.ok ? "ok" : "failed") << "\n";
    }
  } catch (...) {
    manifest.finish("failed");
    throw;
  }
  std::cout << dir.string() << "\n";
  return 0;
}

int cmd_analyze(const std::string& run, std::uint64_t seed) {
  const fs::path model_dir = model_dir_of(run);
  train::Model model = train::load_model(model_dir);
  const fs::path out = fs::path(run) / ("analysis-" + std::to_string(seed));
  fs::create_directories(out);
  Manifest manifest{out / "manifest.json", {}};
  manifest.start(json{{"command", "analyze"}, {"checkpoint", model_dir.string()}},
                 seed);

  try {
    comm::RecordedTraces rec = comm::record_traces(model, model.ecfg, seed);
    env::write_trace_csv(rec.episode, (out / "episode.csv").string());
    manifest.add_artifact("episode", "episode.csv");
    for (const comm::TraceMatrix& trace : rec.traces) {
      const std::string stem =
          "agent" + std::to_string(trace.agent) + "_" + trace.kind;
      comm::save_trace(trace, out / (stem + ".trace"));
      manifest.add_artifact(stem + "-trace", stem + ".trace");
      comm::PcaResult p = comm::pca(trace, 3);
      if (p.degenerate) {
        std::cout << stem
                  << ": degenerate trace (zero variance), heatmap skipped\n";
        continue;
      }
      comm::standardize01(p.scores);
      comm::HeatmapData hm;
      std::ostringstream title;
      title << env::task_name(model.ecfg.task) << " agent " << trace.agent << " "
            << trace.kind << " (seed " << seed << ")";
      hm.title = title.str();
      hm.scores = p.scores;
      hm.phases = trace.phases;
      comm::write_heatmap_csv(hm, (out / (stem + ".csv")).string());
      std::ofstream svg(out / (stem + ".svg"));
      if (!svg) throw ConfigError("cannot write heatmap svg");
      svg << comm::render_heatmap_svg(hm);
      manifest.add_artifact(stem + "-csv", stem + ".csv");
      manifest.add_artifact(stem + "-svg", stem + ".svg");
      double cum = 0.0;
      for (double r : p.ratios) cum += r;
      std::cout << stem << ": top-" << p.k << " variance ratio " << cum << "\n";
    }
    manifest.finish("complete");
  } catch (...) {
    manifest.finish("failed");
    throw;
  }
  std::cout << out.string() << "\n";
  return 0;
}

int cmd_inspect(const std::string& checkpoint) {
  const fs::path manifest = checkpoint + ".manifest.json";
  std::ifstream is(manifest);
  if (!is) throw ConfigError("no manifest next to checkpoint: " + manifest.string());
  std::cout << is.rdbuf();
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"memory-driven multi-agent policy gradient workbench"};
  app.require_subcommand(1);

  std::string config_path, out_flag, run_dir, checkpoint, axis_spec;
  std::string seed_str, episodes_str;
  std::vector<std::string> sets;
  long eval_episodes = 1000;
  std::uint64_t eval_seed = 0;
  int jobs = 1;
  double noise_std = 1.0;

  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat JSON run config")->required();
    cmd->add_option("--seed", seed_str, "override config seed");
    cmd->add_option("--episodes", episodes_str, "override training episodes");
    cmd->add_option("--set", sets, "override any config key (key=value)");
    cmd->add_option("--out", out_flag,
                    "runs root (default $MEMSHARE_RUNS_DIR or ./runs)");
  };

  CLI::App* tr = app.add_subcommand("train", "train agents on a task");
  add_config_opts(tr);

  CLI::App* ev = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  ev->add_option("--run", run_dir, "run directory (or model directory)")->required();
  ev->add_option("--episodes", eval_episodes, "evaluation episodes");
  ev->add_option("--seed", eval_seed, "evaluation seed");
  ev->add_option("--jobs", jobs, "parallel evaluation workers");

  CLI::App* co = app.add_subcommand("corrupt",
                                    "evaluation with a corrupted memory channel");
  co->add_option("--run", run_dir, "run directory")->required();
  co->add_option("--episodes", eval_episodes, "evaluation episodes");
  co->add_option("--seed", eval_seed, "evaluation seed");
  co->add_option("--jobs", jobs, "parallel evaluation workers");
  co->add_option("--noise-std", noise_std, "memory noise standard deviation");

  CLI::App* ab = app.add_subcommand("ablate", "train and evaluate ablation variants");
  add_config_opts(ab);
  ab->add_option("--variants", axis_spec,
                 "comma list (default no-context,no-read,no-write)");
  ab->add_option("--eval-episodes", eval_episodes, "evaluation episodes per cell");
  ab->add_option("--eval-seed", eval_seed, "evaluation seed");

  CLI::App* sw = app.add_subcommand("sweep", "train/evaluate along one config axis");
  add_config_opts(sw);
  sw->add_option("--axis", axis_spec,
                 "axis spec: n-agents|memory-size|seed|variant=v1,v2,...")
      ->required();
  sw->add_option("--eval-episodes", eval_episodes, "evaluation episodes per cell");
  sw->add_option("--eval-seed", eval_seed, "evaluation seed");

  CLI::App* an = app.add_subcommand("analyze", "record traces, PCA, heatmaps");
  an->add_option("--run", run_dir, "run directory")->required();
  an->add_option("--seed", eval_seed, "episode seed");

  CLI::App* in = app.add_subcommand("inspect", "print a checkpoint manifest");
  in->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto overrides = parse_overrides(sets, seed_str, episodes_str);
    if (tr->parsed()) return cmd_train(config_path, overrides, out_flag);
    if (ev->parsed()) return cmd_eval(run_dir, eval_episodes, eval_seed, jobs, 0.0, false);
    if (co->parsed()) {
      return cmd_eval(run_dir, eval_episodes, eval_seed, jobs, noise_std, true);
    }
    if (ab->parsed()) {
      const std::string variants =
          axis_spec.empty() ? "no-context,no-read,no-write" : axis_spec;
      return cmd_grid(config_path, overrides, out_flag, "variant=" + variants,
                      eval_episodes, eval_seed, "ablate");
    }
    if (sw->parsed()) {
      return cmd_grid(config_path, overrides, out_flag, axis_spec, eval_episodes,
                      eval_seed, "sweep");
    }
    if (an->parsed()) return cmd_analyze(run_dir, eval_seed);
    if (in->parsed()) return cmd_inspect(checkpoint);
    return 2;
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const TrainingFault& err) {
    std::cerr << "training fault: " << err.what() << "\n";
    return 3;
  } catch (const IncompatibilityError& err) {
    std::cerr << "incompatible checkpoint: " << err.what() << "\n";
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

}  // namespace memshare::cli
