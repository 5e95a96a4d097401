#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "memshare/commanalysis.hpp"
#include "memshare/errors.hpp"
#include "oracles.hpp"

using namespace memshare;
using comm::TraceMatrix;
using nn::Vec;

namespace {

env::EnvConfig desk_env() {
  env::EnvConfig e;
  e.task = env::Task::sync_cn;
  e.n_agents = 2;
  e.horizon = 12;
  return e;
}

train::TrainConfig desk_train(md::Variant variant = md::Variant::full) {
  train::TrainConfig t;
  t.algo = train::Algo::md_maddpg;
  t.variant = variant;
  t.memory_size = 4;
  t.embed_dim = 4;
  t.context_dim = 3;
  t.enc_hidden = 5;
  t.act_hidden = 5;
  t.critic_hidden = {8};
  t.episodes = 0;
  t.seed = 3;
  return t;
}

train::Model fresh_model(const train::TrainConfig& t, const env::EnvConfig& e) {
  Rng root(t.seed);
  Rng init = root.child("init");
  return train::init_model(t, e, init);
}

TraceMatrix matrix_from_rows(const std::vector<Vec>& rows) {
  TraceMatrix trace;
  trace.t = static_cast<int>(rows.size());
  trace.m = static_cast<int>(rows[0].size());
  for (const Vec& r : rows) trace.data.insert(trace.data.end(), r.begin(), r.end());
  trace.phases.assign(trace.t, 0);
  return trace;
}

}  // namespace

TEST_CASE("record_traces: horizon rows per agent for write and read kinds") {
  env::EnvConfig e = desk_env();
  train::TrainConfig t = desk_train();
  train::Model model = fresh_model(t, e);
  comm::RecordedTraces rec = comm::record_traces(model, e, 5);
  REQUIRE(rec.traces.size() == 4);  // 2 agents x {write, read}
  for (const TraceMatrix& trace : rec.traces) {
    CHECK(trace.t == e.horizon);
    CHECK(trace.m == t.memory_size);
    CHECK(trace.data.size() == static_cast<size_t>(e.horizon * t.memory_size));
    CHECK(trace.phases.size() == static_cast<size_t>(e.horizon));
  }
  CHECK(rec.traces[0].kind == "write");
  CHECK(rec.traces[1].kind == "read");
}

TEST_CASE("record_traces: no-write checkpoint produces constant write rows") {
  env::EnvConfig e = desk_env();
  train::TrainConfig t = desk_train(md::Variant::no_write);
  train::Model model = fresh_model(t, e);
  comm::RecordedTraces rec = comm::record_traces(model, e, 6);
  for (const TraceMatrix& trace : rec.traces) {
    if (trace.kind != "write") continue;
    for (int row = 1; row < trace.t; ++row) {
      for (int col = 0; col < trace.m; ++col) {
        CHECK(trace.at(row, col) == trace.at(0, col));
      }
    }
  }
}

TEST_CASE("record_traces: writes reach the next agent within the same step") {
  env::EnvConfig e = desk_env();
  train::TrainConfig t = desk_train();
  train::Model model = fresh_model(t, e);
  comm::RecordedTraces rec = comm::record_traces(model, e, 7);

  // Instrumented replay of the same episode.
  env::Env environment(e);
  std::vector<std::vector<Vec>> snaps;
  train::RolloutOptions opts;
  opts.explore = false;
  opts.record_trace = false;
  opts.on_step = [&](const train::StepRecord& r) { snaps.push_back(*r.memory); };
  train::run_episode(model, environment, 7, opts);

  const TraceMatrix& writes0 = rec.traces[0];
  REQUIRE(writes0.kind == "write");
  REQUIRE(writes0.agent == 0);
  for (int step = 0; step < writes0.t; ++step) {
    for (int col = 0; col < writes0.m; ++col) {
      CHECK(writes0.at(step, col) == snaps[step][1][col]);
    }
  }
}

TEST_CASE("record_traces: memoryless checkpoint is a configuration error") {
  env::EnvConfig e = desk_env();
  train::TrainConfig t = desk_train();
  t.algo = train::Algo::maddpg;
  t.variant = md::Variant::full;
  train::Model model = fresh_model(t, e);
  CHECK_THROWS_AS(comm::record_traces(model, e, 1), ConfigError);
}

TEST_CASE("pca: rank-1 data concentrates all variance in the first component") {
  Rng rng(31);
  Vec direction{0.6, -0.8, 0.0, 0.2, 0.1};
  std::vector<Vec> rows;
  for (int t = 0; t < 40; ++t) {
    const double s = rng.uniform(-3, 3);
    Vec row(direction.size());
    for (size_t j = 0; j < direction.size(); ++j) row[j] = s * direction[j] + 2.0;
    rows.push_back(std::move(row));
  }
  comm::PcaResult p = comm::pca(matrix_from_rows(rows), 3);
  REQUIRE_FALSE(p.degenerate);
  CHECK(p.ratios[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::fabs(p.ratios[1]) <= 1e-10);
  CHECK(std::fabs(p.ratios[2]) <= 1e-10);
}

TEST_CASE("pca: matches the power-iteration oracle on random matrices") {
  Rng rng(32);
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<Vec> rows(100, Vec(20));
    Rng t = rng.child("pca", trial);
    for (Vec& r : rows) {
      for (double& v : r) v = t.normal();
    }
    const comm::PcaResult p = comm::pca(matrix_from_rows(rows), 3);
    const oracles::PowerPca oracle = oracles::power_iteration_pca(rows, 3, trial);
    for (int c = 0; c < 3; ++c) {
      CHECK(std::fabs(p.ratios[c] - oracle.ratios[c]) <= 1e-6);
      double diff_same = 0.0, diff_flip = 0.0;
      for (int j = 0; j < 20; ++j) {
        diff_same = std::max(diff_same,
                             std::fabs(p.components[c][j] - oracle.components[c][j]));
        diff_flip = std::max(diff_flip,
                             std::fabs(p.components[c][j] + oracle.components[c][j]));
      }
      CHECK(std::min(diff_same, diff_flip) <= 1e-6);
    }
  }
}

TEST_CASE("pca: components are orthonormal and ratios account for the variance") {
  Rng rng(33);
  std::vector<Vec> rows(60, Vec(7));
  for (Vec& r : rows) {
    for (double& v : r) v = rng.normal();
  }
  TraceMatrix trace = matrix_from_rows(rows);

  const comm::PcaResult full = comm::pca(trace, 7);
  double sum = 0.0;
  for (double r : full.ratios) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    sum += r;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
  for (size_t a = 0; a < full.components.size(); ++a) {
    for (size_t b = 0; b <= a; ++b) {
      double dot = 0.0;
      for (int j = 0; j < 7; ++j) dot += full.components[a][j] * full.components[b][j];
      CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) <= 1e-10);
    }
  }
  for (size_t i = 1; i < full.ratios.size(); ++i) {
    CHECK(full.ratios[i] <= full.ratios[i - 1] + 1e-15);
  }

  // Truncation is a prefix of the full decomposition.
  const comm::PcaResult top = comm::pca(trace, 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(top.ratios[c] == doctest::Approx(full.ratios[c]).epsilon(1e-12));
  }
}

TEST_CASE("pca: the leading direction dominates random unit directions") {
  Rng rng(34);
  for (int m = 2; m <= 5; ++m) {
    std::vector<Vec> rows(50, Vec(m));
    for (Vec& r : rows) {
      for (double& v : r) v = rng.normal() * (1.0 + 0.5 * m);
    }
    TraceMatrix trace = matrix_from_rows(rows);
    const comm::PcaResult p = comm::pca(trace, 1);

    Vec mean(m, 0.0);
    for (const Vec& r : rows) {
      for (int j = 0; j < m; ++j) mean[j] += r[j];
    }
    for (double& v : mean) v /= rows.size();
    auto variance_along = [&](const Vec& dir) {
      double acc = 0.0;
      for (const Vec& r : rows) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += (r[j] - mean[j]) * dir[j];
        acc += s * s;
      }
      return acc / (rows.size() - 1);
    };
    const double best = variance_along(p.components[0]);
    for (int trial = 0; trial < 1000; ++trial) {
      Vec dir(m);
      double norm = 0.0;
      for (double& v : dir) {
        v = rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (double& v : dir) v /= norm;
      REQUIRE(best >= variance_along(dir) - 1e-9);
    }
  }
}

TEST_CASE("pca: sign convention makes repeated runs bitwise identical") {
  Rng rng(35);
  std::vector<Vec> rows(30, Vec(6));
  for (Vec& r : rows) {
    for (double& v : r) v = rng.normal();
  }
  TraceMatrix trace = matrix_from_rows(rows);
  const comm::PcaResult a = comm::pca(trace, 3);
  const comm::PcaResult b = comm::pca(trace, 3);
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < 6; ++j) CHECK(a.components[c][j] == b.components[c][j]);
    for (int t = 0; t < 30; ++t) CHECK(a.scores[c][t] == b.scores[c][t]);
    // Largest-magnitude entry is positive.
    int arg = 0;
    for (int j = 1; j < 6; ++j) {
      if (std::fabs(a.components[c][j]) > std::fabs(a.components[c][arg])) arg = j;
    }
    CHECK(a.components[c][arg] > 0.0);
  }
}

TEST_CASE("pca: zero-variance input signals a degenerate trace") {
  std::vector<Vec> rows(10, Vec{1.0, -2.0, 3.0});
  const comm::PcaResult p = comm::pca(matrix_from_rows(rows), 3);
  CHECK(p.degenerate);
  TraceMatrix one_row = matrix_from_rows({Vec{1.0, 2.0}});
  CHECK_THROWS_AS(comm::pca(one_row, 2), ConfigError);
}

TEST_CASE("standardize01: min-max scaling with the constant-series convention") {
  std::vector<Vec> scores{{-2.0, 0.0, 2.0}, {5.0, 5.0, 5.0}};
  comm::standardize01(scores);
  CHECK(scores[0][0] == 0.0);
  CHECK(scores[0][1] == doctest::Approx(0.5));
  CHECK(scores[0][2] == 1.0);
  for (double v : scores[1]) CHECK(v == 0.5);

  // Idempotence.
  std::vector<Vec> again = scores;
  comm::standardize01(again);
  for (size_t c = 0; c < scores.size(); ++c) {
    for (size_t t = 0; t < scores[c].size(); ++t) {
      CHECK(again[c][t] == scores[c][t]);
    }
  }

  Rng rng(36);
  std::vector<Vec> random_scores{Vec(50), Vec(50)};
  for (Vec& s : random_scores) {
    for (double& v : s) v = rng.normal(0, 10);
  }
  comm::standardize01(random_scores);
  for (const Vec& s : random_scores) {
    CHECK(*std::min_element(s.begin(), s.end()) == 0.0);
    CHECK(*std::max_element(s.begin(), s.end()) == 1.0);
  }
}

TEST_CASE("heatmap: all-0.5 scores render a uniform mid-colour raster") {
  comm::HeatmapData data;
  data.title = "uniform";
  data.scores = {Vec(10, 0.5), Vec(10, 0.5), Vec(10, 0.5)};
  data.phases.assign(10, 0);
  const std::string svg = comm::render_heatmap_svg(data);
  size_t count = 0;
  size_t pos = 0;
  while ((pos = svg.find("fill=\"rgb(255,255,255)\"", pos)) != std::string::npos) {
    count += 1;
    pos += 1;
  }
  CHECK(count == 30);
}

TEST_CASE("heatmap: csv round trip reproduces the identical svg") {
  Rng rng(37);
  comm::HeatmapData data;
  data.title = "sync-cn agent 0 write (seed 9)";
  for (int c = 0; c < 3; ++c) {
    Vec s(25);
    for (double& v : s) v = rng.uniform01();
    data.scores.push_back(std::move(s));
  }
  for (int t = 0; t < 25; ++t) data.phases.push_back(t < 10 ? 0 : (t < 18 ? 1 : 2));

  const std::string svg1 = comm::render_heatmap_svg(data);
  const auto dir = std::filesystem::temp_directory_path() / "memshare-heatmap";
  std::filesystem::create_directories(dir);
  const std::string csv_path = (dir / "hm.csv").string();
  comm::write_heatmap_csv(data, csv_path);
  const comm::HeatmapData reloaded = comm::read_heatmap_csv(csv_path);
  const std::string svg2 = comm::render_heatmap_svg(reloaded);
  CHECK(svg1 == svg2);
}

TEST_CASE("heatmap: phase bar segments equal the runs of consecutive labels") {
  comm::HeatmapData data;
  data.title = "segments";
  data.scores = {Vec(12, 0.2)};
  data.phases = {0, 0, 1, 1, 1, 0, 0, 2, 2, 2, 2, 1};  // 5 runs
  const std::string svg = comm::render_heatmap_svg(data);
  size_t count = 0;
  size_t pos = 0;
  while ((pos = svg.find("class=\"phase\"", pos)) != std::string::npos) {
    count += 1;
    pos += 1;
  }
  CHECK(count == 5);
}

TEST_CASE("heatmap: mismatched label length is rejected") {
  comm::HeatmapData data;
  data.title = "bad";
  data.scores = {Vec(10, 0.5)};
  data.phases.assign(7, 0);
  CHECK_THROWS_AS(comm::render_heatmap_svg(data), ConfigError);
}

TEST_CASE("trace container: save/load round trip is exact") {
  Rng rng(38);
  TraceMatrix trace;
  trace.t = 9;
  trace.m = 5;
  trace.data.resize(45);
  for (double& v : trace.data) v = rng.normal();
  const auto dir = std::filesystem::temp_directory_path() / "memshare-trace";
  std::filesystem::create_directories(dir);
  const auto path = dir / "trace.bin";
  comm::save_trace(trace, path);
  const TraceMatrix loaded = comm::load_trace(path);
  CHECK(loaded.t == trace.t);
  CHECK(loaded.m == trace.m);
  for (size_t i = 0; i < trace.data.size(); ++i) {
    CHECK(loaded.data[i] == trace.data[i]);
  }
  std::ofstream bogus(dir / "bogus.bin", std::ios::binary);
  bogus << "NOTATRACE+++";
  bogus.close();
  CHECK_THROWS_AS(comm::load_trace(dir / "bogus.bin"), ConfigError);
}

TEST_CASE("pca: top-3 components explain over 80% of trace variance") {
  env::EnvConfig e = desk_env();
  e.horizon = 100;
  train::TrainConfig t = desk_train();
  t.memory_size = 16;
  t.embed_dim = 32;
  t.context_dim = 16;
  t.enc_hidden = 64;
  t.act_hidden = 64;
  train::Model model = fresh_model(t, e);
  comm::RecordedTraces rec = comm::record_traces(model, e, 4);
  for (const TraceMatrix& trace : rec.traces) {
    const comm::PcaResult p = comm::pca(trace, 3);
    REQUIRE_FALSE(p.degenerate);
    double cum = 0.0;
    for (double r : p.ratios) cum += r;
    CHECK(cum > 0.80);
  }
}
