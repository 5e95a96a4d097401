#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "memshare/envs.hpp"
#include "memshare/errors.hpp"
#include "memshare/rng.hpp"

using namespace memshare;
using env::Env;
using env::EnvConfig;
using env::Task;
using nn::Vec;

namespace {

EnvConfig cn_config(int n_agents = 2) {
  EnvConfig cfg;
  cfg.task = Task::cn;
  cfg.n_agents = n_agents;
  cfg.horizon = 25;
  return cfg;
}

Vec noop_action(const EnvConfig& cfg) {
  Vec a(cfg.action_dim(), 0.0);
  if (cfg.discrete()) a[0] = 1.0;
  return a;
}

std::vector<Vec> noop_joint(const EnvConfig& cfg) {
  return std::vector<Vec>(cfg.n_agents, noop_action(cfg));
}

// Brute-force O(N^2) collision recount.
int collision_oracle(const env::WorldState& w) {
  int pairs = 0;
  for (size_t i = 0; i < w.agents.size(); ++i) {
    for (size_t j = i + 1; j < w.agents.size(); ++j) {
      const double d = std::hypot(w.agents[i].pos.x - w.agents[j].pos.x,
                                  w.agents[i].pos.y - w.agents[j].pos.y);
      if (d < w.agents[i].radius + w.agents[j].radius) pairs += 1;
    }
  }
  return pairs;
}

}  // namespace

TEST_CASE("reset: deterministic for a given config and seed") {
  Env a(cn_config());
  Env b(cn_config());
  a.reset(77);
  b.reset(77);
  for (size_t i = 0; i < a.state().agents.size(); ++i) {
    CHECK(a.state().agents[i].pos.x == b.state().agents[i].pos.x);
    CHECK(a.state().agents[i].pos.y == b.state().agents[i].pos.y);
  }
  for (size_t i = 0; i < a.state().landmarks.size(); ++i) {
    CHECK(a.state().landmarks[i].pos.x == b.state().landmarks[i].pos.x);
  }
  a.reset(78);
  bool any_diff = false;
  for (size_t i = 0; i < a.state().agents.size(); ++i) {
    if (a.state().agents[i].pos.x != b.state().agents[i].pos.x) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("reset: CN places one landmark per agent") {
  for (int n : {2, 3, 6}) {
    Env e(cn_config(n));
    e.reset(5);
    CHECK(e.state().landmarks.size() == static_cast<size_t>(n));
    CHECK(e.state().agents.size() == static_cast<size_t>(n));
    for (const env::Body& b : e.state().agents) {
      CHECK(b.vel.x == 0.0);
      CHECK(b.vel.y == 0.0);
    }
  }
}

TEST_CASE("reset: layouts are overlap-free under the pairwise-distance oracle") {
  EnvConfig cfg = cn_config(4);
  cfg.agent_radius = 0.12;
  cfg.landmark_radius = 0.1;
  Env e(cfg);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    e.reset(seed);
    std::vector<const env::Body*> all;
    for (const auto& b : e.state().agents) all.push_back(&b);
    for (const auto& b : e.state().landmarks) all.push_back(&b);
    for (size_t i = 0; i < all.size(); ++i) {
      for (size_t j = i + 1; j < all.size(); ++j) {
        const double d = std::hypot(all[i]->pos.x - all[j]->pos.x,
                                    all[i]->pos.y - all[j]->pos.y);
        CHECK(d > all[i]->radius + all[j]->radius);
      }
    }
  }
}

TEST_CASE("reset: impossible placement reports a configuration error") {
  EnvConfig cfg = cn_config(3);
  cfg.agent_radius = 0.95;
  Env e(cfg);
  CHECK_THROWS_AS(e.reset(1), ConfigError);
}

TEST_CASE("step: agent exactly on its landmark contributes zero distance") {
  EnvConfig cfg = cn_config();
  Env e(cfg);
  e.reset(3);
  auto& w = e.mutable_state();
  w.agents[0].pos = w.landmarks[0].pos;
  w.agents[1].pos = {0.9, 0.9};
  w.landmarks[1].pos = {-0.9, -0.9};
  w.agents[0].vel = w.agents[1].vel = {0.0, 0.0};
  const double d1 = std::hypot(w.agents[0].pos.x - w.landmarks[1].pos.x,
                               w.agents[0].pos.y - w.landmarks[1].pos.y);
  const double d1b = std::hypot(w.agents[1].pos.x - w.landmarks[1].pos.x,
                                w.agents[1].pos.y - w.landmarks[1].pos.y);
  env::StepResult r = e.step(noop_joint(cfg));
  CHECK(r.flags.collisions == 0);
  CHECK(r.rewards[0] == doctest::Approx(-std::min(d1, d1b)).epsilon(1e-12));
  CHECK(r.rewards[1] == r.rewards[0]);
}

TEST_CASE("step: identical positions are a collision; counts match the oracle") {
  EnvConfig cfg = cn_config();
  Env e(cfg);
  e.reset(4);
  auto& w = e.mutable_state();
  w.agents[0].pos = {0.2, 0.2};
  w.agents[1].pos = {0.2, 0.2};
  env::StepResult r = e.step(noop_joint(cfg));
  CHECK(r.flags.collisions == 1);

  EnvConfig cfg5 = cn_config(5);
  Env e5(cfg5);
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    e5.reset(trial);
    auto& w5 = e5.mutable_state();
    for (auto& b : w5.agents) {
      b.pos = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
      b.vel = {0.0, 0.0};
    }
    const int expected = collision_oracle(e5.state());
    env::StepResult r5 = e5.step(noop_joint(cfg5));
    CHECK(r5.flags.collisions == expected);
  }
}

TEST_CASE("sync flags: verified against a geometric oracle over placements") {
  EnvConfig cfg = cn_config();
  cfg.task = Task::sync_cn;
  Env e(cfg);
  const double thr = cfg.occupation_threshold();
  const double offsets[] = {0.0, 0.5 * thr, 0.99 * thr, 1.01 * thr, 3.0 * thr};
  for (double off0 : offsets) {
    for (double off1 : offsets) {
      e.reset(11);
      auto& w = e.mutable_state();
      w.landmarks[0].pos = {-0.5, 0.0};
      w.landmarks[1].pos = {0.5, 0.0};
      w.agents[0].pos = {-0.5 + off0, 0.0};
      w.agents[1].pos = {0.5 + off1, 0.0};
      w.agents[0].vel = w.agents[1].vel = {0.0, 0.0};
      const bool occ0 = off0 < thr;
      const bool occ1 = off1 < thr;
      env::StepResult r = e.step(noop_joint(cfg));
      CHECK(r.flags.sync_occupation == (occ0 && occ1));
      CHECK(r.flags.not_sync_occupation == (occ0 != occ1));
      if (occ0 && occ1) CHECK(r.rewards[0] > 0.0);
      if (occ0 != occ1) CHECK(r.rewards[0] < 0.0);
    }
  }
}

TEST_CASE("sequential CN: lone new occupation rewards, simultaneous penalised") {
  EnvConfig cfg = cn_config();
  cfg.task = Task::sequential_cn;
  Env e(cfg);
  e.reset(12);
  auto& w = e.mutable_state();
  w.landmarks[0].pos = {-0.5, 0.0};
  w.landmarks[1].pos = {0.5, 0.0};
  w.agents[0].pos = {-0.5, 0.0};  // on landmark 0, alone
  w.agents[1].pos = {0.0, 0.8};
  w.agents[0].vel = w.agents[1].vel = {0.0, 0.0};

  env::StepResult r1 = e.step(noop_joint(cfg));
  CHECK(r1.flags.new_occupations == 1);
  CHECK(r1.rewards[0] == doctest::Approx(cfg.sequential_reward));

  env::StepResult r2 = e.step(noop_joint(cfg));  // still there: not new
  CHECK(r2.flags.new_occupations == 0);
  CHECK(r2.rewards[0] == doctest::Approx(0.0));

  e.mutable_state().agents[1].pos = {0.5, 0.0};  // both occupied now
  env::StepResult r3 = e.step(noop_joint(cfg));
  CHECK(r3.flags.new_occupations == 0);
  CHECK(r3.rewards[0] == doctest::Approx(-cfg.simultaneous_penalty));
}

TEST_CASE("swapping CN: simultaneous assigned occupation swaps the targets once") {
  EnvConfig cfg = cn_config();
  cfg.task = Task::swapping_cn;
  Env e(cfg);
  e.reset(13);
  auto& w = e.mutable_state();
  w.landmarks[0].pos = {-0.5, 0.0};
  w.landmarks[1].pos = {0.5, 0.0};
  w.agents[0].pos = {-0.5, 0.0};
  w.agents[1].pos = {0.5, 0.0};
  w.agents[0].vel = w.agents[1].vel = {0.0, 0.0};
  REQUIRE(e.state().assignment == std::vector<int>{0, 1});

  env::StepResult r1 = e.step(noop_joint(cfg));
  CHECK(r1.flags.completions == 1);
  CHECK(r1.flags.sync_occupation);
  CHECK(e.state().assignment == std::vector<int>{1, 0});

  // Agents now sit on the wrong targets: no completion, no sync flag.
  env::StepResult r2 = e.step(noop_joint(cfg));
  CHECK(r2.flags.completions == 0);
  CHECK_FALSE(r2.flags.sync_occupation);

  // Cross over: second completion, assignments stay swapped.
  auto& w2 = e.mutable_state();
  w2.agents[0].pos = {0.5, 0.0};
  w2.agents[1].pos = {-0.5, 0.0};
  w2.agents[0].vel = w2.agents[1].vel = {0.0, 0.0};
  env::StepResult r3 = e.step(noop_joint(cfg));
  CHECK(r3.flags.completions == 1);
  CHECK(e.state().assignment == std::vector<int>{1, 0});
  env::StepResult r4 = e.step(noop_joint(cfg));
  CHECK(r4.flags.completions == 0);  // task complete, holding
  CHECK(r4.flags.sync_occupation);
  CHECK(r4.rewards[0] > 0.0);
}

TEST_CASE("observe: CN dimension bookkeeping (2 agents, 2 landmarks -> 10)") {
  Env e(cn_config());
  auto obs = e.reset(14);
  CHECK(cn_config().obs_dim() == 10);
  CHECK(obs[0].size() == 10);
  CHECK(obs[1].size() == 10);

  EnvConfig cfg3 = cn_config(3);
  CHECK(cfg3.obs_dim() == 4 + 3 * 2 + 2 * 2);

  EnvConfig po = cn_config();
  po.task = Task::po_cn;
  CHECK(po.obs_dim() == 4 + 3 * 2 + 3 * 1);

  EnvConfig ww = cn_config();
  ww.task = Task::waterworld;
  CHECK(ww.obs_dim() == 4 + 3 * 16);
}

TEST_CASE("observe: entity exactly at the vision radius is masked") {
  EnvConfig cfg = cn_config();
  cfg.task = Task::po_cn;
  cfg.vision_radius = 0.5;
  Env e(cfg);
  e.reset(15);
  auto& w = e.mutable_state();
  w.agents[0].pos = {0.0, 0.0};
  w.agents[1].pos = {0.5, 0.0};  // exactly at the boundary
  w.landmarks[0].pos = {0.0, 0.2};   // visible
  w.landmarks[1].pos = {0.0, -0.9};  // not visible
  const Vec obs = e.observe(0);
  // layout: self(4), lm0(3), lm1(3), other agent(3)
  CHECK(obs[4] == doctest::Approx(0.0));
  CHECK(obs[5] == doctest::Approx(0.2));
  CHECK(obs[6] == 1.0);
  CHECK(obs[7] == 0.0);
  CHECK(obs[8] == 0.0);
  CHECK(obs[9] == 0.0);
  CHECK(obs[10] == 0.0);  // boundary entity: strictly-less-than rule
  CHECK(obs[11] == 0.0);
  CHECK(obs[12] == 0.0);

  w.agents[1].pos = {0.5 - 1e-9, 0.0};
  const Vec obs2 = e.observe(0);
  CHECK(obs2[12] == 1.0);
}

TEST_CASE("observe: identical states give identical observations") {
  Env e(cn_config());
  e.reset(16);
  const Vec a = e.observe(1);
  const Vec b = e.observe(1);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("physics: speed cap and arena clamp hold under random actions") {
  EnvConfig cfg = cn_config();
  cfg.max_speed = 0.12;
  Env e(cfg);
  e.reset(17);
  Rng rng(17);
  for (int t = 0; t < 25; ++t) {
    std::vector<Vec> actions(2, Vec(5, 0.0));
    for (auto& a : actions) {
      for (double& v : a) v = rng.uniform(0.0, 1.0);
    }
    e.step(actions);
    for (const env::Body& b : e.state().agents) {
      CHECK(std::hypot(b.vel.x, b.vel.y) <= cfg.max_speed + 1e-12);
      CHECK(std::fabs(b.pos.x) <= 1.0);
      CHECK(std::fabs(b.pos.y) <= 1.0);
    }
  }
}

TEST_CASE("episode: flags are mutually exclusive and bounded by the horizon") {
  EnvConfig cfg = cn_config();
  cfg.task = Task::sync_cn;
  cfg.horizon = 30;
  Env e(cfg);
  e.reset(18);
  Rng rng(18);
  int sync = 0, not_sync = 0, steps = 0;
  bool done = false;
  while (!done) {
    std::vector<Vec> actions(2, Vec(5, 0.0));
    for (auto& a : actions) a[rng.uniform_int(0, 4)] = 1.0;
    env::StepResult r = e.step(actions);
    CHECK_FALSE((r.flags.sync_occupation && r.flags.not_sync_occupation));
    CHECK(std::isfinite(r.rewards[0]));
    CHECK(std::fabs(r.rewards[0]) <= 100.0);
    sync += r.flags.sync_occupation ? 1 : 0;
    not_sync += r.flags.not_sync_occupation ? 1 : 0;
    steps += 1;
    done = r.done;
  }
  CHECK(steps == 30);
  CHECK(sync + not_sync <= cfg.horizon);
}

TEST_CASE("waterworld: capture needs both agents, rewards and respawn follow") {
  EnvConfig cfg;
  cfg.task = Task::waterworld;
  cfg.n_agents = 2;
  cfg.horizon = 50;
  cfg.n_food = 2;
  cfg.n_poison = 1;
  Env e(cfg);
  e.reset(19);
  auto& w = e.mutable_state();
  w.agents[0].pos = {0.0, 0.0};
  w.agents[1].pos = {0.02, 0.0};
  w.food[0].pos = {0.01, 0.0};
  w.food[0].vel = {0.0, 0.0};
  w.food[1].pos = {0.9, 0.9};
  w.food[1].vel = {0.0, 0.0};
  w.poison[0].pos = {-0.9, -0.9};
  w.poison[0].vel = {0.0, 0.0};
  w.agents[0].vel = w.agents[1].vel = {0.0, 0.0};
  std::vector<Vec> stay(2, Vec{0.0, 0.0});
  env::StepResult r = e.step(stay);
  CHECK(r.flags.food_captured == 1);
  CHECK(r.rewards[0] == doctest::Approx(cfg.food_reward));
  CHECK(r.rewards[1] == doctest::Approx(cfg.food_reward));

  // Poison contact penalises only the touching agent.
  auto& w2 = e.mutable_state();
  w2.agents[0].pos = {-0.9, -0.9};
  w2.agents[1].pos = {0.5, 0.5};
  w2.agents[0].vel = w2.agents[1].vel = {0.0, 0.0};
  w2.poison[0].pos = {-0.9, -0.9};
  w2.poison[0].vel = {0.0, 0.0};
  w2.food[0].pos = {0.9, -0.9};
  w2.food[0].vel = {0.0, 0.0};
  w2.food[1].pos = {-0.9, 0.9};
  w2.food[1].vel = {0.0, 0.0};
  env::StepResult r2 = e.step(stay);
  CHECK(r2.flags.poison_hits >= 1);
  CHECK(r2.rewards[0] <= -cfg.poison_penalty + 1e-9);
  CHECK(r2.rewards[1] == doctest::Approx(0.0));
}

TEST_CASE("waterworld: target motion is deterministic given the seed") {
  EnvConfig cfg;
  cfg.task = Task::waterworld;
  cfg.horizon = 10;
  Env a(cfg), b(cfg);
  a.reset(21);
  b.reset(21);
  std::vector<Vec> stay(2, Vec{0.0, 0.0});
  for (int t = 0; t < 5; ++t) {
    a.step(stay);
    b.step(stay);
  }
  for (size_t i = 0; i < a.state().food.size(); ++i) {
    CHECK(a.state().food[i].pos.x == b.state().food[i].pos.x);
    CHECK(a.state().food[i].pos.y == b.state().food[i].pos.y);
  }
}

TEST_CASE("step: wrong action arity or shape is rejected") {
  Env e(cn_config());
  e.reset(22);
  CHECK_THROWS_AS(e.step({Vec(5, 0.0)}), ConfigError);
  std::vector<Vec> bad{Vec(5, 0.0), Vec(3, 0.0)};
  CHECK_THROWS_AS(e.step(bad), ConfigError);
}

TEST_CASE("phase_of: sync CN with no occupations labels every step none") {
  env::EpisodeTrace trace;
  trace.task = Task::sync_cn;
  trace.n_agents = 2;
  trace.action_dim = 5;
  for (int t = 0; t < 8; ++t) {
    env::TraceRow row;
    row.t = t;
    trace.rows.push_back(row);
  }
  const std::vector<int> labels = env::phase_of(trace, Task::sync_cn);
  for (int l : labels) CHECK(l == 0);
}

TEST_CASE("phase_of: waterworld fencepost, 3 captures make 4 phases") {
  env::EpisodeTrace trace;
  trace.task = Task::waterworld;
  trace.n_agents = 2;
  trace.action_dim = 2;
  for (int t = 0; t < 16; ++t) {
    env::TraceRow row;
    row.t = t;
    if (t == 3 || t == 7 || t == 11) row.flags.food_captured = 1;
    trace.rows.push_back(row);
  }
  const std::vector<int> labels = env::phase_of(trace, Task::waterworld);
  std::set<int> distinct(labels.begin(), labels.end());
  CHECK(distinct.size() == 4);
  CHECK(labels[0] == 0);
  CHECK(labels[3] == 0);  // the capture step closes its phase
  CHECK(labels[4] == 1);
  CHECK(labels[15] == 3);
}

TEST_CASE("phase_of: sequential CN matches a hand-labelled scripted rollout") {
  env::EpisodeTrace trace;
  trace.task = Task::sequential_cn;
  trace.n_agents = 2;
  trace.action_dim = 5;
  // Occupation events at steps 2 and 6; hand label: 0 0 0 1 1 1 1 2 2 2.
  for (int t = 0; t < 10; ++t) {
    env::TraceRow row;
    row.t = t;
    row.flags.new_occupations = (t == 2 || t == 6) ? 1 : 0;
    trace.rows.push_back(row);
  }
  const std::vector<int> expected{0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
  const std::vector<int> labels = env::phase_of(trace, Task::sequential_cn);
  REQUIRE(labels.size() == expected.size());
  for (size_t t = 0; t < expected.size(); ++t) CHECK(labels[t] == expected[t]);
}

TEST_CASE("phase_of: swapping CN caps at three phases") {
  env::EpisodeTrace trace;
  trace.task = Task::swapping_cn;
  trace.n_agents = 2;
  trace.action_dim = 5;
  for (int t = 0; t < 9; ++t) {
    env::TraceRow row;
    row.t = t;
    row.flags.completions = (t == 1 || t == 5) ? 1 : 0;
    trace.rows.push_back(row);
  }
  const std::vector<int> expected{0, 0, 1, 1, 1, 1, 2, 2, 2};
  const std::vector<int> labels = env::phase_of(trace, Task::swapping_cn);
  for (size_t t = 0; t < expected.size(); ++t) CHECK(labels[t] == expected[t]);
}

TEST_CASE("trace csv: header plus one row per step") {
  EnvConfig cfg = cn_config();
  cfg.horizon = 4;
  Env e(cfg);
  e.reset(23);
  env::EpisodeTrace trace;
  trace.task = cfg.task;
  trace.n_agents = 2;
  trace.action_dim = 5;
  for (int t = 0; t < 4; ++t) {
    env::StepResult r = e.step(noop_joint(cfg));
    env::TraceRow row;
    row.t = t;
    for (const env::Body& b : e.state().agents) {
      row.agent_pos.push_back(b.pos.x);
      row.agent_pos.push_back(b.pos.y);
    }
    row.actions.assign(10, 0.0);
    row.rewards = r.rewards;
    row.flags = r.flags;
    trace.rows.push_back(row);
  }
  std::ostringstream os;
  env::write_trace_csv(trace, os);
  const std::string text = os.str();
  size_t lines = 0;
  for (char c : text) {
    if (c == '\n') lines += 1;
  }
  CHECK(lines == 5);
  CHECK(text.find("pos_x0") != std::string::npos);
  CHECK(text.find(",phase") != std::string::npos);
}

TEST_CASE("golden trace: scripted CN rollout reproduces the committed trace") {
  EnvConfig cfg = cn_config();
  cfg.horizon = 15;
  Env e(cfg);
  e.reset(123);
  env::EpisodeTrace trace;
  trace.task = cfg.task;
  trace.n_agents = 2;
  trace.action_dim = 5;
  trace.seed = 123;
  const int script0[] = {1, 3, 0, 2, 4};
  const int script1[] = {3, 1, 4, 0, 2};
  for (int t = 0; t < 15; ++t) {
    std::vector<Vec> actions(2, Vec(5, 0.0));
    actions[0][script0[t % 5]] = 1.0;
    actions[1][script1[t % 5]] = 1.0;
    env::StepResult r = e.step(actions);
    env::TraceRow row;
    row.t = t;
    for (const env::Body& b : e.state().agents) {
      row.agent_pos.push_back(b.pos.x);
      row.agent_pos.push_back(b.pos.y);
    }
    for (const Vec& a : actions) {
      row.actions.insert(row.actions.end(), a.begin(), a.end());
    }
    row.rewards = r.rewards;
    row.flags = r.flags;
    trace.rows.push_back(row);
  }
  const std::vector<int> phases = env::phase_of(trace, cfg.task);
  for (size_t t = 0; t < trace.rows.size(); ++t) trace.rows[t].phase = phases[t];

  std::ostringstream fresh;
  env::write_trace_csv(trace, fresh);

  std::ifstream golden(std::string(MEMSHARE_TEST_DATA) + "/golden_cn_trace.csv");
  REQUIRE(golden.good());
  std::stringstream expected;
  expected << golden.rdbuf();

  // Compare field by field: exact for headers/integers, 1e-12 for floats
  // (tolerant of libm differences across toolchains).
  std::stringstream actual(fresh.str());
  std::string line_a, line_b;
  std::getline(actual, line_a);
  std::getline(expected, line_b);
  CHECK(line_a == line_b);  // header
  int rows = 0;
  while (std::getline(expected, line_b)) {
    REQUIRE(std::getline(actual, line_a));
    std::stringstream fa(line_a), fb(line_b);
    std::string tok_a, tok_b;
    while (std::getline(fb, tok_b, ',')) {
      REQUIRE(std::getline(fa, tok_a, ','));
      if (tok_a == tok_b) continue;
      const double va = std::stod(tok_a);
      const double vb = std::stod(tok_b);
      CHECK(std::fabs(va - vb) <= 1e-12);
    }
    rows += 1;
  }
  CHECK(rows == 15);
}
