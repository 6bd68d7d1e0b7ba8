#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "../support/oracles.hpp"
#include "sgt/errors.hpp"
#include "sgt/hrl/transfer.hpp"
#include "sgt/oracle/dataset.hpp"

using namespace sgt;
using namespace sgt::hrl;
using chess::square;

namespace {

const oracle::Dataset& data() {
  static const oracle::Dataset ds = oracle::build_dataset(square("d4"), 1);
  return ds;
}

const LowPolicy& pretrained() {
  static const LowPolicy low = [] {
    std::vector<oracle::Trajectory> demos;
    std::vector<chess::Task> tasks;
    for (int id : data().train_ids) {
      const auto& e = data().entry(id);
      demos.push_back(oracle::trajectory_from_subgoals(chess::PieceKind::Knight, e.task, e.learner));
      tasks.push_back(e.task);
    }
    TrainConfig cfg;
    return pretrain_low(LowPolicy(derive_seed(1, "low-init")), demos, tasks, cfg);
  }();
  return low;
}

oracle::SubgoalSequence random_prediction(Rng& rng) {
  oracle::SubgoalSequence s;
  const std::size_t n = 1 + rng.below(8);
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back(chess::Square::from_index(static_cast<int>(rng.below(64))));
  return s;
}

// Two chain positions with the same observation but different targets cannot
// both be reproduced by any observation-conditioned policy.
bool has_conflict(const chess::Task& task, const std::vector<chess::Square>& chain) {
  const auto obs = chained_observations(task, chain);
  for (std::size_t i = 0; i < chain.size(); ++i)
    for (std::size_t j = i + 1; j < chain.size(); ++j)
      if (obs[i] == obs[j] && chain[i] != chain[j]) return true;
  return false;
}

}  // namespace

TEST_CASE("policy masks and distributions") {
  HighPolicy high(3);
  LowPolicy low(4);
  for (int i = 0; i < chess::kNumSquares; ++i) {
    const auto sq = chess::Square::from_index(i);
    const Observation obs{sq, i % 2 == 0, i % 3 == 0, std::nullopt};
    const auto hm = high_mask(sq);
    const auto hd = high.distribution(obs);
    REQUIRE(hd.size() == static_cast<std::size_t>(chess::kWindowSize));
    double sum = 0.0;
    int on = 0;
    for (int k = 0; k < chess::kWindowSize; ++k) {
      sum += hd[static_cast<std::size_t>(k)];
      if (!hm[static_cast<std::size_t>(k)]) CHECK(hd[static_cast<std::size_t>(k)] == 0.0);
      on += hm[static_cast<std::size_t>(k)] ? 1 : 0;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(static_cast<std::size_t>(on) == chess::subgoal_window(sq).size());

    const auto lm = low_mask(sq);
    const auto ld = low.distribution(obs, 0);
    sum = 0.0;
    for (int j = 0; j < kNumJumps; ++j) {
      sum += ld[static_cast<std::size_t>(j)];
      if (!lm[static_cast<std::size_t>(j)]) CHECK(ld[static_cast<std::size_t>(j)] == 0.0);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("relative subgoal slot") {
  const auto d4 = square("d4");
  CHECK(slot_square(d4, relative_slot(d4, square("e6"))) == square("e6"));
  CHECK(slot_square(d4, relative_slot(d4, square("h8"))) == square("f6"));
  CHECK(slot_square(d4, relative_slot(d4, square("d1"))) == square("d2"));
  CHECK(slot_square(d4, relative_slot(d4, square("a4"))) == square("b4"));
  CHECK_THROWS_AS(relative_slot(d4, d4), nn::ContractViolation);
}

TEST_CASE("window projection matches the reference chain") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pred = random_prediction(rng);
    const auto start = chess::Square::from_index(static_cast<int>(rng.below(64)));
    int projected = 0;
    const auto got = project_to_window_chain(start, pred, &projected);
    std::vector<oracle_ref::Sq> in;
    for (auto s : pred.tokens) in.push_back({s.file, s.rank});
    const auto want = oracle_ref::project_chain({start.file, start.rank}, in);
    REQUIRE(got.size() == want.size());
    int moved = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].index() == want[i].index());
      moved += got[i] != pred.tokens[i] ? 1 : 0;
    }
    CHECK(projected == moved);
  }
}

TEST_CASE("warm initialization without noise reproduces the projected chain") {
  TrainConfig cfg;
  cfg.v_noise = 0.0;
  const auto tasks = chess::enumerate_tasks(square("d4"));
  Rng rng(2025);
  int reproduced = 0, attempted = 0;
  while (attempted < 20) {
    const auto& task = tasks[rng.below(tasks.size())];
    const auto pred = random_prediction(rng);
    const auto chain = project_to_window_chain(task.start, pred);
    if (has_conflict(task, chain)) continue;
    ++attempted;
    cfg.seed = rng.next_u64();
    WarmInitReport rep;
    const HighPolicy warm = warm_init_high(HighPolicy(cfg.seed), pred, task, cfg, &rep);
    CHECK(rep.chain == chain);
    const auto rollout = greedy_high_rollout(warm, task, chain.size());
    std::vector<oracle_ref::Sq> in;
    for (auto s : pred.tokens) in.push_back({s.file, s.rank});
    const auto want = oracle_ref::project_chain({task.start.file, task.start.rank}, in);
    bool same = rollout.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) same = rollout[i].index() == want[i].index();
    reproduced += same ? 1 : 0;
  }
  CHECK(reproduced == 20);
}

TEST_CASE("full label noise gives chance-level agreement") {
  TrainConfig cfg;
  cfg.v_noise = 1.0;
  const auto& e = data().entry(data().test_ids.front());
  int agree = 0, total = 0;
  double chance = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    cfg.seed = seed;
    WarmInitReport rep;
    const HighPolicy warm = warm_init_high(HighPolicy(seed), e.learner, e.task, cfg, &rep);
    const auto obs = chained_observations(e.task, rep.chain);
    for (std::size_t k = 0; k < rep.chain.size(); ++k) {
      const auto slot = slot_square(obs[k].agent, warm.greedy_slot(obs[k]));
      agree += slot == rep.chain[k] ? 1 : 0;
      ++total;
      chance += 1.0 / static_cast<double>(chess::subgoal_window(obs[k].agent).size());
    }
  }
  const double rate = static_cast<double>(agree) / total;
  const double expected = chance / total;
  CHECK(rate < expected + 4.0 * std::sqrt(expected * (1 - expected) / total) + 0.02);

  WarmInitReport rep;
  HighPolicy base(5);
  const HighPolicy same = warm_init_high(base, oracle::SubgoalSequence{}, e.task, cfg, &rep);
  CHECK(rep.empty_prediction);
  const Observation o{e.task.start, false, false, std::nullopt};
  CHECK(same.distribution(o) == base.distribution(o));
}

TEST_CASE("pretrained low level follows demonstrations and one-jump subgoals") {
  const LowPolicy& low = pretrained();
  std::vector<oracle::Trajectory> demos;
  std::vector<chess::Task> tasks;
  for (int id : data().train_ids) {
    const auto& e = data().entry(id);
    demos.push_back(oracle::trajectory_from_subgoals(chess::PieceKind::Knight, e.task, e.learner));
    tasks.push_back(e.task);
  }
  const auto samples = low_level_samples(demos, tasks);
  int hit = 0;
  for (const auto& s : samples) hit += low.greedy_jump(s.obs, s.subgoal_slot) == s.jump ? 1 : 0;
  CHECK(static_cast<double>(hit) / samples.size() >= 0.95);

  int ok = 0, n = 0;
  for (int i = 0; i < chess::kNumSquares; ++i) {
    const auto sq = chess::Square::from_index(i);
    for (int j = 0; j < kNumJumps; ++j) {
      const auto to = chess::knight_jump(j).destination(sq);
      if (!to.on_board()) continue;
      const Observation obs{sq, false, false, sq};
      ok += low.greedy_jump(obs, relative_slot(sq, to)) == j ? 1 : 0;
      ++n;
    }
  }
  CHECK(static_cast<double>(ok) / n >= 0.95);

  CHECK_THROWS_AS(pretrain_low(LowPolicy(1), {}, {}, TrainConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(low_level_samples(std::vector<oracle::Trajectory>{oracle::solve_optimal(chess::PieceKind::Bishop, tasks[0])},
                                    std::vector<chess::Task>{tasks[0]}),
                  std::invalid_argument);
}

TEST_CASE("high-level return accounting") {
  const auto tasks = chess::enumerate_tasks(square("d4"));
  for (bool per_step : {false, true}) {
    TrainConfig cfg;
    cfg.per_step_high_reward = per_step;
    const HighPolicy high(11);
    const LowPolicy low(12);
    Rng rng(per_step ? 2 : 1);
    for (int ep = 0; ep < 300; ++ep) {
      const auto& task = tasks[rng.below(tasks.size())];
      const EpisodeTrace t = run_episode(high, low, task, cfg, rng);
      const int c = t.captures();
      int steps = 0;
      for (const auto& a : t.attempts) {
        steps += static_cast<int>(a.steps.size());
        CHECK(a.steps.size() <= static_cast<std::size_t>(cfg.subgoal_budget));
        CHECK(!a.steps.empty());
      }
      const int k = static_cast<int>(t.attempts.size());
      const int units = per_step ? steps : k;
      CHECK(t.high_return == 10.0 * c - (units - c));
      CHECK(t.high_return <= 20.0);
      CHECK(t.final_state.steps_elapsed == steps);
      CHECK((t.final_state.all_captured() || steps == cfg.horizon));
    }
  }
}

TEST_CASE("an optimal four-jump solution returns 18") {
  // Greedy policies trained to follow the oracle path.
  for (int id : data().test_ids) {
    const auto& e = data().entry(id);
    if (e.learner.size() != 4) continue;
    TrainConfig cfg;
    cfg.v_noise = 0.0;
    const HighPolicy warm = warm_init_high(HighPolicy(1), e.learner, e.task, cfg);
    const LowPolicy& low = pretrained();
    Rng rng(1);
    const EpisodeTrace t = run_episode(warm, low, e.task, cfg, rng, true);
    if (t.final_state.steps_elapsed != 4) continue;
    CHECK(t.high_return == 18.0);
    CHECK(t.captures() == 2);
    return;
  }
  FAIL("no four-jump test task solved greedily");
}

TEST_CASE("learning curves bin and round-trip") {
  LearningCurve c;
  c.task_id = 7;
  c.mode = TransferMode::ExpertDirect;
  c.trial = 2;
  c.bin_size = 3;
  c.returns = {1, 2, 3, 4, 5, 6, 7};
  CHECK(c.bin_count() == 3);
  CHECK(c.binned() == std::vector<double>{2, 5, 7});

  std::stringstream buf;
  write_curve(buf, c, {"sgt transfer"});
  const CurveRecord r = read_curve(buf);
  CHECK(r.task_id == 7);
  CHECK(r.mode == TransferMode::ExpertDirect);
  CHECK(r.trial == 2);
  CHECK(r.bin_size == 3);
  CHECK(r.bins == c.binned());

  for (const char* bad : {"", "task,mode,trial,bin_size\n1,bogus,0,3\n", "task,mode,trial,bin_size\n1,no-transfer,0,3\nbins\n",
                          "task,mode,trial,bin_size\n1,no-transfer,0,3\nbin_index,mean_return\n1,2.0\n",
                          "task,mode,trial,bin_size\n1,no-transfer,0,3\nbin_index,mean_return\n0,abc\n"}) {
    std::istringstream in(bad);
    CHECK_THROWS_AS(read_curve(in), ParseError);
  }
  CHECK(parse_mode("mapping-warm") == TransferMode::MappingWarm);
  CHECK_FALSE(parse_mode("warm"));
}

TEST_CASE("baseline runs are deterministic and validate inputs") {
  const auto& e = data().entry(data().test_ids.front());
  TrainConfig cfg;
  cfg.episodes = 30;
  cfg.bin_size = 10;
  cfg.trials = 2;
  BaselineInputs in;
  in.expert = e.expert;
  in.pretrained_low = &pretrained();
  const auto a = run_baseline(TransferMode::ExpertDirect, e.task, in, cfg);
  const auto b = run_baseline(TransferMode::ExpertDirect, e.task, in, cfg);
  REQUIRE(a.size() == 2);
  CHECK(a[0].returns == b[0].returns);
  CHECK(a[1].returns == b[1].returns);
  CHECK(a[0].returns != a[1].returns);
  CHECK(a[0].bin_count() == 3);

  WarmInitReport rep;
  warm_init_high(HighPolicy(1), e.expert, e.task, cfg, &rep);
  CHECK(rep.chain.size() == e.expert.size());

  CHECK_THROWS_AS(run_baseline(TransferMode::MappingWarm, e.task, in, cfg), std::invalid_argument);
  BaselineInputs no_low = in;
  no_low.pretrained_low = nullptr;
  CHECK_THROWS_AS(run_baseline(TransferMode::NoTransfer, e.task, no_low, cfg), std::invalid_argument);
  BaselineInputs no_expert = in;
  no_expert.expert = {};
  CHECK_THROWS_AS(run_baseline(TransferMode::ExpertDirect, e.task, no_expert, cfg), std::invalid_argument);
  TrainConfig bad = cfg;
  bad.v_noise = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("expert subgoals often leave the knight window") {
  int projected = 0;
  for (const auto& e : data().entries) {
    int p = 0;
    project_to_window_chain(e.task.start, e.expert, &p);
    projected += p;
  }
  CHECK(projected > 0);
}
