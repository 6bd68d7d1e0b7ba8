#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "../support/oracles.hpp"
#include "sgt/errors.hpp"
#include "sgt/oracle/dataset.hpp"

using namespace sgt;
using namespace sgt::oracle;
using chess::square;

namespace {

oracle_ref::Sq ref(Square s) { return {s.file, s.rank}; }

const Dataset& dataset_seed1() {
  static const Dataset ds = build_dataset(square("d4"), 1);
  return ds;
}

}  // namespace

TEST_CASE("optimal solutions match breadth-first search on every task") {
  for (const Task& task : chess::enumerate_tasks(square("d4"))) {
    for (PieceKind piece : {PieceKind::Bishop, PieceKind::Knight}) {
      const bool knight = piece == PieceKind::Knight;
      const Trajectory traj = solve_optimal(piece, task);
      const auto expected = oracle_ref::bfs_min_moves(knight, ref(task.start), ref(task.pawn_a), ref(task.pawn_b));
      REQUIRE(expected);
      CHECK(traj.length() == static_cast<std::size_t>(*expected));
      CHECK(is_valid_solution(traj, task));

      chess::EnvState st = chess::initial_state(task);
      for (std::size_t i = 0; i < traj.actions.size(); ++i) {
        REQUIRE(chess::is_legal(piece, traj.actions[i], st, task));
        st = chess::step(st, traj.actions[i], task, traj.states[i + 1]).next;
        CHECK(st.agent == traj.states[i + 1]);
      }
      CHECK(st.all_captured());
    }
  }
}

TEST_CASE("ties are broken toward the lexicographically smallest path") {
  for (const Task& task : chess::enumerate_tasks(square("d4"))) {
    for (bool knight : {false, true}) {
      const Trajectory traj = solve_optimal(knight ? PieceKind::Knight : PieceKind::Bishop, task);
      const auto expected = oracle_ref::lexmin_optimal_path(knight, ref(task.start), ref(task.pawn_a), ref(task.pawn_b));
      const SubgoalSequence seq = extract_subgoals(traj);
      REQUIRE(seq.size() == expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) CHECK(seq.tokens[i].index() == expected[i].index());
    }
  }
}

TEST_CASE("worked solver examples") {
  const Task bishop_task{0, square("d4"), square("e5"), square("f6")};
  const Trajectory b = solve_optimal(PieceKind::Bishop, bishop_task);
  CHECK(b.length() == 2);
  CHECK(extract_subgoals(b) == SubgoalSequence{{square("e5"), square("f6")}});
  CHECK(b.states.front() == square("d4"));

  // A knight from a dark square always lands on a light one, so dark pawns
  // need an even number of jumps and at least four in total.
  for (const Task& task : chess::enumerate_tasks(square("d4"))) {
    const auto n = solve_optimal(PieceKind::Knight, task).length();
    CHECK(n % 2 == 0);
    CHECK(n >= 4);
    const auto m = solve_optimal(PieceKind::Bishop, task);
    for (Square s : m.states) CHECK(s.dark());
  }
}

TEST_CASE("subgoal extraction and reconstruction") {
  Trajectory empty;
  empty.states = {square("d4")};
  CHECK(extract_subgoals(empty).empty());

  for (const Task& task : chess::enumerate_tasks(square("d4"))) {
    for (PieceKind piece : {PieceKind::Bishop, PieceKind::Knight}) {
      const Trajectory traj = solve_optimal(piece, task);
      const Trajectory back = trajectory_from_subgoals(piece, task, extract_subgoals(traj));
      CHECK(back.states == traj.states);
      CHECK(back.actions == traj.actions);
    }
  }
  const Task task{0, square("d4"), square("e5"), square("f6")};
  CHECK_THROWS_AS(trajectory_from_subgoals(PieceKind::Knight, task, SubgoalSequence{{square("d5")}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(trajectory_from_subgoals(PieceKind::Bishop, task, SubgoalSequence{{square("g7")}}),
                  std::invalid_argument);
}

TEST_CASE("dataset split and statistics") {
  const Dataset& ds = dataset_seed1();
  CHECK(ds.entries.size() == 253);
  CHECK(ds.train_ids.size() == 228);
  CHECK(ds.test_ids.size() == 25);
  CHECK(std::is_sorted(ds.train_ids.begin(), ds.train_ids.end()));
  CHECK(std::is_sorted(ds.test_ids.begin(), ds.test_ids.end()));
  std::set<int> all(ds.train_ids.begin(), ds.train_ids.end());
  all.insert(ds.test_ids.begin(), ds.test_ids.end());
  CHECK(all.size() == 253);
  for (int id : ds.test_ids) CHECK(ds.entry(id).split == Split::Test);
  for (int id : ds.train_ids) CHECK(ds.entry(id).split == Split::Train);
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    const auto& e = ds.entries[i];
    CHECK(e.task.id == static_cast<int>(i));
    for (Square s : e.expert.tokens) CHECK(s.dark());
  }
  const DatasetStats st = summarize(ds);
  CHECK(st.tasks == 253);
  CHECK(st.learner_mean_length >= 4.0);
  CHECK(st.learner_mean_length <= 5.0);
  CHECK(st.expert_mean_length < st.learner_mean_length);

  const Dataset again = build_dataset(square("d4"), 1);
  CHECK(again.test_ids == ds.test_ids);
  const Dataset other = build_dataset(square("d4"), 2);
  CHECK(other.test_ids != ds.test_ids);
  CHECK(ds.select(ds.test_ids).size() == 25);
}

TEST_CASE("k-fold splits") {
  const Dataset& ds = dataset_seed1();
  const auto folds = kfold_split(ds, 10);
  REQUIRE(folds.size() == 10);
  std::vector<int> seen(253, 0);
  for (const Fold& f : folds) {
    CHECK((f.validation_ids.size() == 25 || f.validation_ids.size() == 26));
    CHECK(f.train_ids.size() + f.validation_ids.size() == 253);
    std::set<int> train(f.train_ids.begin(), f.train_ids.end());
    for (int id : f.validation_ids) {
      CHECK_FALSE(train.count(id));
      ++seen[static_cast<std::size_t>(id)];
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }));
  CHECK(kfold_split(ds, 10)[3].validation_ids == folds[3].validation_ids);

  const auto loo = kfold_split(ds, 253);
  CHECK(loo.size() == 253);
  for (const Fold& f : loo) CHECK(f.validation_ids.size() == 1);
  CHECK_THROWS_AS(kfold_split(ds, 254), std::invalid_argument);
  CHECK_THROWS_AS(kfold_split(ds, 1), std::invalid_argument);
}

TEST_CASE("dataset and task files round-trip") {
  const Dataset& ds = dataset_seed1();
  std::stringstream buf;
  write_dataset(buf, ds, {"note"});
  const Dataset back = read_dataset(buf);
  CHECK(back.start == ds.start);
  CHECK(back.seed == ds.seed);
  CHECK(back.train_ids == ds.train_ids);
  CHECK(back.test_ids == ds.test_ids);
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    CHECK(back.entries[i].task == ds.entries[i].task);
    CHECK(back.entries[i].expert == ds.entries[i].expert);
    CHECK(back.entries[i].learner == ds.entries[i].learner);
  }

  const auto tasks = chess::enumerate_tasks(square("d4"));
  std::stringstream tbuf;
  write_tasks(tbuf, tasks);
  CHECK(read_tasks(tbuf) == tasks);
}

TEST_CASE("malformed dataset files report the offending line") {
  auto line_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_dataset(in, "x");
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("") == 1);
  CHECK(line_of("sgt-dataset 9\n") == 1);
  CHECK(line_of("sgt-dataset 1\nstart z9\n") == 2);
  CHECK(line_of("sgt-dataset 1\nstart d4\nseed abc\n") == 3);
  CHECK(line_of("sgt-dataset 1\nstart d4\nseed 1\n# c\n0 | train | expert: e5\n") == 5);
  CHECK(line_of("sgt-dataset 1\nstart d4\nseed 1\n0 | train | expert: e5 | learner: q9\n") == 4);

  std::stringstream buf;
  write_dataset(buf, dataset_seed1());
  std::string text = buf.str();
  text = text.substr(0, text.rfind('\n', text.size() - 2) + 1);  // drop the last task
  CHECK_THROWS_AS([&] {
    std::istringstream in(text);
    read_dataset(in);
  }(), ParseError);

  std::istringstream bad_tasks("0,d4,e5\n");
  CHECK_THROWS_AS(read_tasks(bad_tasks), ParseError);
}
