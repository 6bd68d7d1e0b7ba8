#pragma once

#include <stdexcept>
#include <vector>

#include "sgt/chess/env.hpp"

namespace sgt::oracle {

using chess::Action;
using chess::PieceKind;
using chess::Square;
using chess::Task;

struct Trajectory {
  PieceKind piece = PieceKind::Knight;
  int task_id = 0;
  std::vector<Square> states;  // start first
  std::vector<Action> actions;

  std::size_t length() const { return actions.size(); }
};

// Visited squares after the start.
struct SubgoalSequence {
  std::vector<Square> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  friend bool operator==(const SubgoalSequence&, const SubgoalSequence&) = default;
};

class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Minimum-move trajectory capturing both pawns. Unit-cost Dijkstra over
// (square, captured-set) nodes; among optimal paths the one whose visited
// square indices are lexicographically smallest is returned.
Trajectory solve_optimal(PieceKind piece, const Task& task);

SubgoalSequence extract_subgoals(const Trajectory& traj);

// Rebuilds the primitive trajectory behind a subgoal sequence whose consecutive
// squares are single legal moves. Throws std::invalid_argument otherwise.
Trajectory trajectory_from_subgoals(PieceKind piece, const Task& task, const SubgoalSequence& seq);

// Checks |states| = |actions| + 1, every step legal, both pawns captured at the end.
bool is_valid_solution(const Trajectory& traj, const Task& task);

}  // namespace sgt::oracle
