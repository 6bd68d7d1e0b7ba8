#pragma once

#include <stdexcept>
#include <vector>

#include "sgt/chess/board.hpp"

namespace sgt::chess {

inline constexpr int kDefaultHorizon = 30;
inline constexpr double kCaptureReward = 10.0;
inline constexpr double kSubgoalReward = 10.0;
inline constexpr double kStepPenalty = -1.0;

class IllegalMove : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Legal pawn squares: dark, not on the first or last rank.
constexpr bool is_pawn_square(Square s) { return s.on_board() && s.dark() && s.rank >= 1 && s.rank <= 6; }

struct Task {
  int id = 0;
  Square start;
  Square pawn_a;
  Square pawn_b;

  bool valid() const;
  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
  friend bool operator==(const Task&, const Task&) = default;
};

struct EnvState {
  Square agent;
  bool captured_a = false;
  bool captured_b = false;
  int steps_elapsed = 0;

  int captures() const { return static_cast<int>(captured_a) + static_cast<int>(captured_b); }
  bool all_captured() const { return captured_a && captured_b; }
  friend bool operator==(const EnvState&, const EnvState&) = default;
};

EnvState initial_state(const Task& task);

// Uncaptured pawn standing on `s`, if any.
bool has_uncaptured_pawn(const EnvState& state, const Task& task, Square s);

bool is_done(const EnvState& state, int horizon = kDefaultHorizon);

struct StepOutcome {
  EnvState next;
  double r_high = kStepPenalty;
  double r_low = kStepPenalty;
  bool captured = false;
  bool done = false;
};

// Knight: every on-board jump. Bishop: every diagonal square up to and
// including the first uncaptured pawn on each ray.
std::vector<Action> legal_moves(PieceKind piece, Square from, const EnvState& state, const Task& task);

bool is_legal(PieceKind piece, const Action& action, const EnvState& state, const Task& task);

// Applies a legal action. r_high is 10 on a capture, -1 otherwise; r_low is 10
// when the destination is current_subgoal, -1 otherwise.
StepOutcome step(const EnvState& state, const Action& action, const Task& task, Square current_subgoal,
                 int horizon = kDefaultHorizon);

// Every unordered pair of legal pawn squares other than start, in ascending
// (pawn_a, pawn_b) index order with pawn_a < pawn_b. Ids are 0-based positions.
std::vector<Task> enumerate_tasks(Square start);

// On-board squares at Chebyshev distance 1 or 2 from `from`, ascending index.
std::vector<Square> subgoal_window(Square from);

}  // namespace sgt::chess
