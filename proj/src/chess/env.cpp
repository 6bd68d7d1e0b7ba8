#include "sgt/chess/env.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sgt::chess {

bool Task::valid() const {
  try {
    validate();
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

void Task::validate() const {
  if (!start.on_board() || !start.dark())
    throw std::invalid_argument("task " + std::to_string(id) + ": start must be a dark square");
  for (Square p : {pawn_a, pawn_b}) {
    if (!is_pawn_square(p))
      throw std::invalid_argument("task " + std::to_string(id) + ": pawn " + p.name() +
                                  " is not a dark square on ranks 2-7");
    if (p == start)
      throw std::invalid_argument("task " + std::to_string(id) + ": pawn on the start square");
  }
  if (pawn_a == pawn_b)
    throw std::invalid_argument("task " + std::to_string(id) + ": pawns share a square");
}

EnvState initial_state(const Task& task) { return {task.start, false, false, 0}; }

bool has_uncaptured_pawn(const EnvState& state, const Task& task, Square s) {
  return (!state.captured_a && s == task.pawn_a) || (!state.captured_b && s == task.pawn_b);
}

bool is_done(const EnvState& state, int horizon) {
  return state.all_captured() || state.steps_elapsed >= horizon;
}

std::vector<Action> legal_moves(PieceKind piece, Square from, const EnvState& state, const Task& task) {
  std::vector<Action> moves;
  if (!from.on_board()) return moves;
  if (piece == PieceKind::Knight) {
    for (int j = 0; j < 8; ++j) {
      const Action a = knight_jump(j);
      if (a.destination(from).on_board()) moves.push_back(a);
    }
    return moves;
  }
  for (int d = 0; d < 4; ++d) {
    for (int dist = 1; dist < kBoardSize; ++dist) {
      const Action a = bishop_slide(d, dist);
      const Square to = a.destination(from);
      if (!to.on_board()) break;
      moves.push_back(a);
      if (has_uncaptured_pawn(state, task, to)) break;
    }
  }
  return moves;
}

bool is_legal(PieceKind piece, const Action& action, const EnvState& state, const Task& task) {
  if (action.piece != piece) return false;
  const auto moves = legal_moves(piece, state.agent, state, task);
  return std::find(moves.begin(), moves.end(), action) != moves.end();
}

StepOutcome step(const EnvState& state, const Action& action, const Task& task, Square current_subgoal,
                 int horizon) {
  if (is_done(state, horizon)) throw IllegalMove("step called on a finished episode");
  if (!is_legal(action.piece, action, state, task))
    throw IllegalMove("illegal " + std::string(piece_name(action.piece)) + " move from " +
                      state.agent.name());
  StepOutcome out;
  out.next = state;
  const Square to = action.destination(state.agent);
  out.next.agent = to;
  out.next.steps_elapsed = state.steps_elapsed + 1;
  if (!state.captured_a && to == task.pawn_a) {
    out.next.captured_a = true;
    out.captured = true;
  } else if (!state.captured_b && to == task.pawn_b) {
    out.next.captured_b = true;
    out.captured = true;
  }
  out.r_high = out.captured ? kCaptureReward : kStepPenalty;
  out.r_low = to == current_subgoal ? kSubgoalReward : kStepPenalty;
  out.done = is_done(out.next, horizon);
  return out;
}

std::vector<Task> enumerate_tasks(Square start) {
  if (!is_pawn_square(start))
    throw std::invalid_argument("start " + start.name() +
                                " must be a dark square on ranks 2-7 for the task census");
  std::vector<Square> squares;
  for (int idx = 0; idx < kNumSquares; ++idx) {
    const Square s = Square::from_index(idx);
    if (is_pawn_square(s) && s != start) squares.push_back(s);
  }
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < squares.size(); ++i)
    for (std::size_t j = i + 1; j < squares.size(); ++j)
      tasks.push_back({static_cast<int>(tasks.size()), start, squares[i], squares[j]});
  return tasks;
}

std::vector<Square> subgoal_window(Square from) {
  std::vector<Square> out;
  if (!from.on_board()) return out;
  for (const Offset& o : window_offsets()) {
    const Square s{from.file + o.file, from.rank + o.rank};
    if (s.on_board()) out.push_back(s);
  }
  return out;
}

}  // namespace sgt::chess
