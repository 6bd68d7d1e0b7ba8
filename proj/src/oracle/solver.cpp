#include "sgt/oracle/solver.hpp"

#include <array>
#include <climits>
#include <functional>
#include <queue>
#include <string>
#include <utility>

namespace sgt::oracle {

namespace {

constexpr int kMasks = 4;  // bit 0: pawn_a captured, bit 1: pawn_b captured
constexpr int kNodes = chess::kNumSquares * kMasks;
constexpr int kUnbounded = INT_MAX;

int node_of(Square s, int mask) { return s.index() * kMasks + mask; }
Square square_of(int node) { return Square::from_index(node / kMasks); }
int mask_of(int node) { return node % kMasks; }

chess::EnvState state_of(int node) {
  const int mask = mask_of(node);
  return {square_of(node), (mask & 1) != 0, (mask & 2) != 0, 0};
}

struct Edge {
  int to;
  Action action;
};

using Graph = std::array<std::vector<Edge>, kNodes>;

// Forward edges of the product graph; terminal (both captured) nodes have none.
Graph build_graph(PieceKind piece, const Task& task) {
  Graph g;
  for (int node = 0; node < kNodes; ++node) {
    if (mask_of(node) == 3) continue;
    const chess::EnvState st = state_of(node);
    for (const Action& a : chess::legal_moves(piece, st.agent, st, task)) {
      const Square to = a.destination(st.agent);
      int mask = mask_of(node);
      if (!st.captured_a && to == task.pawn_a) mask |= 1;
      if (!st.captured_b && to == task.pawn_b) mask |= 2;
      g[node].push_back({node_of(to, mask), a});
    }
  }
  return g;
}

// Distance from every node to the nearest terminal node, by Dijkstra on the
// reversed graph seeded with all terminal nodes.
std::array<int, kNodes> distance_to_goal(const Graph& g) {
  std::array<std::vector<int>, kNodes> reverse;
  for (int u = 0; u < kNodes; ++u)
    for (const Edge& e : g[u]) reverse[e.to].push_back(u);

  std::array<int, kNodes> dist;
  dist.fill(kUnbounded);
  using Item = std::pair<int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
  for (int sq = 0; sq < chess::kNumSquares; ++sq) {
    const int goal = sq * kMasks + 3;
    dist[goal] = 0;
    frontier.push({0, goal});
  }
  while (!frontier.empty()) {
    const auto [d, v] = frontier.top();
    frontier.pop();
    if (d > dist[v]) continue;
    for (int u : reverse[v]) {
      if (d + 1 < dist[u]) {
        dist[u] = d + 1;
        frontier.push({d + 1, u});
      }
    }
  }
  return dist;
}

}  // namespace

Trajectory solve_optimal(PieceKind piece, const Task& task) {
  task.validate();
  const Graph g = build_graph(piece, task);
  const auto dist = distance_to_goal(g);

  int node = node_of(task.start, 0);
  if (dist[node] == kUnbounded)
    throw Unreachable("task " + std::to_string(task.id) + " cannot be solved by the " +
                      std::string(chess::piece_name(piece)));
  Trajectory traj;
  traj.piece = piece;
  traj.task_id = task.id;
  traj.states.push_back(task.start);
  while (dist[node] > 0) {
    const Edge* best = nullptr;
    for (const Edge& e : g[node]) {
      if (dist[e.to] != dist[node] - 1) continue;
      if (!best || square_of(e.to).index() < square_of(best->to).index()) best = &e;
    }
    traj.actions.push_back(best->action);
    traj.states.push_back(square_of(best->to));
    node = best->to;
  }
  return traj;
}

SubgoalSequence extract_subgoals(const Trajectory& traj) {
  SubgoalSequence seq;
  if (traj.states.size() > 1) seq.tokens.assign(traj.states.begin() + 1, traj.states.end());
  return seq;
}

Trajectory trajectory_from_subgoals(PieceKind piece, const Task& task, const SubgoalSequence& seq) {
  Trajectory traj;
  traj.piece = piece;
  traj.task_id = task.id;
  traj.states.push_back(task.start);
  chess::EnvState st = chess::initial_state(task);
  for (Square next : seq.tokens) {
    const auto action = chess::action_between(piece, traj.states.back(), next);
    if (!action || !chess::is_legal(piece, *action, st, task))
      throw std::invalid_argument("task " + std::to_string(task.id) + ": " +
                                  traj.states.back().name() + " -> " + next.name() +
                                  " is not a single " + std::string(chess::piece_name(piece)) +
                                  " move");
    traj.actions.push_back(*action);
    traj.states.push_back(next);
    st.agent = next;
    if (next == task.pawn_a) st.captured_a = true;
    if (next == task.pawn_b) st.captured_b = true;
  }
  return traj;
}

bool is_valid_solution(const Trajectory& traj, const Task& task) {
  if (traj.states.size() != traj.actions.size() + 1) return false;
  if (traj.states.front() != task.start) return false;
  chess::EnvState st = chess::initial_state(task);
  for (std::size_t i = 0; i < traj.actions.size(); ++i) {
    if (st.all_captured()) return false;
    if (!chess::is_legal(traj.piece, traj.actions[i], st, task)) return false;
    const auto out = chess::step(st, traj.actions[i], task, traj.states[i + 1], INT_MAX);
    if (out.next.agent != traj.states[i + 1]) return false;
    st = out.next;
  }
  return st.all_captured();
}

}  // namespace sgt::oracle
