#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace sgt::chess {

inline constexpr int kBoardSize = 8;
inline constexpr int kNumSquares = kBoardSize * kBoardSize;

// Board coordinate. a1 = (0, 0) and is a dark square.
struct Square {
  int file = 0;
  int rank = 0;

  // Index is rank-major: a1 = 0, b1 = 1, ..., h8 = 63.
  constexpr int index() const { return rank * kBoardSize + file; }
  static constexpr Square from_index(int idx) { return {idx % kBoardSize, idx / kBoardSize}; }

  constexpr bool on_board() const {
    return file >= 0 && file < kBoardSize && rank >= 0 && rank < kBoardSize;
  }
  constexpr bool dark() const { return (file + rank) % 2 == 0; }

  std::string name() const;

  friend constexpr bool operator==(Square, Square) = default;
  friend constexpr auto operator<=>(Square a, Square b) { return a.index() <=> b.index(); }
};

// Parses "d4"-style names; nullopt on anything else.
std::optional<Square> parse_square(std::string_view text);
// Throws std::invalid_argument on a bad name.
Square square(std::string_view text);

constexpr int chebyshev(Square a, Square b) {
  const int df = a.file > b.file ? a.file - b.file : b.file - a.file;
  const int dr = a.rank > b.rank ? a.rank - b.rank : b.rank - a.rank;
  return df > dr ? df : dr;
}

enum class PieceKind { Bishop, Knight };

std::string_view piece_name(PieceKind piece);

struct Offset {
  int file = 0;
  int rank = 0;
  friend constexpr bool operator==(Offset, Offset) = default;
};

inline constexpr std::array<Offset, 8> kKnightJumps{{
    {1, 2}, {2, 1}, {2, -1}, {1, -2}, {-1, -2}, {-2, -1}, {-2, 1}, {-1, 2},
}};

inline constexpr std::array<Offset, 4> kBishopDirections{{
    {1, 1}, {1, -1}, {-1, -1}, {-1, 1},
}};

// A primitive move. Knight: direction indexes kKnightJumps, distance is 1.
// Bishop: direction indexes kBishopDirections, distance is 1..7.
struct Action {
  PieceKind piece = PieceKind::Knight;
  int direction = 0;
  int distance = 1;

  Square destination(Square from) const;
  friend constexpr bool operator==(const Action&, const Action&) = default;
};

Action knight_jump(int jump_index);
Action bishop_slide(int direction, int distance);

// The action of `piece` that moves `from` to `to` geometrically (ignores blocking).
std::optional<Action> action_between(PieceKind piece, Square from, Square to);

// Relative subgoal window: every offset with Chebyshev radius 1 or 2, ordered
// by (rank delta, file delta). 24 entries.
inline constexpr int kWindowRadius = 2;
inline constexpr int kWindowSize = 24;
const std::array<Offset, kWindowSize>& window_offsets();
// Slot of `to` in the window around `from`, if it lies inside.
std::optional<int> window_slot(Square from, Square to);

}  // namespace sgt::chess
