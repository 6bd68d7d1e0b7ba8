#include "sgt/chess/board.hpp"

#include <stdexcept>
#include <string>

namespace sgt::chess {

std::string Square::name() const {
  std::string s(2, ' ');
  s[0] = static_cast<char>('a' + file);
  s[1] = static_cast<char>('1' + rank);
  return s;
}

std::optional<Square> parse_square(std::string_view text) {
  if (text.size() != 2) return std::nullopt;
  const Square s{text[0] - 'a', text[1] - '1'};
  if (!s.on_board()) return std::nullopt;
  return s;
}

Square square(std::string_view text) {
  if (auto s = parse_square(text)) return *s;
  throw std::invalid_argument("bad square name '" + std::string(text) + "'");
}

std::string_view piece_name(PieceKind piece) {
  return piece == PieceKind::Bishop ? "bishop" : "knight";
}

Square Action::destination(Square from) const {
  if (piece == PieceKind::Knight) {
    const Offset o = kKnightJumps.at(static_cast<std::size_t>(direction));
    return {from.file + o.file, from.rank + o.rank};
  }
  const Offset o = kBishopDirections.at(static_cast<std::size_t>(direction));
  return {from.file + o.file * distance, from.rank + o.rank * distance};
}

Action knight_jump(int jump_index) { return {PieceKind::Knight, jump_index, 1}; }

Action bishop_slide(int direction, int distance) { return {PieceKind::Bishop, direction, distance}; }

std::optional<Action> action_between(PieceKind piece, Square from, Square to) {
  const int df = to.file - from.file;
  const int dr = to.rank - from.rank;
  if (piece == PieceKind::Knight) {
    for (int j = 0; j < 8; ++j)
      if (kKnightJumps[j] == Offset{df, dr}) return knight_jump(j);
    return std::nullopt;
  }
  if (df == 0 || (df != dr && df != -dr)) return std::nullopt;
  const int dist = df > 0 ? df : -df;
  for (int d = 0; d < 4; ++d)
    if (kBishopDirections[d] == Offset{df / dist, dr / dist}) return bishop_slide(d, dist);
  return std::nullopt;
}

const std::array<Offset, kWindowSize>& window_offsets() {
  static const std::array<Offset, kWindowSize> offsets = [] {
    std::array<Offset, kWindowSize> out{};
    std::size_t k = 0;
    for (int dr = -kWindowRadius; dr <= kWindowRadius; ++dr)
      for (int df = -kWindowRadius; df <= kWindowRadius; ++df)
        if (df != 0 || dr != 0) out[k++] = {df, dr};
    return out;
  }();
  return offsets;
}

std::optional<int> window_slot(Square from, Square to) {
  const Offset delta{to.file - from.file, to.rank - from.rank};
  const auto& offsets = window_offsets();
  for (int k = 0; k < kWindowSize; ++k)
    if (offsets[k] == delta) return k;
  return std::nullopt;
}

}  // namespace sgt::chess
