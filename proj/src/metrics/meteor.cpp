#include "sgt/meteor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <functional>
#include <unordered_map>

namespace sgt::metrics {

namespace {

struct Score {
  int matches = 0;
  int chunks = 0;
};

bool better(const Score& a, const Score& b) {
  return a.matches > b.matches || (a.matches == b.matches && a.chunks < b.chunks);
}

class ChunkSearch {
 public:
  ChunkSearch(std::span<const int> ref, std::span<const int> cand) : ref_(ref), cand_(cand) {}

  // Best score for candidate positions i.. given the reference slot matched by
  // candidate i-1 (-1 if unmatched) and the set of used reference slots.
  Score solve(std::size_t i, int prev, std::uint64_t used) {
    if (i == cand_.size()) return {};
    const Key key{used, static_cast<std::uint32_t>(i) * 65U + static_cast<std::uint32_t>(prev + 1)};
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    Score best = solve(i + 1, -1, used);
    for (std::size_t j = 0; j < ref_.size(); ++j) {
      if ((used >> j) & 1U || ref_[j] != cand_[i]) continue;
      Score s = solve(i + 1, static_cast<int>(j), used | (std::uint64_t{1} << j));
      s.matches += 1;
      s.chunks += (prev >= 0 && static_cast<int>(j) == prev + 1) ? 0 : 1;
      if (better(s, best)) best = s;
    }
    memo_.emplace(key, best);
    return best;
  }

 private:
  std::span<const int> ref_;
  std::span<const int> cand_;
  struct Key {
    std::uint64_t used;
    std::uint32_t position;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<std::uint64_t>{}(k.used * 0x9e3779b97f4a7c15ULL ^ k.position);
    }
  };
  std::unordered_map<Key, Score, KeyHash> memo_;
};

std::vector<int> to_ids(const oracle::SubgoalSequence& seq) {
  std::vector<int> ids;
  ids.reserve(seq.tokens.size());
  for (const auto& s : seq.tokens) ids.push_back(s.index());
  return ids;
}

}  // namespace

AlignmentResult align(std::span<const int> reference, std::span<const int> candidate) {
  if (reference.size() > 63 || candidate.size() > 63)
    throw std::invalid_argument("align: sequences longer than 63 tokens are not supported");
  ChunkSearch search(reference, candidate);
  const Score s = search.solve(0, -1, 0);
  return {s.matches, s.chunks, static_cast<int>(candidate.size()), static_cast<int>(reference.size())};
}

AlignmentResult align(const oracle::SubgoalSequence& reference, const oracle::SubgoalSequence& candidate) {
  const auto r = to_ids(reference);
  const auto c = to_ids(candidate);
  return align(r, c);
}

double meteor_from_alignment(const AlignmentResult& a) {
  if (a.matches == 0) return 0.0;
  const double m = a.matches;
  const double precision = m / a.candidate_length;
  const double recall = m / a.reference_length;
  const double fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
  const double penalty = 0.5 * std::pow(static_cast<double>(a.chunks) / m, 3.0);
  return fmean * (1.0 - penalty);
}

double meteor(std::span<const int> reference, std::span<const int> candidate) {
  return meteor_from_alignment(align(reference, candidate));
}

double meteor(const oracle::SubgoalSequence& reference, const oracle::SubgoalSequence& candidate) {
  return meteor_from_alignment(align(reference, candidate));
}

double corpus_meteor(std::span<const SequencePair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("corpus_meteor: empty pair list");
  double total = 0.0;
  for (const auto& [ref, cand] : pairs) total += meteor(ref, cand);
  return total / static_cast<double>(pairs.size());
}

int prediction_errors(const oracle::SubgoalSequence& reference, const oracle::SubgoalSequence& candidate) {
  const std::size_t n = std::max(reference.size(), candidate.size());
  int errors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= reference.size() || i >= candidate.size() || reference.tokens[i] != candidate.tokens[i]) ++errors;
  }
  return errors;
}

}  // namespace sgt::metrics
