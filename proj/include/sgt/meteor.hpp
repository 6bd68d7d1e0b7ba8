#pragma once

#include <span>
#include <utility>
#include <vector>

#include "sgt/oracle/solver.hpp"

namespace sgt::metrics {

struct AlignmentResult {
  int matches = 0;
  int chunks = 0;
  int candidate_length = 0;
  int reference_length = 0;
};

// Maximum-cardinality one-to-one exact-token alignment; among those, the one
// with the fewest chunks (maximal runs contiguous and in order on both sides).
AlignmentResult align(std::span<const int> reference, std::span<const int> candidate);
AlignmentResult align(const oracle::SubgoalSequence& reference, const oracle::SubgoalSequence& candidate);

// Fmean = 10PR / (R + 9P), penalty = 0.5 (chunks / matches)^3, score = Fmean (1 - penalty).
// Zero when nothing matches.
double meteor_from_alignment(const AlignmentResult& a);
double meteor(std::span<const int> reference, std::span<const int> candidate);
double meteor(const oracle::SubgoalSequence& reference, const oracle::SubgoalSequence& candidate);

using SequencePair = std::pair<oracle::SubgoalSequence, oracle::SubgoalSequence>;  // (reference, candidate)

// Mean of per-pair scores. Throws std::invalid_argument on an empty list.
double corpus_meteor(std::span<const SequencePair> pairs);

// Positions where candidate and reference disagree, counting length surplus.
int prediction_errors(const oracle::SubgoalSequence& reference, const oracle::SubgoalSequence& candidate);

}  // namespace sgt::metrics
