#include <doctest.h>

#include <vector>

#include "../support/oracles.hpp"
#include "sgt/meteor.hpp"
#include "sgt/rng.hpp"

using namespace sgt;
using namespace sgt::metrics;

namespace {

oracle::SubgoalSequence seq(std::initializer_list<const char*> names) {
  oracle::SubgoalSequence s;
  for (const char* n : names) s.tokens.push_back(chess::square(n));
  return s;
}

}  // namespace

TEST_CASE("score anchors") {
  const std::vector<int> ref{1, 2, 3, 4};
  CHECK(std::abs(meteor(ref, std::vector<int>{1, 9, 3, 4}) - 0.6389) <= 5e-4);
  CHECK(std::abs(meteor(ref, std::vector<int>{1, 2, 8, 9}) - 0.4688) <= 5e-4);
  CHECK(meteor(ref, ref) == doctest::Approx(1.0 - 0.5 / 64.0).epsilon(1e-12));
  CHECK(meteor(ref, std::vector<int>{1, 9, 3, 4}) == doctest::Approx(oracle_ref::brute_force_meteor(ref, {1, 9, 3, 4})));
}

TEST_CASE("alignment examples") {
  const std::vector<int> ref{1, 2, 3, 4};
  auto a = align(ref, std::vector<int>{1, 2, 3, 4});
  CHECK(a.matches == 4);
  CHECK(a.chunks == 1);
  a = align(ref, std::vector<int>{1, 7, 3, 4});
  CHECK(a.matches == 3);
  CHECK(a.chunks == 2);
  a = align(ref, std::vector<int>{4, 3, 2, 1});
  CHECK(a.matches == 4);
  CHECK(a.chunks == 4);
  CHECK(a.candidate_length == 4);
  CHECK(a.reference_length == 4);

  // Repeated tokens: the contiguous choice wins.
  a = align(std::vector<int>{5, 1, 2, 5, 3}, std::vector<int>{1, 2, 5, 3});
  CHECK(a.matches == 4);
  CHECK(a.chunks == 1);
}

TEST_CASE("alignment agrees with exhaustive search") {
  Rng rng(2024);
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<int> ref(rng.below(7)), cand(rng.below(7));
    const int alphabet = 1 + static_cast<int>(rng.below(4));
    for (int& t : ref) t = static_cast<int>(rng.below(static_cast<std::uint64_t>(alphabet)));
    for (int& t : cand) t = static_cast<int>(rng.below(static_cast<std::uint64_t>(alphabet)));
    const auto got = align(ref, cand);
    const auto want = oracle_ref::brute_force_alignment(ref, cand);
    CHECK(got.matches == want.matches);
    CHECK(got.chunks == want.chunks);
    if (!ref.empty() && !cand.empty()) {
      const double s = meteor(ref, cand);
      CHECK(s == doctest::Approx(oracle_ref::brute_force_meteor(ref, cand)).epsilon(1e-12));
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  }
}

TEST_CASE("degenerate inputs score zero") {
  CHECK(meteor(seq({"e5", "f6"}), oracle::SubgoalSequence{}) == 0.0);
  CHECK(meteor(oracle::SubgoalSequence{}, seq({"e5"})) == 0.0);
  CHECK(meteor(seq({"e5", "f6"}), seq({"a1", "b2"})) == 0.0);
}

TEST_CASE("corpus mean") {
  const auto r = seq({"a2", "b3", "c4", "d5"});
  std::vector<SequencePair> same(5, {r, r});
  CHECK(corpus_meteor(same) == doctest::Approx(0.9921875).epsilon(1e-12));
  std::vector<SequencePair> mixed{{r, seq({"a2", "h8", "c4", "d5"})}, {r, seq({"a2", "b3", "h8", "h7"})}};
  const double want = (oracle_ref::meteor_score(3, 2, 4, 4) + oracle_ref::meteor_score(2, 1, 4, 4)) / 2.0;
  CHECK(corpus_meteor(mixed) == doctest::Approx(want).epsilon(1e-12));
  CHECK(std::abs(corpus_meteor(mixed) - 0.55385) <= 5e-4);
  CHECK_THROWS_AS(corpus_meteor(std::vector<SequencePair>{}), std::invalid_argument);
}

TEST_CASE("prediction error count") {
  const auto r = seq({"a2", "b3", "c4", "d5"});
  CHECK(prediction_errors(r, r) == 0);
  CHECK(prediction_errors(r, seq({"a2", "h8", "c4", "d5"})) == 1);
  CHECK(prediction_errors(r, seq({"a2", "b3"})) == 2);
  CHECK(prediction_errors(r, seq({"a2", "b3", "c4", "d5", "e6", "f7"})) == 2);
  CHECK(prediction_errors(r, oracle::SubgoalSequence{}) == 4);
}
