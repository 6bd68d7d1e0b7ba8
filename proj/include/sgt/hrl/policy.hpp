#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgt/chess/env.hpp"
#include "sgt/nn/layers.hpp"
#include "sgt/rng.hpp"

namespace sgt::hrl {

using chess::Square;
using nn::Vector;

inline constexpr int kNumJumps = 8;
inline constexpr std::size_t kHighFeatureDim = chess::kNumSquares + 2 + chess::kNumSquares;
inline constexpr std::size_t kLowFeatureDim = kHighFeatureDim + chess::kWindowSize;

// What both policy levels see: agent square, capture flags and the most
// recently achieved subgoal (none at episode start).
struct Observation {
  Square agent;
  bool captured_a = false;
  bool captured_b = false;
  std::optional<Square> previous_subgoal;

  friend bool operator==(const Observation&, const Observation&) = default;
};

Observation observe(const chess::EnvState& state, std::optional<Square> previous_subgoal);

Vector high_features(const Observation& obs);
// Window slots whose square is on the board.
std::vector<bool> high_mask(Square agent);
Square slot_square(Square agent, int slot);

// Window slot pointing from `agent` towards `subgoal`, offset clamped to the
// window radius. agent must differ from subgoal.
int relative_slot(Square agent, Square subgoal);
Vector low_features(const Observation& obs, int subgoal_slot);
// Knight jumps that stay on the board.
std::vector<bool> low_mask(Square agent);

// One tanh hidden layer followed by a masked softmax head.
class MlpPolicy {
 public:
  MlpPolicy() = default;
  MlpPolicy(const std::string& name, std::size_t inputs, std::size_t hidden, std::size_t actions, Rng& rng);

  Vector distribution(std::span<const double> features, const std::vector<bool>& mask) const;
  // Adds scale * d(-log pi(action | features))/dtheta to the gradients and returns -log pi.
  double accumulate_nll_grad(std::span<const double> features, const std::vector<bool>& mask, int action,
                             double scale);
  std::vector<nn::Param*> params();

 private:
  nn::Dense hidden_;
  nn::Dense head_;
};

// One tanh hidden layer, scalar output.
class ValueNet {
 public:
  ValueNet() = default;
  ValueNet(const std::string& name, std::size_t inputs, std::size_t hidden, Rng& rng);

  double value(std::span<const double> features) const;
  // Adds d_value * dV/dtheta to the gradients.
  void accumulate_grad(std::span<const double> features, double d_value);
  std::vector<nn::Param*> params();

 private:
  nn::Dense hidden_;
  nn::Dense head_;
};

int argmax_lowest(std::span<const double> dist);

// pi_h: observation -> distribution over the 24 window slots.
class HighPolicy {
 public:
  explicit HighPolicy(std::uint64_t seed, std::size_t hidden = 64);

  Vector distribution(const Observation& obs) const;
  int greedy_slot(const Observation& obs) const { return argmax_lowest(distribution(obs)); }
  int sample_slot(const Observation& obs, Rng& rng) const;
  double accumulate_nll_grad(const Observation& obs, int slot, double scale);
  std::vector<nn::Param*> params() { return net_.params(); }

 private:
  MlpPolicy net_;
};

// pi_l: (observation, relative subgoal slot) -> distribution over the 8 knight jumps.
class LowPolicy {
 public:
  explicit LowPolicy(std::uint64_t seed, std::size_t hidden = 64);

  Vector distribution(const Observation& obs, int subgoal_slot) const;
  int greedy_jump(const Observation& obs, int subgoal_slot) const {
    return argmax_lowest(distribution(obs, subgoal_slot));
  }
  int sample_jump(const Observation& obs, int subgoal_slot, Rng& rng) const;
  double accumulate_nll_grad(const Observation& obs, int subgoal_slot, int jump, double scale);
  std::vector<nn::Param*> params() { return net_.params(); }

 private:
  MlpPolicy net_;
};

}  // namespace sgt::hrl
