#include "sgt/hrl/policy.hpp"

#include <algorithm>
#include <cmath>

namespace sgt::hrl {

Observation observe(const chess::EnvState& state, std::optional<Square> previous_subgoal) {
  return {state.agent, state.captured_a, state.captured_b, previous_subgoal};
}

Vector high_features(const Observation& obs) {
  Vector f(kHighFeatureDim, 0.0);
  f[static_cast<std::size_t>(obs.agent.index())] = 1.0;
  f[chess::kNumSquares] = obs.captured_a ? 1.0 : 0.0;
  f[chess::kNumSquares + 1] = obs.captured_b ? 1.0 : 0.0;
  if (obs.previous_subgoal)
    f[static_cast<std::size_t>(chess::kNumSquares + 2 + obs.previous_subgoal->index())] = 1.0;
  return f;
}

std::vector<bool> high_mask(Square agent) {
  std::vector<bool> mask(chess::kWindowSize);
  for (int k = 0; k < chess::kWindowSize; ++k) mask[static_cast<std::size_t>(k)] = slot_square(agent, k).on_board();
  return mask;
}

Square slot_square(Square agent, int slot) {
  const auto& o = chess::window_offsets().at(static_cast<std::size_t>(slot));
  return {agent.file + o.file, agent.rank + o.rank};
}

int relative_slot(Square agent, Square subgoal) {
  nn::require(agent != subgoal, "relative_slot: subgoal equals agent square");
  const int df = std::clamp(subgoal.file - agent.file, -chess::kWindowRadius, chess::kWindowRadius);
  const int dr = std::clamp(subgoal.rank - agent.rank, -chess::kWindowRadius, chess::kWindowRadius);
  const auto& offsets = chess::window_offsets();
  for (int k = 0; k < chess::kWindowSize; ++k)
    if (offsets[static_cast<std::size_t>(k)] == chess::Offset{df, dr}) return k;
  throw nn::ContractViolation("relative_slot: offset outside window");
}

Vector low_features(const Observation& obs, int subgoal_slot) {
  nn::require(subgoal_slot >= 0 && subgoal_slot < chess::kWindowSize, "low_features: bad subgoal slot");
  Vector f = high_features(obs);
  f.resize(kLowFeatureDim, 0.0);
  f[kHighFeatureDim + static_cast<std::size_t>(subgoal_slot)] = 1.0;
  return f;
}

std::vector<bool> low_mask(Square agent) {
  std::vector<bool> mask(kNumJumps);
  for (int j = 0; j < kNumJumps; ++j)
    mask[static_cast<std::size_t>(j)] = chess::knight_jump(j).destination(agent).on_board();
  return mask;
}

int argmax_lowest(std::span<const double> dist) {
  nn::require(!dist.empty(), "argmax of empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i)
    if (dist[i] > dist[best]) best = i;
  return static_cast<int>(best);
}

// ---------------------------------------------------------------- networks

MlpPolicy::MlpPolicy(const std::string& name, std::size_t inputs, std::size_t hidden, std::size_t actions,
                     Rng& rng)
    : hidden_(name + ".hidden", inputs, hidden, nn::Activation::tanh, rng),
      head_(name + ".head", hidden, actions, nn::Activation::identity, rng) {}

Vector MlpPolicy::distribution(std::span<const double> features, const std::vector<bool>& mask) const {
  return nn::masked_softmax(head_.forward(hidden_.forward(features)), mask);
}

double MlpPolicy::accumulate_nll_grad(std::span<const double> features, const std::vector<bool>& mask,
                                      int action, double scale) {
  nn::require(action >= 0 && static_cast<std::size_t>(action) < mask.size() &&
                  mask[static_cast<std::size_t>(action)],
              "policy: action is masked out");
  nn::DenseCache h_cache, o_cache;
  const Vector h = hidden_.forward(features, &h_cache);
  const Vector probs = nn::masked_softmax(head_.forward(h, &o_cache), mask);
  const auto a = static_cast<std::size_t>(action);
  const double nll = -std::log(std::max(probs[a], nn::kLogFloor));
  Vector d_logits = nn::softmax_cross_entropy_grad(probs, a);
  for (double& d : d_logits) d *= scale;
  const Vector dh = head_.backward(o_cache, d_logits);
  hidden_.backward(h_cache, dh);
  return nll;
}

std::vector<nn::Param*> MlpPolicy::params() {
  return {&hidden_.weight, &hidden_.bias, &head_.weight, &head_.bias};
}

ValueNet::ValueNet(const std::string& name, std::size_t inputs, std::size_t hidden, Rng& rng)
    : hidden_(name + ".hidden", inputs, hidden, nn::Activation::tanh, rng),
      head_(name + ".head", hidden, 1, nn::Activation::identity, rng) {}

double ValueNet::value(std::span<const double> features) const {
  return head_.forward(hidden_.forward(features))[0];
}

void ValueNet::accumulate_grad(std::span<const double> features, double d_value) {
  nn::DenseCache h_cache, o_cache;
  const Vector h = hidden_.forward(features, &h_cache);
  head_.forward(h, &o_cache);
  const Vector dv{d_value};
  hidden_.backward(h_cache, head_.backward(o_cache, dv));
}

std::vector<nn::Param*> ValueNet::params() {
  return {&hidden_.weight, &hidden_.bias, &head_.weight, &head_.bias};
}

// ---------------------------------------------------------------- policies

namespace {

MlpPolicy make_policy(const std::string& name, std::size_t inputs, std::size_t hidden, std::size_t actions,
                      std::uint64_t seed) {
  Rng rng(seed);
  return MlpPolicy(name, inputs, hidden, actions, rng);
}

}  // namespace

HighPolicy::HighPolicy(std::uint64_t seed, std::size_t hidden)
    : net_(make_policy("high", kHighFeatureDim, hidden, chess::kWindowSize, seed)) {}

Vector HighPolicy::distribution(const Observation& obs) const {
  return net_.distribution(high_features(obs), high_mask(obs.agent));
}

int HighPolicy::sample_slot(const Observation& obs, Rng& rng) const {
  return static_cast<int>(rng.categorical(distribution(obs)));
}

double HighPolicy::accumulate_nll_grad(const Observation& obs, int slot, double scale) {
  return net_.accumulate_nll_grad(high_features(obs), high_mask(obs.agent), slot, scale);
}

LowPolicy::LowPolicy(std::uint64_t seed, std::size_t hidden)
    : net_(make_policy("low", kLowFeatureDim, hidden, kNumJumps, seed)) {}

Vector LowPolicy::distribution(const Observation& obs, int subgoal_slot) const {
  return net_.distribution(low_features(obs, subgoal_slot), low_mask(obs.agent));
}

int LowPolicy::sample_jump(const Observation& obs, int subgoal_slot, Rng& rng) const {
  return static_cast<int>(rng.categorical(distribution(obs, subgoal_slot)));
}

double LowPolicy::accumulate_nll_grad(const Observation& obs, int subgoal_slot, int jump, double scale) {
  return net_.accumulate_nll_grad(low_features(obs, subgoal_slot), low_mask(obs.agent), jump, scale);
}

}  // namespace sgt::hrl
