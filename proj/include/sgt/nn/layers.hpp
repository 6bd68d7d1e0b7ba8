#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgt/nn/tensor.hpp"
#include "sgt/rng.hpp"

namespace sgt::nn {

enum class Activation { identity, sigmoid, tanh, softmax };

inline constexpr double kLogFloor = 1e-12;

double sigmoid(double x);
Vector softmax(std::span<const double> logits);
// Softmax restricted to entries where allowed[i] is true; the rest get exactly 0.
Vector masked_softmax(std::span<const double> logits, const std::vector<bool>& allowed);

struct CrossEntropy {
  double loss = 0.0;
  bool clamped = false;  // target probability fell below kLogFloor
};

// -log(dist[target]) for a one-hot target. dist must sum to 1 within 1e-6.
CrossEntropy cross_entropy(std::span<const double> dist, std::size_t target);
// Derivative of cross_entropy with respect to dist.
Vector cross_entropy_grad(std::span<const double> dist, std::size_t target);
// Derivative of cross_entropy(softmax(z)) with respect to the logits z: probs - onehot.
Vector softmax_cross_entropy_grad(std::span<const double> probs, std::size_t target);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform_fan_in(Matrix& m, std::size_t fan_in, Rng& rng);

struct DenseCache {
  Vector input;
  Vector output;
};

class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, Activation act, Rng& rng);

  std::size_t input_dim() const { return weight.value.cols(); }
  std::size_t output_dim() const { return weight.value.rows(); }
  Activation activation() const { return act_; }

  Vector forward(std::span<const double> x, DenseCache* cache = nullptr) const;
  // Accumulates parameter gradients; returns dL/dx.
  Vector backward(const DenseCache& cache, std::span<const double> dy);

  std::vector<Param*> params() { return {&weight, &bias}; }

  Param weight;  // out x in
  Param bias;    // out x 1

 private:
  Activation act_ = Activation::identity;
};

struct LstmState {
  Vector h;
  Vector c;
};

struct LstmStepCache {
  Vector x, h_prev, c_prev;
  Vector in_gate, forget_gate, candidate, out_gate;
  Vector c, tanh_c;
};

struct LstmStepGrad {
  Vector dx;
  Vector dh_prev;
  Vector dc_prev;
};

// Gated LSTM cell. Gate rows are stacked [input; forget; candidate; output],
// each gate reading [x ; h_prev].
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }

  LstmState zero_state() const { return {Vector(hidden_dim_, 0.0), Vector(hidden_dim_, 0.0)}; }

  LstmState step(std::span<const double> x, const LstmState& prev, LstmStepCache* cache = nullptr) const;
  LstmStepGrad backward_step(const LstmStepCache& cache, std::span<const double> dh,
                             std::span<const double> dc);

  std::vector<Param*> params() { return {&weight, &bias}; }

  Param weight;  // 4H x (I + H)
  Param bias;    // 4H x 1

 private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
};

// One directional pass over a sequence. hidden[t] is indexed by sequence
// position whichever way the pass ran.
struct LstmRun {
  bool reverse = false;
  std::vector<LstmStepCache> steps;
  std::vector<Vector> hidden;
};

struct LstmRunGrad {
  std::vector<Vector> d_inputs;
  Vector dh0;
  Vector dc0;
};

LstmRun run_lstm(const LstmCell& cell, const std::vector<Vector>& inputs, const LstmState& init,
                 bool reverse);
// d_hidden[t] is dL/dhidden[t]; positions may be empty vectors meaning zero.
LstmRunGrad backprop_lstm(LstmCell& cell, const LstmRun& run, const std::vector<Vector>& d_hidden);

struct BiLstmCache {
  LstmRun fwd;
  LstmRun bwd;
};

struct BiLstmGrad {
  std::vector<Vector> d_fwd_inputs;
  std::vector<Vector> d_bwd_inputs;
  Vector dh0;  // summed over both directions
};

class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(const std::string& name, std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  BiLstm(LstmCell fwd, LstmCell bwd) : forward_cell(std::move(fwd)), backward_cell(std::move(bwd)) {}

  std::size_t output_dim() const { return forward_cell.hidden_dim() + backward_cell.hidden_dim(); }

  // Both directions read the same sequence and start from hidden state h0 (cell state 0).
  std::vector<Vector> forward(const std::vector<Vector>& seq, std::span<const double> h0,
                              BiLstmCache* cache = nullptr) const;
  // Directions read separate streams of equal length.
  std::vector<Vector> forward(const std::vector<Vector>& fwd_seq, const std::vector<Vector>& bwd_seq,
                              std::span<const double> h0, BiLstmCache* cache = nullptr) const;
  BiLstmGrad backward(const BiLstmCache& cache, const std::vector<Vector>& d_out);

  std::vector<Param*> params();

  LstmCell forward_cell;
  LstmCell backward_cell;
};

// Free-function form: per-step [forward ; backward] hidden states.
std::vector<Vector> bilstm_forward(const LstmCell& fwd, const LstmCell& bwd,
                                   const std::vector<Vector>& seq, std::span<const double> h0);

}  // namespace sgt::nn
