#include "sgt/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace sgt::nn {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax of empty vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

Vector masked_softmax(std::span<const double> logits, const std::vector<bool>& allowed) {
  require(logits.size() == allowed.size(), "masked_softmax: mask size mismatch");
  double mx = -INFINITY;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (allowed[i]) mx = std::max(mx, logits[i]);
  require(std::isfinite(mx), "masked_softmax: every entry is masked");
  Vector out(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!allowed[i]) continue;
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

CrossEntropy cross_entropy(std::span<const double> dist, std::size_t target) {
  require(target < dist.size(), "cross_entropy: target index out of range");
  double total = 0.0;
  for (double p : dist) total += p;
  require(std::abs(total - 1.0) <= 1e-6, "cross_entropy: distribution does not sum to 1");
  const double p = dist[target];
  if (p < kLogFloor) return {-std::log(kLogFloor), true};
  return {-std::log(p), false};
}

Vector cross_entropy_grad(std::span<const double> dist, std::size_t target) {
  require(target < dist.size(), "cross_entropy_grad: target index out of range");
  Vector g(dist.size(), 0.0);
  g[target] = dist[target] < kLogFloor ? 0.0 : -1.0 / dist[target];
  return g;
}

Vector softmax_cross_entropy_grad(std::span<const double> probs, std::size_t target) {
  require(target < probs.size(), "softmax_cross_entropy_grad: target index out of range");
  Vector g(probs.begin(), probs.end());
  g[target] -= 1.0;
  return g;
}

void init_uniform_fan_in(Matrix& m, std::size_t fan_in, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : m.values()) v = rng.uniform(-k, k);
}

// ---------------------------------------------------------------- Dense

Dense::Dense(const std::string& name, std::size_t in, std::size_t out, Activation act, Rng& rng)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1), act_(act) {
  init_uniform_fan_in(weight.value, in, rng);
  init_uniform_fan_in(bias.value, in, rng);
}

Vector Dense::forward(std::span<const double> x, DenseCache* cache) const {
  require(x.size() == input_dim(), "dense: input dimension mismatch");
  Vector z(bias.value.values().begin(), bias.value.values().end());
  matvec_add(weight.value, x, z);
  switch (act_) {
    case Activation::identity:
      break;
    case Activation::sigmoid:
      for (double& v : z) v = sigmoid(v);
      break;
    case Activation::tanh:
      for (double& v : z) v = std::tanh(v);
      break;
    case Activation::softmax:
      z = softmax(z);
      break;
  }
  if (cache) {
    cache->input.assign(x.begin(), x.end());
    cache->output = z;
  }
  return z;
}

Vector Dense::backward(const DenseCache& cache, std::span<const double> dy) {
  require(!cache.input.empty() && cache.output.size() == output_dim(),
          "dense backward: missing forward cache");
  require(dy.size() == output_dim(), "dense backward: gradient dimension mismatch");
  const Vector& y = cache.output;
  Vector dz(dy.begin(), dy.end());
  switch (act_) {
    case Activation::identity:
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= y[i] * (1.0 - y[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= 1.0 - y[i] * y[i];
      break;
    case Activation::softmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < dz.size(); ++i) dot += dy[i] * y[i];
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = y[i] * (dy[i] - dot);
      break;
    }
  }
  outer_add(weight.grad, dz, cache.input);
  for (std::size_t i = 0; i < dz.size(); ++i) bias.grad(i, 0) += dz[i];
  Vector dx(input_dim(), 0.0);
  matvec_t_add(weight.value, dz, dx);
  return dx;
}

// ---------------------------------------------------------------- LSTM

LstmCell::LstmCell(const std::string& name, std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
    : weight(name + ".weight", 4 * hidden_dim, input_dim + hidden_dim),
      bias(name + ".bias", 4 * hidden_dim, 1),
      input_dim_(input_dim),
      hidden_dim_(hidden_dim) {
  init_uniform_fan_in(weight.value, input_dim + hidden_dim, rng);
  init_uniform_fan_in(bias.value, input_dim + hidden_dim, rng);
}

LstmState LstmCell::step(std::span<const double> x, const LstmState& prev, LstmStepCache* cache) const {
  require(x.size() == input_dim_, "lstm: input dimension mismatch");
  require(prev.h.size() == hidden_dim_ && prev.c.size() == hidden_dim_,
          "lstm: state dimension mismatch");
  const std::size_t H = hidden_dim_;
  const Vector xh = concat(x, prev.h);
  Vector z(bias.value.values().begin(), bias.value.values().end());
  matvec_add(weight.value, xh, z);

  LstmStepCache local;
  LstmStepCache& k = cache ? *cache : local;
  k.in_gate.resize(H);
  k.forget_gate.resize(H);
  k.candidate.resize(H);
  k.out_gate.resize(H);
  k.c.resize(H);
  k.tanh_c.resize(H);
  LstmState next{Vector(H), Vector(H)};
  for (std::size_t j = 0; j < H; ++j) {
    k.in_gate[j] = sigmoid(z[j]);
    k.forget_gate[j] = sigmoid(z[H + j]);
    k.candidate[j] = std::tanh(z[2 * H + j]);
    k.out_gate[j] = sigmoid(z[3 * H + j]);
    k.c[j] = k.forget_gate[j] * prev.c[j] + k.in_gate[j] * k.candidate[j];
    k.tanh_c[j] = std::tanh(k.c[j]);
    next.c[j] = k.c[j];
    next.h[j] = k.out_gate[j] * k.tanh_c[j];
  }
  if (cache) {
    k.x.assign(x.begin(), x.end());
    k.h_prev = prev.h;
    k.c_prev = prev.c;
  }
  return next;
}

LstmStepGrad LstmCell::backward_step(const LstmStepCache& k, std::span<const double> dh,
                                     std::span<const double> dc) {
  const std::size_t H = hidden_dim_;
  require(k.x.size() == input_dim_ && k.c.size() == H, "lstm backward: missing forward cache");
  require(dh.size() == H && dc.size() == H, "lstm backward: gradient dimension mismatch");
  Vector dz(4 * H);
  LstmStepGrad out;
  out.dc_prev.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double i = k.in_gate[j], f = k.forget_gate[j], g = k.candidate[j], o = k.out_gate[j];
    const double tc = k.tanh_c[j];
    const double dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
    dz[j] = dct * g * i * (1.0 - i);
    dz[H + j] = dct * k.c_prev[j] * f * (1.0 - f);
    dz[2 * H + j] = dct * i * (1.0 - g * g);
    dz[3 * H + j] = dh[j] * tc * o * (1.0 - o);
    out.dc_prev[j] = dct * f;
  }
  const Vector xh = concat(k.x, k.h_prev);
  outer_add(weight.grad, dz, xh);
  for (std::size_t r = 0; r < 4 * H; ++r) bias.grad(r, 0) += dz[r];
  Vector dxh(input_dim_ + H, 0.0);
  matvec_t_add(weight.value, dz, dxh);
  out.dx.assign(dxh.begin(), dxh.begin() + static_cast<std::ptrdiff_t>(input_dim_));
  out.dh_prev.assign(dxh.begin() + static_cast<std::ptrdiff_t>(input_dim_), dxh.end());
  return out;
}

LstmRun run_lstm(const LstmCell& cell, const std::vector<Vector>& inputs, const LstmState& init,
                 bool reverse) {
  require(!inputs.empty(), "lstm: empty sequence");
  const std::size_t n = inputs.size();
  LstmRun run;
  run.reverse = reverse;
  run.steps.resize(n);
  run.hidden.resize(n);
  LstmState state = init;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    state = cell.step(inputs[t], state, &run.steps[t]);
    run.hidden[t] = state.h;
  }
  return run;
}

LstmRunGrad backprop_lstm(LstmCell& cell, const LstmRun& run, const std::vector<Vector>& d_hidden) {
  const std::size_t n = run.steps.size();
  require(n > 0 && d_hidden.size() == n, "lstm backprop: missing forward cache");
  const std::size_t H = cell.hidden_dim();
  LstmRunGrad out;
  out.d_inputs.resize(n);
  Vector dh_carry(H, 0.0), dc_carry(H, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t t = run.reverse ? n - 1 - k : k;
    Vector dh = dh_carry;
    if (!d_hidden[t].empty()) {
      require(d_hidden[t].size() == H, "lstm backprop: gradient dimension mismatch");
      for (std::size_t j = 0; j < H; ++j) dh[j] += d_hidden[t][j];
    }
    LstmStepGrad g = cell.backward_step(run.steps[t], dh, dc_carry);
    out.d_inputs[t] = std::move(g.dx);
    dh_carry = std::move(g.dh_prev);
    dc_carry = std::move(g.dc_prev);
  }
  out.dh0 = std::move(dh_carry);
  out.dc0 = std::move(dc_carry);
  return out;
}

// ---------------------------------------------------------------- BiLSTM

BiLstm::BiLstm(const std::string& name, std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
    : forward_cell(name + ".fwd", input_dim, hidden_dim, rng),
      backward_cell(name + ".bwd", input_dim, hidden_dim, rng) {}

std::vector<Vector> BiLstm::forward(const std::vector<Vector>& seq, std::span<const double> h0,
                                    BiLstmCache* cache) const {
  return forward(seq, seq, h0, cache);
}

std::vector<Vector> BiLstm::forward(const std::vector<Vector>& fwd_seq,
                                    const std::vector<Vector>& bwd_seq, std::span<const double> h0,
                                    BiLstmCache* cache) const {
  require(!fwd_seq.empty(), "bilstm: empty sequence");
  require(fwd_seq.size() == bwd_seq.size(), "bilstm: direction streams differ in length");
  require(forward_cell.hidden_dim() == backward_cell.hidden_dim(), "bilstm: hidden dims differ");
  require(h0.size() == forward_cell.hidden_dim(), "bilstm: h0 dimension mismatch");
  LstmState init{Vector(h0.begin(), h0.end()), Vector(h0.size(), 0.0)};
  LstmRun fwd = run_lstm(forward_cell, fwd_seq, init, false);
  LstmRun bwd = run_lstm(backward_cell, bwd_seq, init, true);
  std::vector<Vector> out(fwd_seq.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = concat(fwd.hidden[t], bwd.hidden[t]);
  if (cache) {
    cache->fwd = std::move(fwd);
    cache->bwd = std::move(bwd);
  }
  return out;
}

BiLstmGrad BiLstm::backward(const BiLstmCache& cache, const std::vector<Vector>& d_out) {
  const std::size_t n = cache.fwd.steps.size();
  require(n > 0, "bilstm backward: missing forward cache");
  require(d_out.size() == n, "bilstm backward: gradient length mismatch");
  const std::size_t H = forward_cell.hidden_dim();
  std::vector<Vector> d_fwd(n), d_bwd(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (d_out[t].empty()) continue;
    require(d_out[t].size() == 2 * H, "bilstm backward: gradient dimension mismatch");
    d_fwd[t].assign(d_out[t].begin(), d_out[t].begin() + static_cast<std::ptrdiff_t>(H));
    d_bwd[t].assign(d_out[t].begin() + static_cast<std::ptrdiff_t>(H), d_out[t].end());
  }
  LstmRunGrad gf = backprop_lstm(forward_cell, cache.fwd, d_fwd);
  LstmRunGrad gb = backprop_lstm(backward_cell, cache.bwd, d_bwd);
  BiLstmGrad out;
  out.d_fwd_inputs = std::move(gf.d_inputs);
  out.d_bwd_inputs = std::move(gb.d_inputs);
  out.dh0 = gf.dh0;
  for (std::size_t j = 0; j < H; ++j) out.dh0[j] += gb.dh0[j];
  return out;
}

std::vector<Param*> BiLstm::params() {
  return {&forward_cell.weight, &forward_cell.bias, &backward_cell.weight, &backward_cell.bias};
}

std::vector<Vector> bilstm_forward(const LstmCell& fwd, const LstmCell& bwd,
                                   const std::vector<Vector>& seq, std::span<const double> h0) {
  BiLstm net(fwd, bwd);
  return net.forward(seq, h0);
}

}  // namespace sgt::nn
