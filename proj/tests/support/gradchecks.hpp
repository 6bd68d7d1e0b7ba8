#pragma once

// Finite-difference checks of every differentiable component on small random
// configurations. Each returns the worst relative error seen.

#include <cstdint>
#include <vector>

#include "oracles.hpp"
#include "sgt/mapper/mapper.hpp"
#include "sgt/nn/layers.hpp"
#include "sgt/rng.hpp"

namespace gradcheck {

using oracle_ref::GradReport;
using sgt::nn::Vector;

inline Vector random_vector(sgt::Rng& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::size_t dim(sgt::Rng& rng) { return 1 + rng.below(8); }

inline GradReport check_params(std::vector<sgt::nn::Param*> params, const std::function<double()>& loss) {
  GradReport r;
  for (auto* p : params) r.merge(oracle_ref::check_gradient(p->value.values(), p->grad.values(), loss));
  return r;
}

// L = w . dense(x)
inline GradReport dense(std::uint64_t seed, sgt::nn::Activation act) {
  sgt::Rng rng(seed);
  const std::size_t in = dim(rng), out = 1 + dim(rng);
  sgt::nn::Dense layer("dense", in, out, act, rng);
  Vector x = random_vector(rng, in, 2.0);
  const Vector w = random_vector(rng, out);
  auto loss = [&] { return dot(w, layer.forward(x)); };

  sgt::nn::zero_grads(layer.params());
  sgt::nn::DenseCache cache;
  const Vector y = layer.forward(x, &cache);
  const Vector dx = layer.backward(cache, w);
  GradReport r = check_params(layer.params(), loss);
  r.merge(oracle_ref::check_gradient(x, dx, loss));
  return r;
}

// L = wh . h' + wc . c' for one cell step.
inline GradReport lstm_step(std::uint64_t seed) {
  sgt::Rng rng(seed);
  const std::size_t in = dim(rng), hidden = dim(rng);
  sgt::nn::LstmCell cell("cell", in, hidden, rng);
  Vector x = random_vector(rng, in, 2.0);
  sgt::nn::LstmState prev{random_vector(rng, hidden), random_vector(rng, hidden)};
  const Vector wh = random_vector(rng, hidden), wc = random_vector(rng, hidden);
  auto loss = [&] {
    const auto s = cell.step(x, prev);
    return dot(wh, s.h) + dot(wc, s.c);
  };

  sgt::nn::zero_grads(cell.params());
  sgt::nn::LstmStepCache cache;
  cell.step(x, prev, &cache);
  const auto g = cell.backward_step(cache, wh, wc);
  GradReport r = check_params(cell.params(), loss);
  r.merge(oracle_ref::check_gradient(x, g.dx, loss));
  r.merge(oracle_ref::check_gradient(prev.h, g.dh_prev, loss));
  r.merge(oracle_ref::check_gradient(prev.c, g.dc_prev, loss));
  return r;
}

// L = sum_t w_t . h_t over a sequence, either direction.
inline GradReport lstm_sequence(std::uint64_t seed, bool reverse) {
  sgt::Rng rng(seed);
  const std::size_t in = dim(rng), hidden = dim(rng), len = 1 + rng.below(5);
  sgt::nn::LstmCell cell("cell", in, hidden, rng);
  std::vector<Vector> xs, ws;
  for (std::size_t t = 0; t < len; ++t) {
    xs.push_back(random_vector(rng, in, 2.0));
    ws.push_back(random_vector(rng, hidden));
  }
  sgt::nn::LstmState init{random_vector(rng, hidden), random_vector(rng, hidden)};
  auto loss = [&] {
    const auto run = sgt::nn::run_lstm(cell, xs, init, reverse);
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += dot(ws[t], run.hidden[t]);
    return s;
  };

  sgt::nn::zero_grads(cell.params());
  const auto run = sgt::nn::run_lstm(cell, xs, init, reverse);
  const auto g = sgt::nn::backprop_lstm(cell, run, ws);
  GradReport r = check_params(cell.params(), loss);
  for (std::size_t t = 0; t < len; ++t) r.merge(oracle_ref::check_gradient(xs[t], g.d_inputs[t], loss));
  r.merge(oracle_ref::check_gradient(init.h, g.dh0, loss));
  r.merge(oracle_ref::check_gradient(init.c, g.dc0, loss));
  return r;
}

// L = sum_t w_t . [fwd_t ; bwd_t], both directions starting from h0.
inline GradReport bilstm(std::uint64_t seed) {
  sgt::Rng rng(seed);
  const std::size_t in = dim(rng), hidden = dim(rng), len = 1 + rng.below(5);
  sgt::nn::BiLstm net("bi", in, hidden, rng);
  std::vector<Vector> xs, ws;
  for (std::size_t t = 0; t < len; ++t) {
    xs.push_back(random_vector(rng, in, 2.0));
    ws.push_back(random_vector(rng, 2 * hidden));
  }
  Vector h0 = random_vector(rng, hidden);
  auto loss = [&] {
    const auto out = net.forward(xs, h0);
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += dot(ws[t], out[t]);
    return s;
  };

  sgt::nn::zero_grads(net.params());
  sgt::nn::BiLstmCache cache;
  net.forward(xs, h0, &cache);
  const auto g = net.backward(cache, ws);
  GradReport r = check_params(net.params(), loss);
  for (std::size_t t = 0; t < len; ++t) {
    Vector dx = g.d_fwd_inputs[t];
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g.d_bwd_inputs[t][i];
    r.merge(oracle_ref::check_gradient(xs[t], dx, loss));
  }
  r.merge(oracle_ref::check_gradient(h0, g.dh0, loss));
  return r;
}

// Summed cross-entropy of the whole mapper on one task, every parameter.
inline GradReport mapper(std::uint64_t seed, const std::vector<sgt::oracle::DatasetEntry>& pool,
                         bool coordinate_features) {
  sgt::Rng rng(seed);
  sgt::mapper::MapperConfig cfg;
  cfg.embed_dim = dim(rng);
  cfg.encoder_hidden = dim(rng);
  cfg.bridge_dim = dim(rng);
  cfg.decoder_hidden = dim(rng);
  cfg.max_length = 8;
  cfg.coordinate_features = coordinate_features;
  sgt::mapper::MappingModel model(cfg, seed);

  const sgt::oracle::DatasetEntry* entry = nullptr;
  while (!entry || entry->learner.size() + 1 > cfg.max_length) entry = &pool[rng.below(pool.size())];
  auto loss = [&] { return model.loss(entry->expert, entry->task, entry->learner); };

  sgt::nn::zero_grads(model.params());
  model.loss_and_grad(entry->expert, entry->task, entry->learner);
  return check_params(model.params(), loss);
}

}  // namespace gradcheck
