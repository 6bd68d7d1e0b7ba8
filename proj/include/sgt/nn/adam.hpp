#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgt/nn/tensor.hpp"

namespace sgt::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam optimizer state. Moments are bound to parameters by position, so every
// call to step must pass the same parameter list in the same order.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Applies one update to params using their accumulated grads.
  void step(std::span<Param* const> params);

  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace sgt::nn
