#include "sgt/nn/adam.hpp"

#include <cmath>

namespace sgt::nn {

void Adam::step(std::span<Param* const> params) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Param* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  require(params.size() == m_.size(), "adam: parameter count changed between steps");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(params[k]->value.same_shape(m_[k]) && params[k]->grad.same_shape(m_[k]),
            "adam: shape mismatch for " + params[k]->name);
  }

  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k]->value.values();
    auto grad = params[k]->grad.values();
    auto m = m_[k].values();
    auto v = v_[k].values();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace sgt::nn
