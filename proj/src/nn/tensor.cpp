#include "sgt/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace sgt::nn {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
  require(rows > 0 && cols > 0, "matrix dimensions must be positive");
  data_.assign(rows * cols, fill);
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const { return nn::all_finite(data_); }

void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> y) {
  require(x.size() == w.cols() && y.size() == w.rows(), "matvec: dimension mismatch");
  const std::size_t cols = w.cols();
  const double* p = w.values().data();
  for (std::size_t r = 0; r < w.rows(); ++r, p += cols) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += p[c] * x[c];
    y[r] += acc;
  }
}

void matvec_t_add(const Matrix& w, std::span<const double> dy, std::span<double> dx) {
  require(dy.size() == w.rows() && dx.size() == w.cols(), "matvec_t: dimension mismatch");
  const std::size_t cols = w.cols();
  const double* p = w.values().data();
  for (std::size_t r = 0; r < w.rows(); ++r, p += cols) {
    const double d = dy[r];
    if (d == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) dx[c] += p[c] * d;
  }
}

void outer_add(Matrix& g, std::span<const double> dy, std::span<const double> x) {
  require(dy.size() == g.rows() && x.size() == g.cols(), "outer: dimension mismatch");
  const std::size_t cols = g.cols();
  double* p = g.values().data();
  for (std::size_t r = 0; r < g.rows(); ++r, p += cols) {
    const double d = dy[r];
    if (d == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) p[c] += d * x[c];
  }
}

Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void zero_grads(std::span<Param* const> params) {
  for (Param* p : params) p->zero_grad();
}

double grad_norm(std::span<Param* const> params) {
  double sq = 0.0;
  for (const Param* p : params)
    for (double g : p->grad.values()) sq += g * g;
  return std::sqrt(sq);
}

void clip_grad_norm(std::span<Param* const> params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) scale_grads(params, max_norm / norm);
}

void scale_grads(std::span<Param* const> params, double factor) {
  for (Param* p : params)
    for (double& g : p->grad.values()) g *= factor;
}

}  // namespace sgt::nn
