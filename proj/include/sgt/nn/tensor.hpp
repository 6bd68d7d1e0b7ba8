#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgt::nn {

// Raised when shapes or preconditions of a kernel call do not line up.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y += W x
void matvec_add(const Matrix& w, std::span<const double> x, std::span<double> y);
// dx += W^T dy
void matvec_t_add(const Matrix& w, std::span<const double> dy, std::span<double> dx);
// g += dy x^T
void outer_add(Matrix& g, std::span<const double> dy, std::span<const double> x);

Vector concat(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

// A trainable tensor together with its gradient accumulator.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

void zero_grads(std::span<Param* const> params);
// Global L2 norm of all gradients.
double grad_norm(std::span<Param* const> params);
// Rescale gradients so their global norm is at most max_norm.
void clip_grad_norm(std::span<Param* const> params, double max_norm);
void scale_grads(std::span<Param* const> params, double factor);

}  // namespace sgt::nn
