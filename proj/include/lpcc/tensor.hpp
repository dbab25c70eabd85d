#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lpcc::nn {

/// Dense row-major double tensor. Everything in the model is a matrix: rank-1
/// tensors behave as a single row.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Scalar and row kernels shared by the recorded graph and the incremental
/// (step) inference path. Every reduction runs sequentially in index order,
/// and each output row depends only on its own input row, so a row computes
/// bit-identically whether it is processed alone or inside a batch.
namespace kernels {

double sigmoid(double x);
double silu(double x);

/// y[j] = b[j] + sum_k x[k] * w[k * out + j]   (b may be null)
void affine_row(const double* x, std::size_t in, const double* w, const double* b,
                std::size_t out, double* y);

void softmax_row(const double* x, std::size_t n, double* y);
void log_softmax_row(const double* x, std::size_t n, double* y);
void layer_norm_row(const double* x, std::size_t n, double eps, double* y);

Tensor affine(const Tensor& x, const Tensor& w, const Tensor* b);
/// a (n x m) * b (m x p)
Tensor matmul(const Tensor& a, const Tensor& b);
/// a (n x m) * b^T, b (p x m)
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// a^T * b, a (m x n), b (m x p)
Tensor matmul_tn(const Tensor& a, const Tensor& b);

}  // namespace kernels

inline constexpr double kLayerNormEps = 1e-10;

}  // namespace lpcc::nn
