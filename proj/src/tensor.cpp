#include "lpcc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "lpcc/error.hpp"

namespace lpcc::nn {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  const auto n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  data_.assign(n, fill);
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
  Tensor t;
  t.shape_ = std::move(shape);
  const auto n = std::accumulate(t.shape_.begin(), t.shape_.end(), std::size_t{1}, std::multiplies<>());
  require(values.size() == n, ErrorKind::invalid_argument, "value count does not match shape");
  t.data_ = std::move(values);
  return t;
}

std::size_t Tensor::rows() const {
  const auto c = cols();
  return c == 0 ? 0 : data_.size() / c;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

namespace kernels {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

void affine_row(const double* __restrict x, std::size_t in, const double* __restrict w,
                const double* __restrict b, std::size_t out, double* __restrict y) {
  if (b) {
    for (std::size_t j = 0; j < out; ++j) y[j] = b[j];
  } else {
    for (std::size_t j = 0; j < out; ++j) y[j] = 0.0;
  }
  for (std::size_t k = 0; k < in; ++k) {
    const double xk = x[k];
    const double* __restrict wk = w + k * out;
    for (std::size_t j = 0; j < out; ++j) y[j] += xk * wk[j];
  }
}

void softmax_row(const double* x, std::size_t n, double* y) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - m);
    sum += y[i];
  }
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < n; ++i) y[i] *= inv;
}

void log_softmax_row(const double* x, std::size_t n, double* y) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(x[i] - m);
  const double lse = m + std::log(sum);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - lse;
}

void layer_norm_row(const double* x, std::size_t n, double eps, double* y) {
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + eps);
  for (std::size_t i = 0; i < n; ++i) y[i] = (x[i] - mean) * inv;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor* b) {
  const auto in = x.cols();
  require(w.rank() == 2 && w.rows() == in, ErrorKind::invalid_argument,
          "affine: input " + x.shape_string() + " vs weight " + w.shape_string());
  const auto out = w.cols();
  require(!b || b->size() == out, ErrorKind::invalid_argument, "affine: bias size mismatch");
  Tensor y = Tensor::matrix(x.rows(), out);
  for (std::size_t r = 0; r < x.rows(); ++r)
    affine_row(x.data() + r * in, in, w.data(), b ? b->data() : nullptr, out, y.data() + r * out);
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) { return affine(a, b, nullptr); }

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), ErrorKind::invalid_argument,
          "matmul_nt: " + a.shape_string() + " vs " + b.shape_string());
  const auto m = b.cols();
  const auto p = b.rows();
  Tensor bt = Tensor::matrix(m, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < m; ++k) bt(k, i) = b(i, k);
  return affine(a, bt, nullptr);
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows(), ErrorKind::invalid_argument,
          "matmul_tn: " + a.shape_string() + " vs " + b.shape_string());
  const auto m = a.rows();
  const auto n = a.cols();
  const auto p = b.cols();
  Tensor c = Tensor::matrix(n, p);
  for (std::size_t k = 0; k < m; ++k) {
    const double* __restrict brow = b.data() + k * p;
    for (std::size_t i = 0; i < n; ++i) {
      const double aki = a(k, i);
      double* __restrict crow = c.data() + i * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

}  // namespace kernels

}  // namespace lpcc::nn
