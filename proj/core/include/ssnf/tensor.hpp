#pragma once

#include <Eigen/Core>
#include <Eigen/StdVector>
#include <cmath>
#include <cstdint>
#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssnf/rng.hpp"

namespace ssnf {

// Dense row-major 2-D array of floats. Training instantiates S = float,
// verification and gradient checking instantiate S = double. Storage is
// SIMD-aligned so vectorized kernels never peel a data-address-dependent
// scalar prologue; results stay bitwise reproducible across allocations.
template <class S>
class Tensor {
 public:
  using Storage = std::vector<S, Eigen::aligned_allocator<S>>;

  Tensor() = default;
  Tensor(int64_t rows, int64_t cols) : rows_(rows), cols_(cols), data_(size_t(rows * cols), S(0)) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative shape");
  }

  static Tensor zeros(int64_t r, int64_t c) { return Tensor(r, c); }
  static Tensor full(int64_t r, int64_t c, S v) {
    Tensor t(r, c);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static Tensor scalar(S v) { return full(1, 1, v); }
  static Tensor from(int64_t r, int64_t c, const std::vector<S>& values) {
    if (int64_t(values.size()) != r * c) throw std::invalid_argument("Tensor::from: size mismatch");
    Tensor t(r, c);
    std::copy(values.begin(), values.end(), t.data_.begin());
    return t;
  }
  // uniform in [-bound, bound]
  static Tensor uniform(int64_t r, int64_t c, S bound, Rng& rng) {
    Tensor t(r, c);
    for (auto& v : t.data_) v = S(rng.uniform(-double(bound), double(bound)));
    return t;
  }

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  int64_t numel() const { return rows_ * cols_; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  S& at(int64_t r, int64_t c) { return data_[size_t(r * cols_ + c)]; }
  S at(int64_t r, int64_t c) const { return data_[size_t(r * cols_ + c)]; }
  S& operator[](size_t i) { return data_[i]; }
  S operator[](size_t i) const { return data_[i]; }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  Storage& vec() { return data_; }
  const Storage& vec() const { return data_; }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

  // metadata-only reshape; element order is unchanged
  Tensor reshaped(int64_t r, int64_t c) const {
    if (r * c != numel()) throw std::invalid_argument("reshape: element count mismatch");
    Tensor t = *this;
    t.rows_ = r;
    t.cols_ = c;
    return t;
  }

  bool all_finite() const {
    for (S v : data_)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  using EigenMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstEigenMap =
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  EigenMap map() { return EigenMap(data_.data(), rows_, cols_); }
  ConstEigenMap map() const { return ConstEigenMap(data_.data(), rows_, cols_); }

 private:
  int64_t rows_ = 0, cols_ = 0;
  Storage data_;
};

// C = A @ B
template <class S>
void matmul_into(Tensor<S>& out, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  if (out.rows() != a.rows() || out.cols() != b.cols()) out = Tensor<S>(a.rows(), b.cols());
  out.map().noalias() = a.map() * b.map();
}

// C += A^T @ B (gradient accumulation path)
template <class S>
void matmul_at_b_accum(Tensor<S>& out, const Tensor<S>& a, const Tensor<S>& b) {
  out.map().noalias() += a.map().transpose() * b.map();
}

// C += A @ B^T
template <class S>
void matmul_a_bt_accum(Tensor<S>& out, const Tensor<S>& a, const Tensor<S>& b) {
  out.map().noalias() += a.map() * b.map().transpose();
}

template <class S>
S stable_sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  S e = std::exp(x);
  return e / (S(1) + e);
}

template <class S>
S stable_softplus(S x) {
  if (x > S(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace ssnf
