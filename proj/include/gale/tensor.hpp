#pragma once

#include <cmath>
#include <cstddef>
#include <new>
#include <vector>

#include "gale/common.hpp"

namespace gale {

/// 64-byte-aligned allocator.  Buffer alignment must be a pure function of
/// the tensor shape, not of allocator history: vectorized kernels peel loops
/// by alignment, and address-dependent peeling would break bitwise
/// reproducibility across otherwise identical runs.
template <typename T>
struct AlignedAlloc {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAlloc() = default;
  template <typename U>
  AlignedAlloc(const AlignedAlloc<U>&) {}

  T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAlloc<U>&) const {
    return true;
  }
};

/// Dense row-major matrix.  T is double in all training/verification paths;
/// float instantiations exist for the reduced-precision drift benchmarks.
template <typename T = double>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, T(0)) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  T operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  T* row(int i) { return data_.data() + static_cast<size_t>(i) * cols_; }
  const T* row(int i) const { return data_.data() + static_cast<size_t>(i) * cols_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void set_zero() { std::fill(data_.begin(), data_.end(), T(0)); }
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(rows_, cols_);
    for (size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  Tensor& operator+=(const Tensor& o) {
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

 private:
  int rows_{0};
  int cols_{0};
  std::vector<T, AlignedAlloc<T>> data_;
};

// ---------------------------------------------------------------------------
// Matrix products.  Loop order is chosen so the inner loop runs over
// contiguous memory; reductions are fixed-order for determinism.
// ---------------------------------------------------------------------------

/// C = A * B, A: m x k, B: k x n.
template <typename T>
Tensor<T> matmul(const Tensor<T>& A, const Tensor<T>& B) {
  if (A.cols() != B.rows()) throw ShapeError("matmul: inner dimensions differ");
  Tensor<T> C(A.rows(), B.cols());
  const int m = A.rows(), k = A.cols(), n = B.cols();
  for (int i = 0; i < m; ++i) {
    T* crow = C.row(i);
    const T* arow = A.row(i);
    for (int p = 0; p < k; ++p) {
      T a = arow[p];
      const T* brow = B.row(p);
      for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
  return C;
}

/// C += A^T * B, A: m x k, B: m x n, C: k x n.  Used for weight gradients.
template <typename T>
void matmul_tn_acc(const Tensor<T>& A, const Tensor<T>& B, Tensor<T>& C) {
  if (A.rows() != B.rows()) throw ShapeError("matmul_tn_acc: row counts differ");
  if (C.rows() != A.cols() || C.cols() != B.cols()) throw ShapeError("matmul_tn_acc: bad output shape");
  const int m = A.rows(), k = A.cols(), n = B.cols();
  for (int p = 0; p < m; ++p) {
    const T* arow = A.row(p);
    const T* brow = B.row(p);
    for (int i = 0; i < k; ++i) {
      T a = arow[i];
      T* crow = C.row(i);
      for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

/// C = A * B^T, A: m x k, B: n x k, C: m x n.  Used for input gradients.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& A, const Tensor<T>& B) {
  if (A.cols() != B.cols()) throw ShapeError("matmul_nt: column counts differ");
  Tensor<T> C(A.rows(), B.rows());
  const int m = A.rows(), k = A.cols(), n = B.rows();
  for (int i = 0; i < m; ++i) {
    const T* arow = A.row(i);
    T* crow = C.row(i);
    for (int j = 0; j < n; ++j) {
      const T* brow = B.row(j);
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
  return C;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]));
    if (d > m) m = d;
  }
  return m;
}

}  // namespace gale
