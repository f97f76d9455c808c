#pragma once
#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rrl {

// Dense row-major matrix of doubles. reshape() keeps capacity so hot
// loops that reuse a Matrix stop allocating after the first call.
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  void resize(int r, int c) {
    rows = r;
    cols = c;
    a.assign(static_cast<size_t>(r) * c, 0.0);
  }
  void reshape(int r, int c) {
    rows = r;
    cols = c;
    a.resize(static_cast<size_t>(r) * c);
  }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }

  double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// C = A * B^T.  A: MxK, B: NxK, C: MxN.  Tall inputs go through a
// transposed copy of B so the inner loop accumulates independent
// output elements; that form vectorizes without reassociating any
// single dot product, which a reduction-style loop cannot.
inline void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C) {
  if (A.cols != B.cols) throw std::invalid_argument("matmul_nt: inner dims differ");
  C.reshape(A.rows, B.rows);
  const int K = A.cols, N = B.rows;
  if (A.rows >= 8 && N >= 4) {
    thread_local Matrix bt;
    bt.reshape(K, N);
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < K; ++k) bt(k, j) = B(j, k);
    for (int i = 0; i < A.rows; ++i) {
      const double* ai = A.row(i);
      double* ci = C.row(i);
      for (int j = 0; j < N; ++j) ci[j] = 0.0;
      for (int k = 0; k < K; ++k) {
        const double aik = ai[k];
        const double* btk = bt.row(k);
        for (int j = 0; j < N; ++j) ci[j] += aik * btk[j];
      }
    }
    return;
  }
  for (int i = 0; i < A.rows; ++i) {
    const double* ai = A.row(i);
    double* ci = C.row(i);
    for (int j = 0; j < N; ++j) {
      const double* bj = B.row(j);
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += ai[k] * bj[k];
      ci[j] = s;
    }
  }
}

// C = A * B.  A: MxN, B: NxK, C: MxK.
inline void matmul_nn(const Matrix& A, const Matrix& B, Matrix& C) {
  if (A.cols != B.rows) throw std::invalid_argument("matmul_nn: inner dims differ");
  C.reshape(A.rows, B.cols);
  C.zero();
  const int K = B.cols;
  for (int i = 0; i < A.rows; ++i) {
    const double* ai = A.row(i);
    double* ci = C.row(i);
    for (int j = 0; j < A.cols; ++j) {
      const double aij = ai[j];
      if (aij == 0.0) continue;
      const double* bj = B.row(j);
      for (int k = 0; k < K; ++k) ci[k] += aij * bj[k];
    }
  }
}

// C += A^T * B.  A: MxN, B: MxK, C: NxK.  Caller owns zeroing C.
inline void matmul_tn_acc(const Matrix& A, const Matrix& B, Matrix& C) {
  if (A.rows != B.rows) throw std::invalid_argument("matmul_tn_acc: outer dims differ");
  if (C.rows != A.cols || C.cols != B.cols)
    throw std::invalid_argument("matmul_tn_acc: bad output shape");
  const int K = B.cols;
  for (int i = 0; i < A.rows; ++i) {
    const double* ai = A.row(i);
    const double* bi = B.row(i);
    for (int j = 0; j < A.cols; ++j) {
      const double aij = ai[j];
      if (aij == 0.0) continue;
      double* cj = C.row(j);
      for (int k = 0; k < K; ++k) cj[k] += aij * bi[k];
    }
  }
}

}  // namespace rrl
