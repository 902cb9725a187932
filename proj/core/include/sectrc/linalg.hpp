#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace sectrc {

using Vec = std::vector<double>;

inline void add_inplace(Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

inline Vec concat(const Vec& a, const Vec& b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// y += W x, W row-major [rows x cols].
inline void matvec_acc(const double* w, int rows, int cols, const double* x, double* y) {
  for (int r = 0; r < rows; ++r) y[r] += dot(w + static_cast<size_t>(r) * cols, x, cols);
}

// dW += dy x^T, dW row-major [rows x cols].
inline void outer_acc(double* dw, int rows, int cols, const double* dy, const double* x) {
  for (int r = 0; r < rows; ++r) {
    double* row = dw + static_cast<size_t>(r) * cols;
    const double g = dy[r];
    if (g == 0.0) continue;
    for (int c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

// dx += W^T dy, W row-major [rows x cols].
inline void matvec_t_acc(const double* w, int rows, int cols, const double* dy, double* dx) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + static_cast<size_t>(r) * cols;
    const double g = dy[r];
    if (g == 0.0) continue;
    for (int c = 0; c < cols; ++c) dx[c] += g * row[c];
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Numerically stable in-place softmax.
inline void softmax_inplace(Vec& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

}  // namespace sectrc
