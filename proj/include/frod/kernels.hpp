// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace frod::kernels {

// f64 inner-loop primitives. Scalar reference implementations always exist;
// AVX2/NEON variants are selected once per process at first use. Elementwise
// kernels (axpy, scal, rot) are bit-identical across backends; reductions
// (dot, sumsq) may differ in rounding because lane accumulators change the
// summation order, and are equivalence-tested against the scalar reference
// under a tight relative tolerance.
struct Backend {
  const char* name;
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sumsq)(const double* x, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
  void (*scal)(double a, double* x, std::size_t n);                   // x *= a
  // Plane rotation on two rows: (x, y) <- (c*x - s*y, s*x + c*y).
  void (*rot)(double* x, double* y, double c, double s, std::size_t n);
};

const Backend& scalar_backend();
// Backends compiled in and usable on this CPU (scalar always included).
std::vector<const Backend*> available_backends();

// Active backend: FROD_KERNELS env var if set (scalar|avx2|neon|auto),
// otherwise the best available. Fixed after first call.
const Backend& active();
// Test hook; accepts the same names as FROD_KERNELS. Must be called before
// any compute if a run is meant to be reproduced with that backend.
void force_backend(const std::string& name);

inline double dot(const double* x, const double* y, std::size_t n) {
  return active().dot(x, y, n);
}
inline double sumsq(const double* x, std::size_t n) {
  return active().sumsq(x, n);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  active().axpy(a, x, y, n);
}
inline void scal(double a, double* x, std::size_t n) {
  active().scal(a, x, n);
}
inline void rot(double* x, double* y, double c, double s, std::size_t n) {
  active().rot(x, y, c, s, n);
}

// Composites built on the primitives above (row-major storage).
// y = A x
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x,
          double* y);
// y = A^T x
void gemv_t(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y);
// C = A B with A m-by-k, B k-by-n; C is overwritten.
void gemm(const double* a, std::size_t m, std::size_t k, const double* b,
          std::size_t n, double* c);

}  // namespace frod::kernels
