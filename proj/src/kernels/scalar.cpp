// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. These define the semantics the SIMD variants are
// tested against.

#include "frod/kernels.hpp"

namespace frod::kernels {

namespace {

double scalar_dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double scalar_sumsq(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void scalar_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scalar_scal(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void scalar_rot(double* x, double* y, double c, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double xi = x[i];
    double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend backend{"scalar",     scalar_dot,  scalar_sumsq,
                               scalar_axpy,  scalar_scal, scalar_rot};
  return backend;
}

}  // namespace frod::kernels
