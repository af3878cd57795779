// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0

#include "frod/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "frod/error.hpp"

namespace frod::kernels {

const Backend* avx2_backend_if_supported();
const Backend* neon_backend_if_supported();

std::vector<const Backend*> available_backends() {
  std::vector<const Backend*> out;
  out.push_back(&scalar_backend());
  if (const Backend* b = avx2_backend_if_supported()) out.push_back(b);
  if (const Backend* b = neon_backend_if_supported()) out.push_back(b);
  return out;
}

namespace {

const Backend* pick(const std::string& name) {
  if (name == "auto" || name.empty()) {
    const Backend* best = &scalar_backend();
    for (const Backend* b : available_backends()) best = b;  // last wins
    return best;
  }
  for (const Backend* b : available_backends()) {
    if (name == b->name) return b;
  }
  throw validation_error("unknown or unsupported kernel backend: " + name);
}

const Backend*& selected() {
  static const Backend* backend = [] {
    const char* env = std::getenv("FROD_KERNELS");
    return pick(env ? env : "auto");
  }();
  return backend;
}

}  // namespace

const Backend& active() { return *selected(); }

void force_backend(const std::string& name) { selected() = pick(name); }

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x,
          double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = dot(a + i * cols, x, cols);
}

void gemv_t(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
  std::memset(y, 0, cols * sizeof(double));
  for (std::size_t i = 0; i < rows; ++i) axpy(x[i], a + i * cols, y, cols);
}

void gemm(const double* a, std::size_t m, std::size_t k, const double* b,
          std::size_t n, double* c) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      if (arow[p] != 0.0) axpy(arow[p], b + p * n, crow, n);
    }
  }
}

}  // namespace frod::kernels
