// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "frod/matrix.hpp"

namespace frod {

struct QrResult {
  Matrix q;  // rows x cols, orthonormal columns
  Matrix r;  // cols x cols, upper triangular, nonnegative diagonal
};

// Thin Householder QR, rows >= cols. Sign convention: diag(R) >= 0, enforced
// by flipping the matching Q column, so repeated runs give identical factors.
QrResult qr_thin(const Matrix& a);

struct EigResult {
  std::vector<double> values;  // descending
  Matrix vectors;              // columns are eigenvectors
};

// Cyclic Jacobi for symmetric matrices. Eigenvector sign convention: the
// largest-magnitude component of each column is positive (ties: lowest
// index). Input must satisfy ||A - A^T||_max <= 1e-10 * ||A||_max.
EigResult eigh_symmetric(const Matrix& a);

// Singular values, descending, via the eigendecomposition of the smaller
// Gram matrix.
std::vector<double> svd_values(const Matrix& a);

struct SvdResult {
  Matrix u;               // m x k
  std::vector<double> s;  // k = min(m, n), descending
  Matrix v;               // n x k
};

// Thin SVD. V columns carry the eigh_symmetric sign convention.
SvdResult svd_thin(const Matrix& a);

// (G + pi*I)^{-1} for symmetric PSD G, by Cholesky.
Matrix ridge_inverse(const Matrix& g, double pi);

}  // namespace frod
