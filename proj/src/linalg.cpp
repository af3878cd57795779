// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0

#include "frod/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "frod/error.hpp"

namespace frod {

namespace {

void require_finite(const Matrix& a, const char* op) {
  if (!all_finite(a))
    throw validation_error(std::string(op) + ": non-finite input");
}

void require_symmetric(const Matrix& a, const char* op) {
  if (a.rows != a.cols)
    throw validation_error(std::string(op) + ": matrix not square");
  double scale = max_abs(a);
  double dev = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i + 1; j < a.cols; ++j)
      dev = std::max(dev, std::abs(a.at(i, j) - a.at(j, i)));
  if (dev > 1e-10 * std::max(scale, 1e-300))
    throw validation_error(std::string(op) + ": asymmetric input");
}

// Largest-magnitude component positive, ties broken by the lowest index.
void fix_column_sign(Matrix& m, std::size_t col) {
  std::size_t arg = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    double v = std::abs(m.at(i, col));
    if (v > best) {
      best = v;
      arg = i;
    }
  }
  if (m.at(arg, col) < 0.0)
    for (std::size_t i = 0; i < m.rows; ++i) m.at(i, col) = -m.at(i, col);
}

}  // namespace

QrResult qr_thin(const Matrix& a) {
  require_finite(a, "qr_thin");
  const std::size_t m = a.rows, n = a.cols;
  if (m < n) throw validation_error("qr_thin: rows < cols");

  Matrix work = a;                      // becomes R in its upper n x n part
  std::vector<std::vector<double>> vs;  // Householder vectors
  std::vector<double> betas;
  vs.reserve(n);
  std::vector<double> w(n);

  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> v(m - k);
    for (std::size_t i = k; i < m; ++i) v[i - k] = work.at(i, k);
    double norm = std::sqrt(kernels::sumsq(v.data(), v.size()));
    double beta = 0.0;
    if (norm > 0.0) {
      double sign = v[0] >= 0.0 ? 1.0 : -1.0;
      v[0] += sign * norm;
      double vsq = kernels::sumsq(v.data(), v.size());
      beta = 2.0 / vsq;
      // Apply I - beta v v^T to the trailing columns (row-sliced so the
      // inner loops run on contiguous memory).
      const std::size_t width = n - k;
      std::fill(w.begin(), w.begin() + width, 0.0);
      for (std::size_t i = k; i < m; ++i)
        kernels::axpy(v[i - k], work.row(i) + k, w.data(), width);
      for (std::size_t i = k; i < m; ++i)
        kernels::axpy(-beta * v[i - k], w.data(), work.row(i) + k, width);
    }
    vs.push_back(std::move(v));
    betas.push_back(beta);
  }

  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) r.at(i, j) = work.at(i, j);

  // Back-accumulate Q = H_0 ... H_{n-1} applied to the first n columns of I.
  Matrix q(m, n);
  for (std::size_t j = 0; j < n; ++j) q.at(j, j) = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    if (betas[k] == 0.0) continue;
    const std::vector<double>& v = vs[k];
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = k; i < m; ++i)
      kernels::axpy(v[i - k], q.row(i), w.data(), n);
    for (std::size_t i = k; i < m; ++i)
      kernels::axpy(-betas[k] * v[i - k], w.data(), q.row(i), n);
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (r.at(k, k) < 0.0) {
      for (std::size_t j = k; j < n; ++j) r.at(k, j) = -r.at(k, j);
      for (std::size_t i = 0; i < m; ++i) q.at(i, k) = -q.at(i, k);
    }
  }
  return {std::move(q), std::move(r)};
}

EigResult eigh_symmetric(const Matrix& a) {
  require_finite(a, "eigh_symmetric");
  require_symmetric(a, "eigh_symmetric");
  const std::size_t n = a.rows;

  Matrix b = a;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (b.at(i, j) + b.at(j, i));
      b.at(i, j) = v;
      b.at(j, i) = v;
    }

  // Rows of vt are the eigenvector candidates; kept transposed so the Jacobi
  // rotations run on contiguous rows.
  Matrix vt = Matrix::identity(n);

  const double fnorm = frob_norm(a);
  const double threshold = 1e-14 * fnorm;
  auto offdiag = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * b.at(i, j) * b.at(i, j);
    return std::sqrt(s);
  };

  bool converged = fnorm == 0.0 || offdiag() <= threshold;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double bpq = b.at(p, q);
        if (bpq == 0.0) continue;
        double tau = (b.at(q, q) - b.at(p, p)) / (2.0 * bpq);
        double t = (tau >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        double bpp = b.at(p, p), bqq = b.at(q, q);
        for (std::size_t i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          double bip = b.at(i, p), biq = b.at(i, q);
          b.at(i, p) = c * bip - s * biq;
          b.at(p, i) = b.at(i, p);
          b.at(i, q) = s * bip + c * biq;
          b.at(q, i) = b.at(i, q);
        }
        b.at(p, p) = bpp - t * bpq;
        b.at(q, q) = bqq + t * bpq;
        b.at(p, q) = 0.0;
        b.at(q, p) = 0.0;
        kernels::rot(vt.row(p), vt.row(q), c, s, n);
      }
    }
    converged = offdiag() <= threshold;
  }
  if (!converged)
    throw numerical_error("eigh_symmetric: Jacobi did not converge");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return b.at(i, i) > b.at(j, j);
  });

  EigResult res;
  res.values.resize(n);
  res.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    res.values[k] = b.at(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i)
      res.vectors.at(i, k) = vt.at(order[k], i);
  }
  for (std::size_t k = 0; k < n; ++k) fix_column_sign(res.vectors, k);
  return res;
}

std::vector<double> svd_values(const Matrix& a) {
  require_finite(a, "svd_values");
  const bool tall = a.rows >= a.cols;
  Matrix at = transpose(a);
  Matrix gram = tall ? matmul(at, a) : matmul(a, at);
  for (std::size_t i = 0; i < gram.rows; ++i)
    for (std::size_t j = i + 1; j < gram.cols; ++j) {
      double v = 0.5 * (gram.at(i, j) + gram.at(j, i));
      gram.at(i, j) = v;
      gram.at(j, i) = v;
    }
  EigResult eig = eigh_symmetric(gram);
  std::vector<double> out(eig.values.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::sqrt(std::max(eig.values[i], 0.0));
  return out;
}

namespace {

// Deterministic completion of an orthonormal column set: runs Gram-Schmidt
// over the standard basis vectors in index order.
void complete_orthonormal_column(Matrix& u, std::size_t col) {
  const std::size_t m = u.rows;
  std::vector<double> cand(m);
  for (std::size_t e = 0; e < m; ++e) {
    std::fill(cand.begin(), cand.end(), 0.0);
    cand[e] = 1.0;
    for (std::size_t k = 0; k < col; ++k) {
      double proj = 0.0;
      for (std::size_t i = 0; i < m; ++i) proj += cand[i] * u.at(i, k);
      for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * u.at(i, k);
    }
    double norm = std::sqrt(kernels::sumsq(cand.data(), m));
    if (norm > 0.5) {
      for (std::size_t i = 0; i < m; ++i) u.at(i, col) = cand[i] / norm;
      return;
    }
  }
  throw numerical_error("svd_thin: failed to complete orthonormal basis");
}

}  // namespace

SvdResult svd_thin(const Matrix& a) {
  require_finite(a, "svd_thin");
  const std::size_t m = a.rows, n = a.cols;

  if (m < n) {
    SvdResult t = svd_thin(transpose(a));
    SvdResult res{std::move(t.v), std::move(t.s), std::move(t.u)};
    // Re-apply the sign convention on the V side after the swap.
    for (std::size_t k = 0; k < res.s.size(); ++k) {
      std::size_t arg = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < res.v.rows; ++i) {
        double v = std::abs(res.v.at(i, k));
        if (v > best) {
          best = v;
          arg = i;
        }
      }
      if (res.v.at(arg, k) < 0.0) {
        for (std::size_t i = 0; i < res.v.rows; ++i)
          res.v.at(i, k) = -res.v.at(i, k);
        for (std::size_t i = 0; i < res.u.rows; ++i)
          res.u.at(i, k) = -res.u.at(i, k);
      }
    }
    return res;
  }

  Matrix gram = matmul(transpose(a), a);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (gram.at(i, j) + gram.at(j, i));
      gram.at(i, j) = v;
      gram.at(j, i) = v;
    }
  EigResult eig = eigh_symmetric(gram);

  SvdResult res;
  res.s.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    res.s[k] = std::sqrt(std::max(eig.values[k], 0.0));
  res.v = eig.vectors;
  res.u = Matrix(m, n);

  const double cutoff = res.s.empty() ? 0.0 : 1e-12 * res.s[0];
  std::vector<double> col(m);
  for (std::size_t k = 0; k < n; ++k) {
    if (res.s[k] > cutoff && res.s[k] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < n; ++j) acc += arow[j] * res.v.at(j, k);
        res.u.at(i, k) = acc / res.s[k];
      }
    } else {
      complete_orthonormal_column(res.u, k);
    }
  }
  return res;
}

Matrix ridge_inverse(const Matrix& g, double pi) {
  if (!(pi > 0.0)) throw validation_error("ridge_inverse: pi must be > 0");
  require_finite(g, "ridge_inverse");
  require_symmetric(g, "ridge_inverse");
  const std::size_t n = g.rows;

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = j; i < n; ++i) {
      double sum = g.at(i, j) + (i == j ? pi : 0.0);
      for (std::size_t k = 0; k < j; ++k) sum -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (sum <= 0.0)
          throw numerical_error("ridge_inverse: matrix not positive definite");
        l.at(j, j) = std::sqrt(sum);
      } else {
        l.at(i, j) = sum / l.at(j, j);
      }
    }
  }

  // Solve L L^T X = I column by column.
  Matrix x(n, n);
  std::vector<double> y(n);
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double sum = (i == col) ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) sum -= l.at(i, k) * y[k];
      y[i] = sum / l.at(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double sum = y[i];
      for (std::size_t k = i + 1; k < n; ++k) sum -= l.at(k, i) * x.at(k, col);
      x.at(i, col) = sum / l.at(i, i);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (x.at(i, j) + x.at(j, i));
      x.at(i, j) = v;
      x.at(j, i) = v;
    }
  return x;
}

}  // namespace frod
