// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>

#include "frod/adapter.hpp"
#include "frod/matrix.hpp"

namespace frod {

// Singular-value stability audit for diag(sigma) + S: the per-index
// deviation is bounded by ||S||_2, which in turn is bounded by
// sqrt(nnz) * eps when every entry obeys |s_pq| <= eps.
struct WeylReport {
  double max_dev = 0.0;
  double spec_norm_s = 0.0;
  double sparse_bound = 0.0;
  bool pass = false;
};

WeylReport weyl_check(std::span<const double> sigma, const SparseOffDiag& s,
                      double eps_bound);

// Split of the adapter update into the on-axis part U diag(sigma-sigma_init) V^T
// and the off-axis part U S V^T, with the rotation angle
// alpha = atan2(||off||_F, ||on||_F) (zero when both parts vanish).
struct UpdateSplit {
  Matrix dw_on;
  Matrix dw_off;
  double alpha = 0.0;
  double frob_on = 0.0;
  double frob_off = 0.0;
  double frob_total = 0.0;
  // trace(diag(delta sigma) * S); structurally zero for off-diagonal S.
  double latent_inner = 0.0;
};

UpdateSplit split_update(const FrodLayer& layer);

struct OrthoResidual {
  double latent = 0.0;   // exact structural zero for off-diagonal S
  double ambient = 0.0;  // |<on, off>_F| / (||on|| ||off|| + tiny)
};

OrthoResidual orthogonality_residual(const UpdateSplit& split);

// || (on + off) - ||dW||_F (cos a * on_hat + sin a * off_hat) ||_F / ||dW||_F.
double angular_identity_residual(const UpdateSplit& split);

// || dW - ||on||_F (on_hat + alpha * off_hat) ||_F / ||dW||_F, meaningful for
// small alpha (<= alpha^2 whenever alpha <= 0.1).
double small_angle_residual(const UpdateSplit& split);

// Learning-rate proxy sqrt(s * n) * lr_S / lr_sigma for the rotation angle.
double tan_alpha_proxy(double s, double lr_s, double lr_sigma, std::size_t n);

// Configurations with the proxy inside [0.05, 0.2] get flagged in sweeps.
inline bool tan_alpha_in_sweet_band(double v) { return v >= 0.05 && v <= 0.2; }

// Numerical rank of the Jacobian of the update map at a generic random
// point. lora: (B, A) -> B A. vera: (bvec, d) -> diag(bvec) B diag(d) A with
// frozen generic B, A. Closed forms: lora r(m+n-r); vera hypothesis r+n.
std::size_t pdof_rank(Scheme scheme, std::size_t m, std::size_t n,
                      std::size_t r, std::uint64_t seed);

// Central-difference Hessian, symmetrized. Exact for quadratic losses up to
// rounding. Dimension capped at 200.
Matrix hessian_fd(const std::function<double(std::span<const double>)>& loss,
                  std::span<const double> theta0, double h = 1e-4);

// Block-diagonal Hessian model for W = base + B A under the quadratic loss
// (lambda/2)||W - W*||_F^2 with Hessian lambda I in W: curvature of the left
// factor B is lambda ||A||_F^2 I_{mr}, of the right factor A is
// lambda ||B||_F^2 I_{rn}. Parameter order [vec(B); vec(A)], row-major.
Matrix adapter_hessian_analytic(Scheme scheme, const Matrix& b_left,
                                const Matrix& a_right, double lambda);

struct ConditionReport {
  std::vector<double> eigs;  // sorted descending
  double eps_cond = 0.0;
  double tau_dot = 0.0;  // (max + eps) / (min + eps)
};

ConditionReport regularized_condition(std::span<const double> eigs,
                                      double eps_cond);

}  // namespace frod
