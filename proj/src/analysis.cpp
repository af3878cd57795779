// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0

#include "frod/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "frod/error.hpp"
#include "frod/linalg.hpp"
#include "frod/rng.hpp"

namespace frod {

WeylReport weyl_check(std::span<const double> sigma, const SparseOffDiag& s,
                      double eps_bound) {
  if (sigma.size() != s.n)
    throw validation_error("weyl_check: sigma length != n");
  s.validate();
  for (double v : s.values)
    if (std::abs(v) > eps_bound)
      throw validation_error("weyl_check: entry exceeds eps bound");

  Matrix perturbed = s.dense();
  for (std::size_t k = 0; k < s.n; ++k) perturbed.at(k, k) += sigma[k];
  std::vector<double> sv = svd_values(perturbed);

  std::vector<double> base(sigma.begin(), sigma.end());
  std::sort(base.begin(), base.end(), std::greater<double>());

  WeylReport rep;
  for (std::size_t k = 0; k < s.n; ++k)
    rep.max_dev = std::max(rep.max_dev, std::abs(sv[k] - base[k]));
  std::vector<double> s_sv = svd_values(s.dense());
  rep.spec_norm_s = s_sv.empty() ? 0.0 : s_sv[0];
  rep.sparse_bound = std::sqrt(static_cast<double>(s.nnz())) * eps_bound;
  rep.pass = rep.max_dev <= rep.spec_norm_s + 1e-9 &&
             rep.spec_norm_s <= rep.sparse_bound + 1e-9;
  return rep;
}

UpdateSplit split_update(const FrodLayer& layer) {
  const std::size_t n = layer.n();
  UpdateSplit split;

  Matrix delta = layer.u;  // becomes U diag(sigma - sigma_init)
  for (std::size_t i = 0; i < delta.rows; ++i)
    for (std::size_t j = 0; j < n; ++j)
      delta.at(i, j) *= layer.sigma[j] - layer.sigma_init[j];
  split.dw_on = matmul(delta, layer.vt);
  split.dw_off = matmul(matmul(layer.u, layer.s.dense()), layer.vt);

  split.frob_on = frob_norm(split.dw_on);
  split.frob_off = frob_norm(split.dw_off);
  split.frob_total =
      std::sqrt(split.frob_on * split.frob_on + split.frob_off * split.frob_off);
  split.alpha = (split.frob_on == 0.0 && split.frob_off == 0.0)
                    ? 0.0
                    : std::atan2(split.frob_off, split.frob_on);

  for (std::size_t i = 0; i < layer.s.nnz(); ++i)
    if (layer.s.support[i].first == layer.s.support[i].second)
      split.latent_inner += (layer.sigma[layer.s.support[i].first] -
                             layer.sigma_init[layer.s.support[i].first]) *
                            layer.s.values[i];
  return split;
}

OrthoResidual orthogonality_residual(const UpdateSplit& split) {
  constexpr double tiny = 1e-300;
  OrthoResidual res;
  res.latent = std::abs(split.latent_inner) /
               (split.frob_on * split.frob_off + tiny);
  res.ambient = std::abs(frob_inner(split.dw_on, split.dw_off)) /
                (split.frob_on * split.frob_off + tiny);
  return res;
}

double angular_identity_residual(const UpdateSplit& split) {
  if (split.frob_total == 0.0)
    throw validation_error("angular_identity_residual: zero total update");
  const double ca = std::cos(split.alpha);
  const double sa = std::sin(split.alpha);
  Matrix rebuilt(split.dw_on.rows, split.dw_on.cols);
  if (split.frob_on > 0.0)
    rebuilt = rebuilt + (split.frob_total * ca / split.frob_on) * split.dw_on;
  if (split.frob_off > 0.0)
    rebuilt = rebuilt + (split.frob_total * sa / split.frob_off) * split.dw_off;
  Matrix diff = (split.dw_on + split.dw_off) - rebuilt;
  return frob_norm(diff) / split.frob_total;
}

double small_angle_residual(const UpdateSplit& split) {
  if (split.frob_total == 0.0)
    throw validation_error("small_angle_residual: zero total update");
  if (split.frob_on == 0.0) return 1.0;  // no axis-aligned part to expand from
  Matrix approx = split.dw_on;
  if (split.frob_off > 0.0)
    approx = approx +
             (split.alpha * split.frob_on / split.frob_off) * split.dw_off;
  Matrix diff = (split.dw_on + split.dw_off) - approx;
  return frob_norm(diff) / split.frob_total;
}

double tan_alpha_proxy(double s, double lr_s, double lr_sigma, std::size_t n) {
  if (!(lr_sigma > 0.0))
    throw validation_error(
        "tan_alpha_proxy: undefined for lr_sigma = 0 (off-axis only)");
  return std::sqrt(s * static_cast<double>(n)) * lr_s / lr_sigma;
}

namespace {

Matrix lora_update_jacobian(std::size_t m, std::size_t n, std::size_t r,
                            SplitMix64& rng) {
  Matrix b(m, r), a(r, n);
  for (double& v : b.data) v = rng.next_normal();
  for (double& v : a.data) v = rng.next_normal();

  // Rows: mn output entries; columns: mr + rn parameters.
  Matrix jac(m * n, m * r + r * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < r; ++k)
      for (std::size_t l = 0; l < n; ++l)
        jac.at(i * n + l, i * r + k) = a.at(k, l);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t l = 0; l < n; ++l)
      for (std::size_t i = 0; i < m; ++i)
        jac.at(i * n + l, m * r + k * n + l) = b.at(i, k);
  return jac;
}

Matrix vera_update_jacobian(std::size_t m, std::size_t n, std::size_t r,
                            SplitMix64& rng) {
  Matrix b(m, r), a(r, n);
  for (double& v : b.data) v = rng.next_normal();
  for (double& v : a.data) v = rng.next_normal();
  std::vector<double> bvec(m), d(r);
  for (double& v : bvec) v = rng.next_normal();
  for (double& v : d) v = rng.next_normal();

  // W = diag(bvec) B diag(d) A. Columns: m bvec entries then r d entries.
  Matrix bda(m, n);
  {
    Matrix bd = b;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < r; ++k) bd.at(i, k) *= d[k];
    bda = matmul(bd, a);
  }
  Matrix jac(m * n, m + r);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < n; ++l)
      jac.at(i * n + l, i) = bda.at(i, l);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t l = 0; l < n; ++l)
        jac.at(i * n + l, m + k) = bvec[i] * b.at(i, k) * a.at(k, l);
  return jac;
}

}  // namespace

std::size_t pdof_rank(Scheme scheme, std::size_t m, std::size_t n,
                      std::size_t r, std::uint64_t seed) {
  if (m > 12 || n > 12)
    throw validation_error("pdof_rank: dimensions capped at 12");
  if (r < 1 || r > std::min(m, n))
    throw validation_error("pdof_rank: rank out of range");

  SplitMix64 rng(seed);
  Matrix jac = scheme == Scheme::lora ? lora_update_jacobian(m, n, r, rng)
             : scheme == Scheme::vera ? vera_update_jacobian(m, n, r, rng)
                                      : throw validation_error(
                                            "pdof_rank: scheme must be lora "
                                            "or vera");
  std::vector<double> sv = svd_values(jac);
  if (sv.empty() || sv[0] == 0.0) return 0;
  std::size_t rank = 0;
  for (double v : sv)
    if (v > 1e-8 * sv[0]) ++rank;
  return rank;
}

Matrix hessian_fd(const std::function<double(std::span<const double>)>& loss,
                  std::span<const double> theta0, double h) {
  const std::size_t p = theta0.size();
  if (p > 200) throw validation_error("hessian_fd: more than 200 parameters");

  std::vector<double> theta(theta0.begin(), theta0.end());
  auto eval = [&](const std::vector<double>& t) {
    double v = loss(t);
    if (!std::isfinite(v)) throw numerical_error("hessian_fd: non-finite loss");
    return v;
  };

  const double center = eval(theta);
  Matrix hess(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    theta[i] = theta0[i] + h;
    double plus = eval(theta);
    theta[i] = theta0[i] - h;
    double minus = eval(theta);
    theta[i] = theta0[i];
    hess.at(i, i) = (plus - 2.0 * center + minus) / (h * h);
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      theta[i] = theta0[i] + h;
      theta[j] = theta0[j] + h;
      double pp = eval(theta);
      theta[j] = theta0[j] - h;
      double pm = eval(theta);
      theta[i] = theta0[i] - h;
      double mm = eval(theta);
      theta[j] = theta0[j] + h;
      double mp = eval(theta);
      theta[i] = theta0[i];
      theta[j] = theta0[j];
      double v = (pp - pm - mp + mm) / (4.0 * h * h);
      hess.at(i, j) = v;
      hess.at(j, i) = v;
    }
  }
  return hess;
}

Matrix adapter_hessian_analytic(Scheme scheme, const Matrix& b_left,
                                const Matrix& a_right, double lambda) {
  if (scheme != Scheme::lora && scheme != Scheme::pissa)
    throw validation_error("adapter_hessian_analytic: lora or pissa only");
  const std::size_t mr = b_left.rows * b_left.cols;
  const std::size_t rn = a_right.rows * a_right.cols;
  const double a_sq = kernels::sumsq(a_right.data.data(), rn);
  const double b_sq = kernels::sumsq(b_left.data.data(), mr);
  Matrix hess(mr + rn, mr + rn);
  for (std::size_t i = 0; i < mr; ++i) hess.at(i, i) = lambda * a_sq;
  for (std::size_t i = 0; i < rn; ++i)
    hess.at(mr + i, mr + i) = lambda * b_sq;
  return hess;
}

ConditionReport regularized_condition(std::span<const double> eigs,
                                      double eps_cond) {
  if (!(eps_cond > 0.0))
    throw validation_error("regularized_condition: eps must be > 0");
  if (eigs.empty())
    throw validation_error("regularized_condition: empty spectrum");
  ConditionReport rep;
  rep.eigs.assign(eigs.begin(), eigs.end());
  std::sort(rep.eigs.begin(), rep.eigs.end(), std::greater<double>());
  rep.eps_cond = eps_cond;
  rep.tau_dot = (rep.eigs.front() + eps_cond) / (rep.eigs.back() + eps_cond);
  return rep;
}

}  // namespace frod
