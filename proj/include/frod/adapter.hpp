// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "frod/decomp.hpp"
#include "frod/matrix.hpp"

namespace frod {

// Strictly off-diagonal sparse n x n matrix with a fixed random support.
struct SparseOffDiag {
  std::size_t n = 0;
  // Sorted (row, col), row != col, no duplicates.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> support;
  std::vector<double> values;  // aligned with support
  double density = 0.0;        // requested s = nnz / n^2
  std::uint64_t seed = 0;

  std::size_t nnz() const { return support.size(); }
  void validate() const;
  Matrix dense() const;
};

// nnz = min(round(s * n^2), n^2 - n) positions drawn uniformly without
// replacement from the off-diagonal cells (partial Fisher-Yates over cell
// indices, SplitMix64 stream). Values start at zero.
SparseOffDiag sample_offdiag_support(std::size_t n, double s,
                                     std::uint64_t seed);

// Adapter layer W' = U (diag(sigma) + S) V^T with frozen U, V^T and
// trainable sigma and S values. sigma_init keeps the pretrained reference so
// the update can be split into on-axis and off-axis parts later.
struct FrodLayer {
  Matrix u;   // m x n, frozen
  Matrix vt;  // n x n, frozen
  std::vector<double> sigma;       // trainable
  std::vector<double> sigma_init;  // frozen reference
  SparseOffDiag s;                 // trainable values

  std::size_t m() const { return u.rows; }
  std::size_t n() const { return u.cols; }
};

FrodLayer make_frod_layer(const JointDecomposition& dec, std::size_t category,
                          std::size_t layer, double density,
                          std::uint64_t seed);

std::vector<double> frod_forward(const FrodLayer& layer,
                                 std::span<const double> x);

struct FrodGrads {
  std::vector<double> d_sigma;
  std::vector<double> d_s;  // aligned with layer.s.support
  std::vector<double> d_x;
};

FrodGrads frod_backward(const FrodLayer& layer, std::span<const double> x,
                        std::span<const double> g);

Matrix merge_weights(const FrodLayer& layer);

// Adapter checkpoint: tensors frod/<layer>/{U,Vt,sigma,sigma_init,S_values}
// plus a side JSON with {support, s, seed}.
TensorContainer frod_layers_to_container(const std::vector<FrodLayer>& layers);
std::string frod_support_sidecar(const std::vector<FrodLayer>& layers);
std::vector<FrodLayer> frod_layers_from_container(const TensorContainer& c,
                                                  const std::string& sidecar);

// ---- Baselines ----------------------------------------------------------

// W' = W0 + B A, B (m x r) zero-initialized, A (r x n) ~ N(0, 1/r).
struct LoraLayer {
  Matrix w0;
  Matrix b;  // m x r, trainable
  Matrix a;  // r x n, trainable
};

LoraLayer lora_init(const Matrix& w0, std::size_t r, std::uint64_t seed);
std::vector<double> lora_forward(const LoraLayer& layer,
                                 std::span<const double> x);

struct LoraGrads {
  Matrix d_b;
  Matrix d_a;
  std::vector<double> d_x;
};

LoraGrads lora_backward(const LoraLayer& layer, std::span<const double> x,
                        std::span<const double> g);

// Shared frozen random pair used by every VeRA layer built from one seed.
struct VeraShared {
  Matrix b;  // m x r
  Matrix a;  // r x n
};

VeraShared vera_shared_basis(std::size_t m, std::size_t n, std::size_t r,
                             std::uint64_t seed);

// W' = W0 + diag(bvec) B diag(d) A; d starts at 0.1, bvec at zero.
struct VeraLayer {
  Matrix w0;
  VeraShared basis;
  std::vector<double> d;     // length r, trainable
  std::vector<double> bvec;  // length m, trainable
};

VeraLayer vera_init(const Matrix& w0, const VeraShared& basis);
std::vector<double> vera_forward(const VeraLayer& layer,
                                 std::span<const double> x);

struct VeraGrads {
  std::vector<double> d_d;
  std::vector<double> d_bvec;
  std::vector<double> d_x;
};

VeraGrads vera_backward(const VeraLayer& layer, std::span<const double> x,
                        std::span<const double> g);

// Truncated-SVD split: B = U_r sqrt(S_r), A = sqrt(S_r) V_r^T, residual
// W - B A frozen. The returned pieces satisfy residual + B A = W.
struct PissaInit {
  Matrix b;
  Matrix a;
  Matrix w_residual;
};

PissaInit pissa_init(const Matrix& w, std::size_t r);

// ---- Parameter accounting ------------------------------------------------

enum class Scheme { frod, lora, vera, pissa, full, sigma_only, s_only };

const char* scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

struct ParamCount {
  Scheme scheme = Scheme::frod;
  long long weights_total = 0;
  long long trainable = 0;
  long long optimizer_states = 0;  // 2 * trainable (Adam moments)
};

// Closed-form counts per scheme; nnz = min(round(s*n^2), n^2-n).
//   frod: weights L(mn + nnz + n) + n^2, trainable L(nnz + n)
//   lora/pissa: weights L(mn + mr + nr), trainable L(mr + nr)
//   vera: weights L(mn + r + n) + mr + nr, trainable L(r + n)
//   full: weights = trainable = L m n
//   sigma_only / s_only: frod weights with trainable L n / L nnz
ParamCount count_params(Scheme scheme, std::size_t m, std::size_t n,
                        std::size_t layers, std::size_t r, double s);

}  // namespace frod
