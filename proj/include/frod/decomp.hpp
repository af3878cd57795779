// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "frod/stack.hpp"
#include "frod/tensorio.hpp"

namespace frod {

enum class AggregationMode { literal, blockwise };

const char* aggregation_mode_name(AggregationMode m);
AggregationMode aggregation_mode_from_name(const std::string& name);

// Joint decomposition of a weight stack: one shared orthogonal basis Z, one
// upper-triangular R per category, and per layer an m-by-n factor U with a
// diagonal of column strengths sigma. Reconstruction of layer (c, i) is
// U[c][i] * diag(sigma[c][i]) * vt(c) and reproduces the input exactly up to
// rounding.
struct JointDecomposition {
  Matrix z;                    // n x n orthogonal
  std::vector<double> eigvals; // spectrum of the aggregated Gram, descending
  std::vector<std::string> labels;
  std::vector<Matrix> r;                   // per category, n x n upper tri
  std::vector<std::vector<Matrix>> u;      // [category][layer], m x n
  std::vector<std::vector<std::vector<double>>> sigma;  // [category][layer]
  double pi = 0.0;
  AggregationMode mode = AggregationMode::blockwise;
  std::vector<std::string> warnings;

  std::size_t n() const { return z.rows; }
  // V^T for a category: Z^T R.
  Matrix vt(std::size_t category) const;
};

// Vertical concatenation of a category's layers, layer order preserved.
Matrix stack_category(const CategoryStack& cat);

// Aggregated, ridge-regularized Gram matrix. literal mode averages
// ((Q^(c))^T Q^(c) + pi I)^{-1} over categories, which collapses to
// I / (1 + pi) because thin-QR Q factors have orthonormal columns.
// blockwise mode averages over per-layer row blocks of each Q and is the
// data-dependent default.
Matrix gram_aggregate(const WeightStack& stack, double pi, AggregationMode mode);

JointDecomposition hjd_decompose(const WeightStack& stack, double pi = 1e-3,
                                 AggregationMode mode = AggregationMode::blockwise,
                                 bool floor_zero_sigma = true);

Matrix reconstruct_layer(const JointDecomposition& dec, std::size_t category,
                         std::size_t layer);

// Pairwise commutator norms ||G_i G_j - G_j G_i||_F of the Gram matrices
// G_k = W_k^T W_k, over all layers of all categories flattened in order.
Matrix gram_commutator_norms(const WeightStack& stack);

// Container naming: Z, eigvals, R/<label>, U/<label>/<i>, sigma/<label>/<i>.
TensorContainer decomposition_to_container(const JointDecomposition& dec);
JointDecomposition decomposition_from_container(const TensorContainer& c);

}  // namespace frod
