// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "frod/matrix.hpp"

namespace frod {

struct Direction {
  std::vector<double> v;  // same length as the trainable vector
  double norm = 0.0;
  std::string provenance;  // pca-1 | pca-2 | filter-random
};

// Top-2 principal directions of the centered checkpoint cloud, computed via
// the small #checkpoints x #checkpoints Gram matrix. explained_variance (if
// given) receives the two variance fractions.
std::pair<Direction, Direction> principal_directions(
    const std::vector<std::vector<double>>& checkpoints,
    std::vector<double>* explained_variance = nullptr);

// Gaussian direction rescaled per layer block so each block's norm matches
// the parameter block's norm. Zero-norm blocks yield zero direction blocks
// and a warning.
Direction filter_normalized_random(std::span<const double> theta,
                                   std::uint64_t seed,
                                   const std::vector<std::size_t>& block_sizes,
                                   std::vector<std::string>* warnings = nullptr);

struct LandscapeGrid {
  std::vector<double> alphas;
  std::vector<double> betas;
  Matrix loss;                 // steps x steps
  std::vector<std::uint8_t> flags;  // 1 = non-finite loss at that cell
  std::size_t mid = 0;
};

// Evaluates loss(theta0 + a*d1 + b*d2) on an odd steps x steps grid over
// [-half_range, half_range]^2. The center cell bypasses the perturbation
// entirely so it equals the direct loss bit for bit. Cells fan out over
// worker threads; the callable is copied per worker, so it may carry mutable
// scratch as long as copies are independent.
LandscapeGrid loss_grid(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> theta0, const Direction& d1, const Direction& d2,
    double half_range = 1.0, std::size_t steps = 41, std::size_t threads = 0);

// CSV rows alpha,beta,loss,flag.
std::string grid_to_csv(const LandscapeGrid& grid);

}  // namespace frod
