// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0

#include "frod/landscape.hpp"

#include <cmath>
#include <cstdio>

#include "frod/error.hpp"
#include "frod/linalg.hpp"
#include "frod/parallel.hpp"
#include "frod/rng.hpp"

namespace frod {

std::pair<Direction, Direction> principal_directions(
    const std::vector<std::vector<double>>& checkpoints,
    std::vector<double>* explained_variance) {
  const std::size_t k = checkpoints.size();
  if (k < 3)
    throw validation_error("principal_directions: need at least 3 checkpoints");
  const std::size_t p = checkpoints[0].size();
  for (const auto& c : checkpoints)
    if (c.size() != p)
      throw validation_error("principal_directions: ragged checkpoints");

  std::vector<double> mean(p, 0.0);
  for (const auto& c : checkpoints)
    kernels::axpy(1.0 / static_cast<double>(k), c.data(), mean.data(), p);

  Matrix centered(k, p);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < p; ++j)
      centered.at(i, j) = checkpoints[i][j] - mean[j];

  // Gram trick: eigenvectors of the k x k matrix lift to parameter space.
  Matrix gram(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) {
      double v = kernels::dot(centered.row(i), centered.row(j), p);
      gram.at(i, j) = v;
      gram.at(j, i) = v;
    }
  EigResult eig = eigh_symmetric(gram);
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  if (!(total > 0.0) || eig.values[0] <= 1e-24)
    throw validation_error("principal_directions: zero-variance trajectory");

  auto lift = [&](std::size_t which, const char* name) {
    Direction d;
    d.v.assign(p, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      kernels::axpy(eig.vectors.at(i, which), centered.row(i), d.v.data(), p);
    double norm = std::sqrt(kernels::sumsq(d.v.data(), p));
    if (norm > 0.0) kernels::scal(1.0 / norm, d.v.data(), p);
    d.norm = 1.0;
    d.provenance = name;
    return d;
  };
  Direction d1 = lift(0, "pca-1");
  Direction d2 = lift(1, "pca-2");
  if (explained_variance) {
    explained_variance->assign(
        {std::max(eig.values[0], 0.0) / total, std::max(eig.values[1], 0.0) / total});
  }
  return {std::move(d1), std::move(d2)};
}

Direction filter_normalized_random(std::span<const double> theta,
                                   std::uint64_t seed,
                                   const std::vector<std::size_t>& block_sizes,
                                   std::vector<std::string>* warnings) {
  std::size_t total = 0;
  for (std::size_t b : block_sizes) total += b;
  if (total != theta.size())
    throw validation_error(
        "filter_normalized_random: blocks do not partition theta");

  SplitMix64 rng(seed);
  Direction d;
  d.v.resize(theta.size());
  std::size_t off = 0;
  for (std::size_t bi = 0; bi < block_sizes.size(); ++bi) {
    const std::size_t len = block_sizes[bi];
    for (std::size_t i = 0; i < len; ++i) d.v[off + i] = rng.next_normal();
    double pnorm = std::sqrt(kernels::sumsq(theta.data() + off, len));
    double dnorm = std::sqrt(kernels::sumsq(d.v.data() + off, len));
    if (pnorm == 0.0 || dnorm == 0.0) {
      for (std::size_t i = 0; i < len; ++i) d.v[off + i] = 0.0;
      if (warnings)
        warnings->push_back("zero-norm parameter block " + std::to_string(bi) +
                            "; direction block zeroed");
    } else {
      kernels::scal(pnorm / dnorm, d.v.data() + off, len);
    }
    off += len;
  }
  d.norm = std::sqrt(kernels::sumsq(d.v.data(), d.v.size()));
  d.provenance = "filter-random";
  return d;
}

LandscapeGrid loss_grid(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> theta0, const Direction& d1, const Direction& d2,
    double half_range, std::size_t steps, std::size_t threads) {
  if (steps < 3 || steps % 2 == 0)
    throw validation_error("loss_grid: steps must be odd and >= 3");
  if (d1.v.size() != theta0.size() || d2.v.size() != theta0.size())
    throw validation_error("loss_grid: direction length mismatch");

  LandscapeGrid grid;
  grid.mid = (steps - 1) / 2;
  grid.alphas.resize(steps);
  grid.betas.resize(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    // 2*i/(steps-1) - 1 is exactly 0 at the midpoint.
    double t = 2.0 * static_cast<double>(i) / static_cast<double>(steps - 1) -
               1.0;
    grid.alphas[i] = half_range * t;
    grid.betas[i] = half_range * t;
  }
  grid.loss = Matrix(steps, steps);
  grid.flags.assign(steps * steps, 0);

  const std::size_t cells = steps * steps;
  const std::size_t workers = std::min(worker_count(threads), cells);

  parallel_for(workers, workers, [&](std::size_t w) {
    auto fn = loss;  // per-worker copy; may carry mutable scratch
    std::vector<double> point(theta0.size());
    for (std::size_t cell = w; cell < cells; cell += workers) {
      const std::size_t i = cell / steps;
      const std::size_t j = cell % steps;
      const double a = grid.alphas[i];
      const double b = grid.betas[j];
      double value;
      if (a == 0.0 && b == 0.0) {
        value = fn(theta0);  // center bypasses perturbation arithmetic
      } else {
        for (std::size_t t = 0; t < theta0.size(); ++t)
          point[t] = theta0[t] + a * d1.v[t] + b * d2.v[t];
        value = fn(point);
      }
      grid.loss.at(i, j) = value;
      if (!std::isfinite(value)) grid.flags[cell] = 1;
    }
  });
  return grid;
}

std::string grid_to_csv(const LandscapeGrid& grid) {
  std::string out = "alpha,beta,loss,flag\n";
  char buf[96];
  for (std::size_t i = 0; i < grid.alphas.size(); ++i)
    for (std::size_t j = 0; j < grid.betas.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n",
                    grid.alphas[i], grid.betas[j], grid.loss.at(i, j),
                    static_cast<int>(grid.flags[i * grid.betas.size() + j]));
      out += buf;
    }
  return out;
}

}  // namespace frod
