// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "frod/matrix.hpp"

namespace frod {

// One category of structurally analogous per-layer matrices (for example
// the q/k/v/o projections of an attention stack).
struct CategoryStack {
  std::string label;
  std::vector<Matrix> layers;  // all m x n
};

struct WeightStack {
  std::vector<CategoryStack> categories;

  std::size_t layer_rows() const {
    return categories.empty() || categories[0].layers.empty()
               ? 0
               : categories[0].layers[0].rows;
  }
  std::size_t layer_cols() const {
    return categories.empty() || categories[0].layers.empty()
               ? 0
               : categories[0].layers[0].cols;
  }
  std::size_t layers_per_category() const {
    return categories.empty() ? 0 : categories[0].layers.size();
  }

  // Checks the shared-shape invariant; throws validation_error on breach.
  void validate() const;
};

}  // namespace frod
