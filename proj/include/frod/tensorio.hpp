// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "frod/stack.hpp"

namespace frod {

enum class Dtype { f32, f64 };

const char* dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& name);

// A named row-major tensor. Exactly one of f64/f32 holds the payload,
// matching dtype.
struct NamedTensor {
  std::string name;
  Dtype dtype = Dtype::f64;
  std::vector<std::size_t> shape;
  std::vector<double> f64;
  std::vector<float> f32;

  std::size_t scalar_count() const;
  static NamedTensor from_matrix(std::string name, const Matrix& m);
  static NamedTensor from_vector(std::string name,
                                 const std::vector<double>& v);
  Matrix to_matrix() const;  // requires rank-2 shape

  bool operator==(const NamedTensor&) const = default;
};

struct TensorContainer {
  std::uint32_t version = 1;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  const NamedTensor& require(const std::string& name) const;
  void add(NamedTensor t);

  bool operator==(const TensorContainer&) const = default;
};

// FRODTNSR on-disk layout, all integers little-endian:
//   bytes 0..7    magic "FRODTNSR"
//   bytes 8..11   u32 version (= 1)
//   bytes 12..19  u64 header length H
//   bytes 20..    H bytes of UTF-8 JSON
//                 {"tensors":[{"name","dtype","shape","offset"}...]}
//   payload       concatenated row-major little-endian scalars, each tensor
//                 8-byte aligned from payload start (zero padding between)
void write_container(const std::filesystem::path& path,
                     const TensorContainer& c);
TensorContainer read_container(const std::filesystem::path& path);

enum class StackDist { gaussian, trained_task };

StackDist stack_dist_from_name(const std::string& name);

// Deterministic synthetic weight stack. gaussian: entries ~ N(0, 1/n).
// trained_task: a low-rank-dominant spectrum plus a small gaussian floor,
// shaped like a briefly fitted network rather than white noise.
WeightStack generate_synthetic_stack(std::uint64_t seed, std::size_t categories,
                                     std::size_t layers, std::size_t m,
                                     std::size_t n,
                                     StackDist dist = StackDist::gaussian);

// Container naming convention for stacks: cat/<label>/layer/<i>.
TensorContainer stack_to_container(const WeightStack& stack);
WeightStack stack_from_container(const TensorContainer& c);

}  // namespace frod
