// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0

#include "frod/tensorio.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>

#include <json.hpp>

#include "frod/error.hpp"
#include "frod/rng.hpp"

#ifdef __unix__
#include <unistd.h>
#endif

namespace frod {

static_assert(std::endian::native == std::endian::little,
              "FRODTNSR I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'R', 'O', 'D', 'T', 'N', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;

std::size_t dtype_size(Dtype d) { return d == Dtype::f64 ? 8 : 4; }

std::size_t aligned_up(std::size_t offset) { return (offset + 7) & ~std::size_t{7}; }

void validate_container(const TensorContainer& c) {
  std::set<std::string> seen;
  for (const NamedTensor& t : c.tensors) {
    if (t.name.empty() || t.name.size() > 255)
      throw validation_error("tensor name empty or longer than 255 bytes");
    if (!seen.insert(t.name).second)
      throw validation_error("duplicate tensor name: " + t.name);
    std::size_t count = 1;
    for (std::size_t d : t.shape) {
      if (d == 0) throw validation_error("zero dimension in tensor " + t.name);
      count *= d;
    }
    std::size_t have = t.dtype == Dtype::f64 ? t.f64.size() : t.f32.size();
    if (count != have)
      throw validation_error("shape/length mismatch in tensor " + t.name);
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

const char* dtype_name(Dtype d) { return d == Dtype::f64 ? "f64" : "f32"; }

Dtype dtype_from_name(const std::string& name) {
  if (name == "f64") return Dtype::f64;
  if (name == "f32") return Dtype::f32;
  throw validation_error("unknown dtype: " + name);
}

std::size_t NamedTensor::scalar_count() const {
  std::size_t count = 1;
  for (std::size_t d : shape) count *= d;
  return shape.empty() ? 0 : count;
}

NamedTensor NamedTensor::from_matrix(std::string name, const Matrix& m) {
  NamedTensor t;
  t.name = std::move(name);
  t.shape = {m.rows, m.cols};
  t.f64 = m.data;
  return t;
}

NamedTensor NamedTensor::from_vector(std::string name,
                                     const std::vector<double>& v) {
  NamedTensor t;
  t.name = std::move(name);
  t.shape = {v.size()};
  t.f64 = v;
  return t;
}

Matrix NamedTensor::to_matrix() const {
  if (shape.size() != 2)
    throw validation_error("tensor " + name + " is not rank-2");
  if (dtype != Dtype::f64)
    throw validation_error("tensor " + name + " is not f64");
  Matrix m(shape[0], shape[1]);
  m.data = f64;
  return m;
}

const NamedTensor* TensorContainer::find(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const NamedTensor& TensorContainer::require(const std::string& name) const {
  const NamedTensor* t = find(name);
  if (!t) throw validation_error("missing tensor: " + name);
  return *t;
}

void TensorContainer::add(NamedTensor t) { tensors.push_back(std::move(t)); }

void write_container(const std::filesystem::path& path,
                     const TensorContainer& c) {
  validate_container(c);

  nlohmann::ordered_json header;
  header["tensors"] = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const NamedTensor& t : c.tensors) {
    offset = aligned_up(offset);
    offsets.push_back(offset);
    nlohmann::ordered_json entry;
    entry["name"] = t.name;
    entry["dtype"] = dtype_name(t.dtype);
    entry["shape"] = t.shape;
    entry["offset"] = offset;
    header["tensors"].push_back(std::move(entry));
    offset += t.scalar_count() * dtype_size(t.dtype);
  }
  const std::string header_text = header.dump();

  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw io_error("cannot open for writing: " + path.string());

  auto put = [&](const void* data, std::size_t len) {
    if (len && std::fwrite(data, 1, len, f.get()) != len)
      throw io_error("write failed: " + path.string());
  };

  put(kMagic, 8);
  std::uint32_t version = c.version;
  put(&version, 4);
  std::uint64_t hlen = header_text.size();
  put(&hlen, 8);
  put(header_text.data(), header_text.size());

  std::size_t cursor = 0;
  static const char zeros[8] = {};
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    const NamedTensor& t = c.tensors[i];
    if (offsets[i] > cursor) {
      put(zeros, offsets[i] - cursor);
      cursor = offsets[i];
    }
    if (t.dtype == Dtype::f64) {
      put(t.f64.data(), t.f64.size() * 8);
      cursor += t.f64.size() * 8;
    } else {
      put(t.f32.data(), t.f32.size() * 4);
      cursor += t.f32.size() * 4;
    }
  }

  if (std::fflush(f.get()) != 0) throw io_error("flush failed: " + path.string());
#ifdef __unix__
  if (fsync(fileno(f.get())) != 0)
    throw io_error("fsync failed: " + path.string());
#endif
}

TensorContainer read_container(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw io_error("cannot open for reading: " + path.string());

  auto get = [&](void* data, std::size_t len, const char* what) {
    if (std::fread(data, 1, len, f.get()) != len)
      throw io_error(std::string("truncated-payload: ") + what + " in " +
                     path.string());
  };

  char magic[8];
  get(magic, 8, "magic");
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw io_error("bad-magic: " + path.string());

  std::uint32_t version = 0;
  get(&version, 4, "version");
  if (version != kVersion)
    throw io_error("unsupported-version: " + std::to_string(version));

  std::uint64_t hlen = 0;
  get(&hlen, 8, "header length");
  if (hlen > (1ull << 30)) throw io_error("header length implausible");
  std::string header_text(hlen, '\0');
  get(header_text.data(), hlen, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("invalid header JSON: ") + e.what());
  }
  if (!header.contains("tensors") || !header["tensors"].is_array())
    throw io_error("invalid header: missing tensors array");

  // Remaining bytes are the payload.
  long payload_start = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_END);
  long file_end = std::ftell(f.get());
  std::size_t payload_len = static_cast<std::size_t>(file_end - payload_start);

  TensorContainer c;
  c.version = version;
  for (const auto& entry : header["tensors"]) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.dtype = dtype_from_name(entry.at("dtype").get<std::string>());
    t.shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::uint64_t off = entry.at("offset").get<std::uint64_t>();
    std::size_t bytes = t.scalar_count() * dtype_size(t.dtype);
    if (off + bytes > payload_len)
      throw io_error("truncated-payload: tensor " + t.name);
    std::fseek(f.get(), payload_start + static_cast<long>(off), SEEK_SET);
    if (t.dtype == Dtype::f64) {
      t.f64.resize(t.scalar_count());
      get(t.f64.data(), bytes, t.name.c_str());
    } else {
      t.f32.resize(t.scalar_count());
      get(t.f32.data(), bytes, t.name.c_str());
    }
    c.tensors.push_back(std::move(t));
  }
  validate_container(c);
  return c;
}

void WeightStack::validate() const {
  if (categories.empty())
    throw validation_error("weight stack has no categories");
  const std::size_t m = layer_rows(), n = layer_cols(), L = layers_per_category();
  if (m == 0 || n == 0 || L == 0)
    throw validation_error("weight stack has an empty category");
  for (const CategoryStack& cat : categories) {
    if (cat.layers.size() != L)
      throw validation_error("category " + cat.label +
                             ": layer count differs across categories");
    for (const Matrix& w : cat.layers)
      if (w.rows != m || w.cols != n)
        throw validation_error("category " + cat.label + ": shape mismatch");
  }
}

StackDist stack_dist_from_name(const std::string& name) {
  if (name == "gaussian") return StackDist::gaussian;
  if (name == "trained-task") return StackDist::trained_task;
  throw validation_error("unknown stack distribution: " + name);
}

WeightStack generate_synthetic_stack(std::uint64_t seed, std::size_t categories,
                                     std::size_t layers, std::size_t m,
                                     std::size_t n, StackDist dist) {
  if (categories == 0 || layers == 0 || m == 0 || n == 0)
    throw validation_error("generate_synthetic_stack: zero dimension");

  SplitMix64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));

  WeightStack stack;
  for (std::size_t c = 0; c < categories; ++c) {
    CategoryStack cat;
    cat.label = "cat" + std::to_string(c);
    for (std::size_t l = 0; l < layers; ++l) {
      Matrix w(m, n);
      if (dist == StackDist::gaussian) {
        for (double& v : w.data) v = rng.next_normal() * scale;
      } else {
        // Product of two thin gaussian factors gives a decaying spectrum;
        // the small additive term keeps every direction populated.
        std::size_t h = std::max<std::size_t>(1, n / 4);
        Matrix g1(m, h), g2(h, n);
        for (double& v : g1.data) v = rng.next_normal();
        for (double& v : g2.data) v = rng.next_normal();
        w = matmul(g1, g2);
        double fscale = 1.0 / (std::sqrt(static_cast<double>(h)) *
                               std::sqrt(static_cast<double>(n)));
        kernels::scal(fscale, w.data.data(), w.data.size());
        for (double& v : w.data) v += 0.05 * rng.next_normal() * scale;
      }
      cat.layers.push_back(std::move(w));
    }
    stack.categories.push_back(std::move(cat));
  }
  return stack;
}

TensorContainer stack_to_container(const WeightStack& stack) {
  stack.validate();
  TensorContainer c;
  for (const CategoryStack& cat : stack.categories)
    for (std::size_t i = 0; i < cat.layers.size(); ++i)
      c.add(NamedTensor::from_matrix(
          "cat/" + cat.label + "/layer/" + std::to_string(i), cat.layers[i]));
  return c;
}

WeightStack stack_from_container(const TensorContainer& c) {
  WeightStack stack;
  std::map<std::string, std::size_t> index;
  for (const NamedTensor& t : c.tensors) {
    if (t.name.rfind("cat/", 0) != 0) continue;
    std::size_t sep = t.name.find("/layer/");
    if (sep == std::string::npos)
      throw validation_error("malformed stack tensor name: " + t.name);
    std::string label = t.name.substr(4, sep - 4);
    std::size_t layer = std::stoul(t.name.substr(sep + 7));
    auto [it, inserted] = index.try_emplace(label, stack.categories.size());
    if (inserted) stack.categories.push_back(CategoryStack{label, {}});
    auto& layers = stack.categories[it->second].layers;
    if (layers.size() != layer)
      throw validation_error("non-contiguous layer indices for category " +
                             label);
    layers.push_back(t.to_matrix());
  }
  stack.validate();
  return stack;
}

}  // namespace frod
