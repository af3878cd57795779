// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0

#include "frod/adapter.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "frod/error.hpp"
#include "frod/linalg.hpp"
#include "frod/rng.hpp"

namespace frod {

void SparseOffDiag::validate() const {
  if (values.size() != support.size())
    throw validation_error("sparse matrix: values/support length mismatch");
  for (std::size_t i = 0; i < support.size(); ++i) {
    auto [p, q] = support[i];
    if (p == q)
      throw validation_error("sparse matrix: diagonal support at (" +
                             std::to_string(p) + "," + std::to_string(q) + ")");
    if (p >= n || q >= n)
      throw validation_error("sparse matrix: support out of range");
    if (i > 0 && !(support[i - 1] < support[i]))
      throw validation_error("sparse matrix: support not sorted/unique");
  }
}

Matrix SparseOffDiag::dense() const {
  Matrix m(n, n);
  for (std::size_t i = 0; i < support.size(); ++i)
    m.at(support[i].first, support[i].second) = values[i];
  return m;
}

SparseOffDiag sample_offdiag_support(std::size_t n, double s,
                                     std::uint64_t seed) {
  if (n < 2) throw validation_error("sample_offdiag_support: n must be >= 2");
  if (!(s >= 0.0) || s > 1.0)
    throw validation_error("sample_offdiag_support: density out of range");

  const std::size_t cells = n * n - n;
  std::size_t nnz = static_cast<std::size_t>(
      std::llround(s * static_cast<double>(n) * static_cast<double>(n)));
  nnz = std::min(nnz, cells);

  // Off-diagonal cell index t -> (row, col): col skips the diagonal.
  std::vector<std::uint64_t> pool(cells);
  for (std::uint64_t t = 0; t < cells; ++t) pool[t] = t;

  SplitMix64 rng(seed);
  SparseOffDiag out;
  out.n = n;
  out.density = s;
  out.seed = seed;
  out.support.reserve(nnz);
  for (std::size_t i = 0; i < nnz; ++i) {
    std::uint64_t j = i + rng.next_below(cells - i);
    std::swap(pool[i], pool[j]);
    std::uint64_t row = pool[i] / (n - 1);
    std::uint64_t rem = pool[i] % (n - 1);
    std::uint64_t col = rem < row ? rem : rem + 1;
    out.support.emplace_back(static_cast<std::uint32_t>(row),
                             static_cast<std::uint32_t>(col));
  }
  std::sort(out.support.begin(), out.support.end());
  out.values.assign(nnz, 0.0);
  out.validate();
  return out;
}

FrodLayer make_frod_layer(const JointDecomposition& dec, std::size_t category,
                          std::size_t layer, double density,
                          std::uint64_t seed) {
  FrodLayer l;
  l.u = dec.u.at(category).at(layer);
  l.vt = dec.vt(category);
  l.sigma = dec.sigma.at(category).at(layer);
  l.sigma_init = l.sigma;
  l.s = sample_offdiag_support(dec.n(), density, seed);
  return l;
}

namespace {

void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw validation_error(std::string(what) + ": length mismatch, got " +
                           std::to_string(got) + " want " +
                           std::to_string(want));
}

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x)
    if (!std::isfinite(v))
      throw validation_error(std::string(what) + ": non-finite input");
}

}  // namespace

std::vector<double> frod_forward(const FrodLayer& layer,
                                 std::span<const double> x) {
  const std::size_t m = layer.m(), n = layer.n();
  require_length(x.size(), n, "frod_forward");
  require_finite(x, "frod_forward");

  std::vector<double> t(n);
  kernels::gemv(layer.vt.data.data(), n, n, x.data(), t.data());
  std::vector<double> p(n);
  for (std::size_t k = 0; k < n; ++k) p[k] = layer.sigma[k] * t[k];
  for (std::size_t i = 0; i < layer.s.nnz(); ++i)
    p[layer.s.support[i].first] += layer.s.values[i] * t[layer.s.support[i].second];
  std::vector<double> y(m);
  kernels::gemv(layer.u.data.data(), m, n, p.data(), y.data());
  return y;
}

FrodGrads frod_backward(const FrodLayer& layer, std::span<const double> x,
                        std::span<const double> g) {
  const std::size_t m = layer.m(), n = layer.n();
  require_length(x.size(), n, "frod_backward x");
  require_length(g.size(), m, "frod_backward g");

  std::vector<double> ut_g(n);
  kernels::gemv_t(layer.u.data.data(), m, n, g.data(), ut_g.data());
  std::vector<double> v(n);
  kernels::gemv(layer.vt.data.data(), n, n, x.data(), v.data());

  FrodGrads grads;
  grads.d_sigma.resize(n);
  for (std::size_t k = 0; k < n; ++k) grads.d_sigma[k] = ut_g[k] * v[k];
  grads.d_s.resize(layer.s.nnz());
  for (std::size_t i = 0; i < layer.s.nnz(); ++i)
    grads.d_s[i] = ut_g[layer.s.support[i].first] * v[layer.s.support[i].second];

  // d_x = (U (diag(sigma) + S) V^T)^T g = V^T^T (diag(sigma) + S)^T U^T g.
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = layer.sigma[k] * ut_g[k];
  for (std::size_t i = 0; i < layer.s.nnz(); ++i)
    w[layer.s.support[i].second] += layer.s.values[i] * ut_g[layer.s.support[i].first];
  grads.d_x.resize(n);
  kernels::gemv_t(layer.vt.data.data(), n, n, w.data(), grads.d_x.data());
  return grads;
}

Matrix merge_weights(const FrodLayer& layer) {
  const std::size_t n = layer.n();
  Matrix mid(n, n);
  for (std::size_t k = 0; k < n; ++k) mid.at(k, k) = layer.sigma[k];
  for (std::size_t i = 0; i < layer.s.nnz(); ++i)
    mid.at(layer.s.support[i].first, layer.s.support[i].second) +=
        layer.s.values[i];
  return matmul(matmul(layer.u, mid), layer.vt);
}

TensorContainer frod_layers_to_container(const std::vector<FrodLayer>& layers) {
  TensorContainer c;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "frod/" + std::to_string(i) + "/";
    c.add(NamedTensor::from_matrix(p + "U", layers[i].u));
    c.add(NamedTensor::from_matrix(p + "Vt", layers[i].vt));
    c.add(NamedTensor::from_vector(p + "sigma", layers[i].sigma));
    c.add(NamedTensor::from_vector(p + "sigma_init", layers[i].sigma_init));
    c.add(NamedTensor::from_vector(p + "S_values", layers[i].s.values));
  }
  return c;
}

std::string frod_support_sidecar(const std::vector<FrodLayer>& layers) {
  nlohmann::ordered_json j;
  j["layers"] = nlohmann::ordered_json::array();
  for (const FrodLayer& l : layers) {
    nlohmann::ordered_json entry;
    entry["support"] = nlohmann::ordered_json::array();
    for (auto [p, q] : l.s.support) entry["support"].push_back({p, q});
    entry["s"] = l.s.density;
    entry["seed"] = l.s.seed;
    j["layers"].push_back(std::move(entry));
  }
  return j.dump();
}

std::vector<FrodLayer> frod_layers_from_container(const TensorContainer& c,
                                                  const std::string& sidecar) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(sidecar);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("invalid adapter sidecar JSON: ") + e.what());
  }
  std::vector<FrodLayer> layers;
  for (std::size_t i = 0;; ++i) {
    const std::string p = "frod/" + std::to_string(i) + "/";
    if (!c.find(p + "U")) break;
    FrodLayer l;
    l.u = c.require(p + "U").to_matrix();
    l.vt = c.require(p + "Vt").to_matrix();
    l.sigma = c.require(p + "sigma").f64;
    l.sigma_init = c.require(p + "sigma_init").f64;
    l.s.n = l.vt.rows;
    l.s.values = c.require(p + "S_values").f64;
    const auto& entry = j.at("layers").at(i);
    for (const auto& pq : entry.at("support"))
      l.s.support.emplace_back(pq.at(0).get<std::uint32_t>(),
                               pq.at(1).get<std::uint32_t>());
    l.s.density = entry.at("s").get<double>();
    l.s.seed = entry.at("seed").get<std::uint64_t>();
    l.s.validate();
    layers.push_back(std::move(l));
  }
  if (layers.empty())
    throw validation_error("adapter container holds no frod layers");
  return layers;
}

LoraLayer lora_init(const Matrix& w0, std::size_t r, std::uint64_t seed) {
  if (r < 1 || r > std::min(w0.rows, w0.cols))
    throw validation_error("lora_init: rank out of range");
  LoraLayer l;
  l.w0 = w0;
  l.b = Matrix(w0.rows, r);
  l.a = Matrix(r, w0.cols);
  SplitMix64 rng(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(r));
  for (double& v : l.a.data) v = rng.next_normal() * sd;
  return l;
}

std::vector<double> lora_forward(const LoraLayer& layer,
                                 std::span<const double> x) {
  require_length(x.size(), layer.w0.cols, "lora_forward");
  std::vector<double> y(layer.w0.rows);
  kernels::gemv(layer.w0.data.data(), layer.w0.rows, layer.w0.cols, x.data(),
                y.data());
  std::vector<double> ax(layer.a.rows);
  kernels::gemv(layer.a.data.data(), layer.a.rows, layer.a.cols, x.data(),
                ax.data());
  std::vector<double> bax(layer.b.rows);
  kernels::gemv(layer.b.data.data(), layer.b.rows, layer.b.cols, ax.data(),
                bax.data());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bax[i];
  return y;
}

LoraGrads lora_backward(const LoraLayer& layer, std::span<const double> x,
                        std::span<const double> g) {
  const std::size_t m = layer.w0.rows, n = layer.w0.cols, r = layer.b.cols;
  require_length(x.size(), n, "lora_backward x");
  require_length(g.size(), m, "lora_backward g");

  std::vector<double> ax(r);
  kernels::gemv(layer.a.data.data(), r, n, x.data(), ax.data());
  std::vector<double> btg(r);
  kernels::gemv_t(layer.b.data.data(), m, r, g.data(), btg.data());

  LoraGrads grads;
  grads.d_b = Matrix(m, r);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < r; ++k) grads.d_b.at(i, k) = g[i] * ax[k];
  grads.d_a = Matrix(r, n);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t j = 0; j < n; ++j) grads.d_a.at(k, j) = btg[k] * x[j];

  grads.d_x.resize(n);
  kernels::gemv_t(layer.w0.data.data(), m, n, g.data(), grads.d_x.data());
  std::vector<double> at_btg(n);
  kernels::gemv_t(layer.a.data.data(), r, n, btg.data(), at_btg.data());
  for (std::size_t j = 0; j < n; ++j) grads.d_x[j] += at_btg[j];
  return grads;
}

VeraShared vera_shared_basis(std::size_t m, std::size_t n, std::size_t r,
                             std::uint64_t seed) {
  if (r < 1) throw validation_error("vera_shared_basis: rank must be >= 1");
  VeraShared s;
  s.b = Matrix(m, r);
  s.a = Matrix(r, n);
  SplitMix64 rng(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(r));
  for (double& v : s.b.data) v = rng.next_normal() * sd;
  for (double& v : s.a.data) v = rng.next_normal() * sd;
  return s;
}

VeraLayer vera_init(const Matrix& w0, const VeraShared& basis) {
  if (basis.b.rows != w0.rows || basis.a.cols != w0.cols)
    throw validation_error("vera_init: basis shape mismatch");
  VeraLayer l;
  l.w0 = w0;
  l.basis = basis;
  l.d.assign(basis.b.cols, 0.1);
  l.bvec.assign(w0.rows, 0.0);
  return l;
}

std::vector<double> vera_forward(const VeraLayer& layer,
                                 std::span<const double> x) {
  const std::size_t m = layer.w0.rows, n = layer.w0.cols,
                    r = layer.basis.b.cols;
  require_length(x.size(), n, "vera_forward");
  std::vector<double> y(m);
  kernels::gemv(layer.w0.data.data(), m, n, x.data(), y.data());
  std::vector<double> t(r);
  kernels::gemv(layer.basis.a.data.data(), r, n, x.data(), t.data());
  for (std::size_t k = 0; k < r; ++k) t[k] *= layer.d[k];
  std::vector<double> z(m);
  kernels::gemv(layer.basis.b.data.data(), m, r, t.data(), z.data());
  for (std::size_t i = 0; i < m; ++i) y[i] += layer.bvec[i] * z[i];
  return y;
}

VeraGrads vera_backward(const VeraLayer& layer, std::span<const double> x,
                        std::span<const double> g) {
  const std::size_t m = layer.w0.rows, n = layer.w0.cols,
                    r = layer.basis.b.cols;
  require_length(x.size(), n, "vera_backward x");
  require_length(g.size(), m, "vera_backward g");

  std::vector<double> t(r);  // A x
  kernels::gemv(layer.basis.a.data.data(), r, n, x.data(), t.data());
  std::vector<double> u(r);  // diag(d) A x
  for (std::size_t k = 0; k < r; ++k) u[k] = layer.d[k] * t[k];
  std::vector<double> z(m);  // B diag(d) A x
  kernels::gemv(layer.basis.b.data.data(), m, r, u.data(), z.data());

  std::vector<double> gb(m);  // diag(bvec) g
  for (std::size_t i = 0; i < m; ++i) gb[i] = layer.bvec[i] * g[i];
  std::vector<double> bt_gb(r);
  kernels::gemv_t(layer.basis.b.data.data(), m, r, gb.data(), bt_gb.data());

  VeraGrads grads;
  grads.d_bvec.resize(m);
  for (std::size_t i = 0; i < m; ++i) grads.d_bvec[i] = g[i] * z[i];
  grads.d_d.resize(r);
  for (std::size_t k = 0; k < r; ++k) grads.d_d[k] = bt_gb[k] * t[k];

  grads.d_x.resize(n);
  kernels::gemv_t(layer.w0.data.data(), m, n, g.data(), grads.d_x.data());
  std::vector<double> du(r);
  for (std::size_t k = 0; k < r; ++k) du[k] = layer.d[k] * bt_gb[k];
  std::vector<double> at_du(n);
  kernels::gemv_t(layer.basis.a.data.data(), r, n, du.data(), at_du.data());
  for (std::size_t j = 0; j < n; ++j) grads.d_x[j] += at_du[j];
  return grads;
}

PissaInit pissa_init(const Matrix& w, std::size_t r) {
  if (r < 1 || r > std::min(w.rows, w.cols))
    throw validation_error("pissa_init: rank out of range");
  SvdResult svd = svd_thin(w);
  PissaInit out;
  out.b = Matrix(w.rows, r);
  out.a = Matrix(r, w.cols);
  for (std::size_t k = 0; k < r; ++k) {
    double root = std::sqrt(svd.s[k]);
    for (std::size_t i = 0; i < w.rows; ++i)
      out.b.at(i, k) = svd.u.at(i, k) * root;
    for (std::size_t j = 0; j < w.cols; ++j)
      out.a.at(k, j) = root * svd.v.at(j, k);
  }
  out.w_residual = w - matmul(out.b, out.a);
  return out;
}

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::frod: return "frod";
    case Scheme::lora: return "lora";
    case Scheme::vera: return "vera";
    case Scheme::pissa: return "pissa";
    case Scheme::full: return "full";
    case Scheme::sigma_only: return "sigma-only";
    case Scheme::s_only: return "s-only";
  }
  return "?";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "frod") return Scheme::frod;
  if (name == "lora") return Scheme::lora;
  if (name == "vera") return Scheme::vera;
  if (name == "pissa") return Scheme::pissa;
  if (name == "full") return Scheme::full;
  if (name == "sigma-only" || name == "sigma_only") return Scheme::sigma_only;
  if (name == "s-only" || name == "s_only") return Scheme::s_only;
  throw validation_error("unknown scheme: " + name);
}

ParamCount count_params(Scheme scheme, std::size_t m, std::size_t n,
                        std::size_t layers, std::size_t r, double s) {
  if (m == 0 || n == 0 || layers == 0)
    throw validation_error("count_params: dimensions must be positive");
  const long long L = static_cast<long long>(layers);
  const long long mn = static_cast<long long>(m) * static_cast<long long>(n);
  const long long rr = static_cast<long long>(r);
  long long nnz = std::llround(s * static_cast<double>(n) * static_cast<double>(n));
  nnz = std::min<long long>(nnz, static_cast<long long>(n) * static_cast<long long>(n) -
                                     static_cast<long long>(n));

  ParamCount out;
  out.scheme = scheme;
  switch (scheme) {
    case Scheme::frod:
    case Scheme::sigma_only:
    case Scheme::s_only: {
      out.weights_total = L * (mn + nnz + static_cast<long long>(n)) +
                          static_cast<long long>(n) * static_cast<long long>(n);
      if (scheme == Scheme::frod)
        out.trainable = L * (nnz + static_cast<long long>(n));
      else if (scheme == Scheme::sigma_only)
        out.trainable = L * static_cast<long long>(n);
      else
        out.trainable = L * nnz;
      break;
    }
    case Scheme::lora:
    case Scheme::pissa: {
      if (r < 1 || r > std::min(m, n))
        throw validation_error("count_params: rank out of range");
      out.weights_total = L * (mn + static_cast<long long>(m) * rr +
                               static_cast<long long>(n) * rr);
      out.trainable = L * (static_cast<long long>(m) * rr +
                           static_cast<long long>(n) * rr);
      break;
    }
    case Scheme::vera: {
      out.weights_total = L * (mn + rr + static_cast<long long>(n)) +
                          static_cast<long long>(m) * rr +
                          static_cast<long long>(n) * rr;
      out.trainable = L * (rr + static_cast<long long>(n));
      break;
    }
    case Scheme::full: {
      out.weights_total = L * mn;
      out.trainable = L * mn;
      break;
    }
  }
  out.optimizer_states = 2 * out.trainable;
  return out;
}

}  // namespace frod
