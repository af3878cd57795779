// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0

#include "frod/decomp.hpp"

#include <cmath>
#include <cstring>

#include "frod/error.hpp"
#include "frod/linalg.hpp"

namespace frod {

namespace {

constexpr double kSigmaFloor = 1e-12;

Matrix block_rows(const Matrix& a, std::size_t row0, std::size_t rows) {
  Matrix b(rows, a.cols);
  std::memcpy(b.data.data(), a.row(row0), rows * a.cols * sizeof(double));
  return b;
}

Matrix aggregate_from_qs(const std::vector<Matrix>& qs, std::size_t layers,
                         std::size_t m, double pi, AggregationMode mode) {
  const std::size_t n = qs[0].cols;
  Matrix t(n, n);
  std::size_t terms = 0;
  for (const Matrix& q : qs) {
    if (mode == AggregationMode::literal) {
      Matrix gram = matmul(transpose(q), q);
      t = t + ridge_inverse(gram, pi);
      ++terms;
    } else {
      for (std::size_t i = 0; i < layers; ++i) {
        Matrix qi = block_rows(q, i * m, m);
        Matrix gram = matmul(transpose(qi), qi);
        t = t + ridge_inverse(gram, pi);
        ++terms;
      }
    }
  }
  t = (1.0 / static_cast<double>(terms)) * t;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (t.at(i, j) + t.at(j, i));
      t.at(i, j) = v;
      t.at(j, i) = v;
    }
  return t;
}

}  // namespace

const char* aggregation_mode_name(AggregationMode m) {
  return m == AggregationMode::literal ? "literal" : "blockwise";
}

AggregationMode aggregation_mode_from_name(const std::string& name) {
  if (name == "literal") return AggregationMode::literal;
  if (name == "blockwise") return AggregationMode::blockwise;
  throw validation_error("unknown aggregation mode: " + name);
}

Matrix JointDecomposition::vt(std::size_t category) const {
  return matmul(transpose(z), r.at(category));
}

Matrix stack_category(const CategoryStack& cat) {
  if (cat.layers.empty())
    throw validation_error("stack_category: empty layer list");
  const std::size_t m = cat.layers[0].rows, n = cat.layers[0].cols;
  Matrix out(cat.layers.size() * m, n);
  for (std::size_t i = 0; i < cat.layers.size(); ++i) {
    const Matrix& w = cat.layers[i];
    if (w.rows != m || w.cols != n)
      throw validation_error("stack_category: shape mismatch at layer " +
                             std::to_string(i));
    std::memcpy(out.row(i * m), w.data.data(), m * n * sizeof(double));
  }
  return out;
}

Matrix gram_aggregate(const WeightStack& stack, double pi,
                      AggregationMode mode) {
  if (!(pi > 0.0)) throw validation_error("gram_aggregate: pi must be > 0");
  stack.validate();
  std::vector<Matrix> qs;
  for (const CategoryStack& cat : stack.categories)
    qs.push_back(qr_thin(stack_category(cat)).q);
  return aggregate_from_qs(qs, stack.layers_per_category(), stack.layer_rows(),
                           pi, mode);
}

JointDecomposition hjd_decompose(const WeightStack& stack, double pi,
                                 AggregationMode mode, bool floor_zero_sigma) {
  if (!(pi > 0.0)) throw validation_error("hjd_decompose: pi must be > 0");
  stack.validate();
  const std::size_t m = stack.layer_rows();
  const std::size_t n = stack.layer_cols();
  const std::size_t layers = stack.layers_per_category();
  if (layers * m < n)
    throw validation_error("hjd_decompose: need layers*m >= n for thin QR");

  JointDecomposition dec;
  dec.pi = pi;
  dec.mode = mode;

  std::vector<Matrix> qs;
  for (const CategoryStack& cat : stack.categories) {
    QrResult qr = qr_thin(stack_category(cat));
    qs.push_back(std::move(qr.q));
    dec.r.push_back(std::move(qr.r));
    dec.labels.push_back(cat.label);
  }

  Matrix t = aggregate_from_qs(qs, layers, m, pi, mode);
  EigResult eig = eigh_symmetric(t);
  dec.z = std::move(eig.vectors);
  dec.eigvals = std::move(eig.values);

  for (std::size_t c = 0; c < qs.size(); ++c) {
    std::vector<Matrix> us;
    std::vector<std::vector<double>> sigmas;
    for (std::size_t i = 0; i < layers; ++i) {
      Matrix b = matmul(block_rows(qs[c], i * m, m), dec.z);
      std::vector<double> sigma(n);
      for (std::size_t j = 0; j < n; ++j) {
        double ss = 0.0;
        for (std::size_t row = 0; row < m; ++row)
          ss += b.at(row, j) * b.at(row, j);
        sigma[j] = std::sqrt(ss);
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (sigma[j] < kSigmaFloor) {
          if (!floor_zero_sigma)
            throw numerical_error(
                "hjd_decompose: zero column strength in category " +
                dec.labels[c] + " layer " + std::to_string(i));
          dec.warnings.push_back("floored sigma[" + std::to_string(j) +
                                 "] of category " + dec.labels[c] + " layer " +
                                 std::to_string(i) + " to 1e-12");
          sigma[j] = kSigmaFloor;
        }
      }
      Matrix u = b;
      for (std::size_t row = 0; row < m; ++row)
        for (std::size_t j = 0; j < n; ++j) u.at(row, j) /= sigma[j];
      us.push_back(std::move(u));
      sigmas.push_back(std::move(sigma));
    }
    dec.u.push_back(std::move(us));
    dec.sigma.push_back(std::move(sigmas));
  }
  return dec;
}

Matrix reconstruct_layer(const JointDecomposition& dec, std::size_t category,
                         std::size_t layer) {
  if (category >= dec.u.size() || layer >= dec.u[category].size())
    throw validation_error("reconstruct_layer: index out of range");
  const Matrix& u = dec.u[category][layer];
  const std::vector<double>& sigma = dec.sigma[category][layer];
  Matrix scaled = u;
  for (std::size_t row = 0; row < scaled.rows; ++row)
    for (std::size_t j = 0; j < scaled.cols; ++j)
      scaled.at(row, j) *= sigma[j];
  return matmul(scaled, dec.vt(category));
}

Matrix gram_commutator_norms(const WeightStack& stack) {
  stack.validate();
  std::vector<Matrix> grams;
  for (const CategoryStack& cat : stack.categories)
    for (const Matrix& w : cat.layers) grams.push_back(matmul(transpose(w), w));
  if (grams.size() < 2)
    throw validation_error("gram_commutator_norms: need at least 2 matrices");

  Matrix out(grams.size(), grams.size());
  for (std::size_t i = 0; i < grams.size(); ++i)
    for (std::size_t j = i + 1; j < grams.size(); ++j) {
      Matrix comm = matmul(grams[i], grams[j]) - matmul(grams[j], grams[i]);
      double norm = frob_norm(comm);
      out.at(i, j) = norm;
      out.at(j, i) = norm;
    }
  return out;
}

TensorContainer decomposition_to_container(const JointDecomposition& dec) {
  TensorContainer c;
  c.add(NamedTensor::from_matrix("Z", dec.z));
  c.add(NamedTensor::from_vector("eigvals", dec.eigvals));
  c.add(NamedTensor::from_vector("pi", {dec.pi}));
  c.add(NamedTensor::from_vector(
      "mode", {dec.mode == AggregationMode::literal ? 0.0 : 1.0}));
  for (std::size_t cat = 0; cat < dec.labels.size(); ++cat) {
    const std::string& label = dec.labels[cat];
    c.add(NamedTensor::from_matrix("R/" + label, dec.r[cat]));
    for (std::size_t i = 0; i < dec.u[cat].size(); ++i) {
      c.add(NamedTensor::from_matrix(
          "U/" + label + "/" + std::to_string(i), dec.u[cat][i]));
      c.add(NamedTensor::from_vector(
          "sigma/" + label + "/" + std::to_string(i), dec.sigma[cat][i]));
    }
  }
  return c;
}

JointDecomposition decomposition_from_container(const TensorContainer& c) {
  JointDecomposition dec;
  dec.z = c.require("Z").to_matrix();
  dec.eigvals = c.require("eigvals").f64;
  dec.pi = c.require("pi").f64.at(0);
  dec.mode = c.require("mode").f64.at(0) == 0.0 ? AggregationMode::literal
                                                : AggregationMode::blockwise;
  for (const NamedTensor& t : c.tensors) {
    if (t.name.rfind("R/", 0) == 0) {
      dec.labels.push_back(t.name.substr(2));
      dec.r.push_back(t.to_matrix());
      dec.u.emplace_back();
      dec.sigma.emplace_back();
    }
  }
  for (std::size_t cat = 0; cat < dec.labels.size(); ++cat) {
    const std::string prefix = "U/" + dec.labels[cat] + "/";
    for (std::size_t i = 0;; ++i) {
      const NamedTensor* u = c.find(prefix + std::to_string(i));
      if (!u) break;
      dec.u[cat].push_back(u->to_matrix());
      dec.sigma[cat].push_back(
          c.require("sigma/" + dec.labels[cat] + "/" + std::to_string(i)).f64);
    }
    if (dec.u[cat].empty())
      throw validation_error("decomposition container: category " +
                             dec.labels[cat] + " has no layers");
  }
  return dec;
}

}  // namespace frod
