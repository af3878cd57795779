// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0

#include "frod/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "frod/analysis.hpp"
#include "frod/error.hpp"
#include "frod/parallel.hpp"
#include "frod/rng.hpp"

namespace frod {

namespace {

// Seed-derivation tags so independent random streams never collide.
constexpr std::uint64_t kTagPretrainTask = 0x70726574ull;
constexpr std::uint64_t kTagInit = 0x696e6974ull;
constexpr std::uint64_t kTagHead = 0x68656164ull;
constexpr std::uint64_t kTagSupport = 0x73757070ull;
constexpr std::uint64_t kTagAdapter = 0x61646170ull;
constexpr std::uint64_t kTagShuffle = 0x73687566ull;

// C = A * B^T; rows of both operands are contiguous, so this is the
// row-major friendly product.
Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j)
      c.at(i, j) = kernels::dot(a.row(i), b.row(j), a.cols);
  return c;
}

// C = A^T * B.
Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    const double* brow = b.row(i);
    for (std::size_t j = 0; j < a.cols; ++j)
      if (arow[j] != 0.0) kernels::axpy(arow[j], brow, c.row(j), b.cols);
  }
  return c;
}

std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

static const char* task_kind_name(TaskKind k) {
  return k == TaskKind::blobs ? "blobs" : "tiny-attention";
}

static TaskKind task_kind_from_name(const std::string& name) {
  if (name == "blobs") return TaskKind::blobs;
  if (name == "tiny-attention" || name == "tiny_attention")
    return TaskKind::tiny_attention;
  throw validation_error("unknown task kind: " + name);
}

void TrainConfig::validate() const {
  if (task.classes < 2) throw validation_error("config: classes must be >= 2");
  if (task.samples < task.classes)
    throw validation_error("config: samples must be >= classes");
  if (model.layers < 1 || model.m < 1 || model.n < 1)
    throw validation_error("config: model dimensions must be positive");
  if (model.m != model.n || model.n != task.input_dim)
    throw validation_error(
        "config: stacked layers require m == n == input_dim");
  if (scheme.lr_sigma < 0.0 || scheme.lr_s < 0.0 || scheme.lr_other < 0.0)
    throw validation_error("config: learning rates must be >= 0");
  if (scheme.s < 0.0 || scheme.s > 1.0)
    throw validation_error("config: density s out of range");
  if (optim.epochs < 1) throw validation_error("config: epochs must be >= 1");
  if (optim.batch < 1) throw validation_error("config: batch must be >= 1");
  if (!(optim.warmup_frac >= 0.0) || optim.warmup_frac >= 1.0)
    throw validation_error("config: warmup_frac must be in [0, 1)");
  if (!(pi > 0.0)) throw validation_error("config: pi must be > 0");
  if (scheme.name == Scheme::frod && scheme.lr_sigma == 0.0 &&
      scheme.lr_s == 0.0)
    throw validation_error("config: no trainable group (both lrs zero)");
  if ((scheme.name == Scheme::lora || scheme.name == Scheme::pissa ||
       scheme.name == Scheme::vera) &&
      (scheme.r < 1 || scheme.r > std::min(model.m, model.n)))
    throw validation_error("config: rank out of range");
}

TrainConfig TrainConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("config: invalid JSON: ") + e.what());
  }
  TrainConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("task")) {
      const auto& t = j["task"];
      cfg.task.kind = task_kind_from_name(t.value("kind", "blobs"));
      cfg.task.classes = t.value("classes", cfg.task.classes);
      cfg.task.input_dim = t.value("input_dim", cfg.task.input_dim);
      cfg.task.samples = t.value("samples", cfg.task.samples);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      cfg.model.layers = m.value("layers", cfg.model.layers);
      cfg.model.m = m.value("m", cfg.model.m);
      cfg.model.n = m.value("n", cfg.model.n);
    }
    if (j.contains("scheme")) {
      const auto& s = j["scheme"];
      cfg.scheme.name = scheme_from_name(s.value("name", "frod"));
      cfg.scheme.s = s.value("s", cfg.scheme.s);
      cfg.scheme.r = s.value("r", cfg.scheme.r);
      cfg.scheme.lr_sigma = s.value("lr_sigma", cfg.scheme.lr_sigma);
      cfg.scheme.lr_s = s.value("lr_S", cfg.scheme.lr_s);
      cfg.scheme.lr_other = s.value("lr_other", cfg.scheme.lr_other);
    }
    if (j.contains("optim")) {
      const auto& o = j["optim"];
      cfg.optim.epochs = o.value("epochs", cfg.optim.epochs);
      cfg.optim.batch = o.value("batch", cfg.optim.batch);
      cfg.optim.beta1 = o.value("beta1", cfg.optim.beta1);
      cfg.optim.beta2 = o.value("beta2", cfg.optim.beta2);
      cfg.optim.adam_eps = o.value("adam_eps", cfg.optim.adam_eps);
      cfg.optim.weight_decay = o.value("weight_decay", cfg.optim.weight_decay);
      cfg.optim.warmup_frac = o.value("warmup_frac", cfg.optim.warmup_frac);
      std::string sched = o.value("schedule", "cosine");
      if (sched == "cosine")
        cfg.optim.schedule = Schedule::cosine;
      else if (sched == "constant")
        cfg.optim.schedule = Schedule::constant;
      else
        throw validation_error("config: unknown schedule " + sched);
    }
    cfg.pi = j.value("pi", cfg.pi);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string TrainConfig::to_json_text() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["task"] = {{"kind", task_kind_name(task.kind)},
               {"classes", task.classes},
               {"input_dim", task.input_dim},
               {"samples", task.samples}};
  j["model"] = {{"layers", model.layers}, {"m", model.m}, {"n", model.n}};
  j["scheme"] = {{"name", scheme_name(scheme.name)}, {"s", scheme.s},
                 {"r", scheme.r},       {"lr_sigma", scheme.lr_sigma},
                 {"lr_S", scheme.lr_s}, {"lr_other", scheme.lr_other}};
  j["optim"] = {{"epochs", optim.epochs},
                {"batch", optim.batch},
                {"beta1", optim.beta1},
                {"beta2", optim.beta2},
                {"adam_eps", optim.adam_eps},
                {"weight_decay", optim.weight_decay},
                {"warmup_frac", optim.warmup_frac},
                {"schedule",
                 optim.schedule == Schedule::cosine ? "cosine" : "constant"}};
  j["pi"] = pi;
  return j.dump(2);
}

double blobs_bayes_error(double mean_distance) {
  return 0.5 * std::erfc(mean_distance / (2.0 * std::sqrt(2.0)));
}

Dataset make_task(const TaskSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2)
    throw validation_error("make_task: classes must be >= 2");
  if (spec.samples < spec.classes)
    throw validation_error("make_task: samples must be >= classes");
  if (spec.input_dim < 1)
    throw validation_error("make_task: input_dim must be >= 1");

  SplitMix64 rng(seed);
  const std::size_t feature_dim = spec.kind == TaskKind::blobs
                                      ? spec.input_dim
                                      : kAttentionSeqLen * spec.input_dim;

  Matrix x(spec.samples, feature_dim);
  std::vector<int> y(spec.samples);

  // Class anchors at radius 3 in token space, unit-variance noise.
  Matrix anchors(spec.classes, spec.input_dim);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t j = 0; j < spec.input_dim; ++j)
      anchors.at(c, j) = rng.next_normal();
    double norm = std::sqrt(kernels::sumsq(anchors.row(c), spec.input_dim));
    if (norm == 0.0) norm = 1.0;
    kernels::scal(3.0 / norm, anchors.row(c), spec.input_dim);
  }

  if (spec.kind == TaskKind::blobs) {
    for (std::size_t i = 0; i < spec.samples; ++i) {
      int cls = static_cast<int>(i % spec.classes);
      y[i] = cls;
      for (std::size_t j = 0; j < spec.input_dim; ++j)
        x.at(i, j) = anchors.at(cls, j) + rng.next_normal();
    }
  } else {
    // Random token sequences; the class anchor is planted at a random
    // position and the label is the anchor's class.
    for (std::size_t i = 0; i < spec.samples; ++i) {
      int cls = static_cast<int>(i % spec.classes);
      y[i] = cls;
      std::size_t pos = rng.next_below(kAttentionSeqLen);
      for (std::size_t t = 0; t < kAttentionSeqLen; ++t)
        for (std::size_t j = 0; j < spec.input_dim; ++j) {
          double v = rng.next_normal();
          if (t == pos) v = anchors.at(cls, j) + 0.3 * v;
          x.at(i, t * spec.input_dim + j) = v;
        }
    }
  }

  // Shuffled deterministic 80/20 split.
  std::vector<std::size_t> perm(spec.samples);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 0; i + 1 < perm.size(); ++i) {
    std::size_t j = i + rng.next_below(perm.size() - i);
    std::swap(perm[i], perm[j]);
  }
  std::size_t train_n = std::max<std::size_t>(1, (spec.samples * 4) / 5);
  if (train_n == spec.samples) train_n = spec.samples - 1;

  Dataset data;
  data.train_x = Matrix(train_n, feature_dim);
  data.train_y.resize(train_n);
  data.eval_x = Matrix(spec.samples - train_n, feature_dim);
  data.eval_y.resize(spec.samples - train_n);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    if (i < train_n) {
      std::memcpy(data.train_x.row(i), x.row(perm[i]),
                  feature_dim * sizeof(double));
      data.train_y[i] = y[perm[i]];
    } else {
      std::memcpy(data.eval_x.row(i - train_n), x.row(perm[i]),
                  feature_dim * sizeof(double));
      data.eval_y[i - train_n] = y[perm[i]];
    }
  }
  return data;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double warmup_frac,
                 double base_lr) {
  if (step > total_steps)
    throw validation_error("cosine_lr: step out of range");
  const std::size_t warm = static_cast<std::size_t>(
      std::ceil(warmup_frac * static_cast<double>(total_steps)));
  if (step < warm)
    return base_lr * static_cast<double>(step) / static_cast<double>(warm);
  const std::size_t span = total_steps > warm ? total_steps - warm : 1;
  double progress =
      static_cast<double>(step - warm) / static_cast<double>(span);
  return 0.5 * base_lr * (1.0 + std::cos(3.14159265358979323846 * progress));
}

void adamw_step(AdamState& state, std::span<double> params,
                std::span<const double> grads, double lr, double beta1,
                double beta2, double eps, double weight_decay) {
  if (params.size() != grads.size())
    throw validation_error("adamw_step: params/grads length mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size())
    throw validation_error("adamw_step: state size mismatch");
  for (double g : grads)
    if (!std::isfinite(g))
      throw numerical_error("adamw_step: non-finite gradient");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -=
        lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * params[i]);
  }
}

// ---- model internals -------------------------------------------------------

namespace {

struct DenseSlot {
  Matrix w;
  bool trainable = false;
};

struct FrodSlot {
  FrodLayer layer;
};

struct LoraSlot {  // also pissa (w0 holds the residual)
  LoraLayer layer;
};

struct VeraSlot {
  VeraLayer layer;
};

using Slot = std::variant<DenseSlot, FrodSlot, LoraSlot, VeraSlot>;

std::size_t slot_param_count(const Slot& slot, int group) {
  return std::visit(
      [&](const auto& s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DenseSlot>) {
          return group == 0 && s.trainable ? s.w.data.size() : 0;
        } else if constexpr (std::is_same_v<T, FrodSlot>) {
          return group == 0 ? s.layer.sigma.size() : s.layer.s.nnz();
        } else if constexpr (std::is_same_v<T, LoraSlot>) {
          return group == 0 ? s.layer.b.data.size() + s.layer.a.data.size()
                            : 0;
        } else {
          return group == 0 ? s.layer.d.size() + s.layer.bvec.size() : 0;
        }
      },
      slot);
}

void slot_gather(const Slot& slot, int group, double* out) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DenseSlot>) {
          if (group == 0 && s.trainable)
            std::copy(s.w.data.begin(), s.w.data.end(), out);
        } else if constexpr (std::is_same_v<T, FrodSlot>) {
          if (group == 0)
            std::copy(s.layer.sigma.begin(), s.layer.sigma.end(), out);
          else
            std::copy(s.layer.s.values.begin(), s.layer.s.values.end(), out);
        } else if constexpr (std::is_same_v<T, LoraSlot>) {
          if (group == 0) {
            out = std::copy(s.layer.b.data.begin(), s.layer.b.data.end(), out);
            std::copy(s.layer.a.data.begin(), s.layer.a.data.end(), out);
          }
        } else {
          if (group == 0) {
            out = std::copy(s.layer.d.begin(), s.layer.d.end(), out);
            std::copy(s.layer.bvec.begin(), s.layer.bvec.end(), out);
          }
        }
      },
      slot);
}

void slot_scatter(Slot& slot, int group, const double* in) {
  std::visit(
      [&](auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DenseSlot>) {
          if (group == 0 && s.trainable)
            std::copy(in, in + s.w.data.size(), s.w.data.begin());
        } else if constexpr (std::is_same_v<T, FrodSlot>) {
          if (group == 0)
            std::copy(in, in + s.layer.sigma.size(), s.layer.sigma.begin());
          else
            std::copy(in, in + s.layer.s.nnz(), s.layer.s.values.begin());
        } else if constexpr (std::is_same_v<T, LoraSlot>) {
          if (group == 0) {
            std::copy(in, in + s.layer.b.data.size(), s.layer.b.data.begin());
            std::copy(in + s.layer.b.data.size(),
                      in + s.layer.b.data.size() + s.layer.a.data.size(),
                      s.layer.a.data.begin());
          }
        } else {
          if (group == 0) {
            std::copy(in, in + s.layer.d.size(), s.layer.d.begin());
            std::copy(in + s.layer.d.size(),
                      in + s.layer.d.size() + s.layer.bvec.size(),
                      s.layer.bvec.begin());
          }
        }
      },
      slot);
}

Matrix slot_forward(const Slot& slot, const Matrix& x) {
  return std::visit(
      [&](const auto& s) -> Matrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DenseSlot>) {
          return matmul_nt(x, s.w);
        } else if constexpr (std::is_same_v<T, FrodSlot>) {
          const FrodLayer& l = s.layer;
          Matrix t = matmul_nt(x, l.vt);
          Matrix p(t.rows, t.cols);
          for (std::size_t b = 0; b < t.rows; ++b) {
            const double* trow = t.row(b);
            double* prow = p.row(b);
            for (std::size_t k = 0; k < l.n(); ++k)
              prow[k] = l.sigma[k] * trow[k];
            for (std::size_t i = 0; i < l.s.nnz(); ++i)
              prow[l.s.support[i].first] +=
                  l.s.values[i] * trow[l.s.support[i].second];
          }
          return matmul_nt(p, l.u);
        } else if constexpr (std::is_same_v<T, LoraSlot>) {
          const LoraLayer& l = s.layer;
          Matrix y = matmul_nt(x, l.w0);
          Matrix xa = matmul_nt(x, l.a);
          Matrix bax = matmul_nt(xa, l.b);
          for (std::size_t i = 0; i < y.data.size(); ++i)
            y.data[i] += bax.data[i];
          return y;
        } else {
          const VeraLayer& l = s.layer;
          Matrix y = matmul_nt(x, l.w0);
          Matrix t = matmul_nt(x, l.basis.a);
          for (std::size_t b = 0; b < t.rows; ++b)
            for (std::size_t k = 0; k < l.d.size(); ++k) t.at(b, k) *= l.d[k];
          Matrix z = matmul_nt(t, l.basis.b);
          for (std::size_t b = 0; b < z.rows; ++b)
            for (std::size_t i = 0; i < l.bvec.size(); ++i)
              y.at(b, i) += l.bvec[i] * z.at(b, i);
          return y;
        }
      },
      slot);
}

// Returns dX; accumulates parameter gradients (sums over rows) into the two
// group slices.
Matrix slot_backward(const Slot& slot, const Matrix& x, const Matrix& g,
                     double* grad0, double* grad1) {
  return std::visit(
      [&](const auto& s) -> Matrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DenseSlot>) {
          if (s.trainable) {
            Matrix dw = matmul_tn(g, x);
            for (std::size_t i = 0; i < dw.data.size(); ++i)
              grad0[i] += dw.data[i];
          }
          return matmul(g, s.w);
        } else if constexpr (std::is_same_v<T, FrodSlot>) {
          const FrodLayer& l = s.layer;
          Matrix t = matmul_nt(x, l.vt);  // latent input coordinates
          Matrix gu = matmul(g, l.u);     // latent upstream gradients
          for (std::size_t b = 0; b < t.rows; ++b) {
            const double* trow = t.row(b);
            const double* gurow = gu.row(b);
            for (std::size_t k = 0; k < l.n(); ++k)
              grad0[k] += gurow[k] * trow[k];
            for (std::size_t i = 0; i < l.s.nnz(); ++i)
              grad1[i] +=
                  gurow[l.s.support[i].first] * trow[l.s.support[i].second];
          }
          Matrix z(gu.rows, gu.cols);
          for (std::size_t b = 0; b < gu.rows; ++b) {
            const double* gurow = gu.row(b);
            double* zrow = z.row(b);
            for (std::size_t k = 0; k < l.n(); ++k)
              zrow[k] = l.sigma[k] * gurow[k];
            for (std::size_t i = 0; i < l.s.nnz(); ++i)
              zrow[l.s.support[i].second] +=
                  l.s.values[i] * gurow[l.s.support[i].first];
          }
          return matmul(z, l.vt);
        } else if constexpr (std::is_same_v<T, LoraSlot>) {
          const LoraLayer& l = s.layer;
          const std::size_t bsize = l.b.data.size();
          Matrix xa = matmul_nt(x, l.a);
          Matrix gb = matmul(g, l.b);
          Matrix d_b = matmul_tn(g, xa);
          Matrix d_a = matmul_tn(gb, x);
          for (std::size_t i = 0; i < bsize; ++i) grad0[i] += d_b.data[i];
          for (std::size_t i = 0; i < d_a.data.size(); ++i)
            grad0[bsize + i] += d_a.data[i];
          Matrix dx = matmul(g, l.w0);
          Matrix dx2 = matmul(gb, l.a);
          for (std::size_t i = 0; i < dx.data.size(); ++i)
            dx.data[i] += dx2.data[i];
          return dx;
        } else {
          const VeraLayer& l = s.layer;
          const std::size_t r = l.d.size(), m = l.bvec.size();
          Matrix t = matmul_nt(x, l.basis.a);
          Matrix u = t;
          for (std::size_t b = 0; b < u.rows; ++b)
            for (std::size_t k = 0; k < r; ++k) u.at(b, k) *= l.d[k];
          Matrix z = matmul_nt(u, l.basis.b);
          Matrix gbv(g.rows, m);
          for (std::size_t b = 0; b < g.rows; ++b)
            for (std::size_t i = 0; i < m; ++i)
              gbv.at(b, i) = l.bvec[i] * g.at(b, i);
          Matrix tt = matmul(gbv, l.basis.b);
          for (std::size_t b = 0; b < g.rows; ++b) {
            for (std::size_t k = 0; k < r; ++k)
              grad0[k] += tt.at(b, k) * t.at(b, k);
            for (std::size_t i = 0; i < m; ++i)
              grad0[r + i] += g.at(b, i) * z.at(b, i);
          }
          Matrix dx = matmul(g, l.w0);
          for (std::size_t b = 0; b < tt.rows; ++b)
            for (std::size_t k = 0; k < r; ++k) tt.at(b, k) *= l.d[k];
          Matrix dx2 = matmul(tt, l.basis.a);
          for (std::size_t i = 0; i < dx.data.size(); ++i)
            dx.data[i] += dx2.data[i];
          return dx;
        }
      },
      slot);
}

}  // namespace

struct AdapterModel::State {
  TaskKind kind = TaskKind::blobs;
  Scheme scheme = Scheme::frod;
  std::size_t layers = 0;
  std::size_t cats = 0;  // 1 for blobs, 4 (q/k/v/o) for tiny-attention
  std::size_t dim = 0;   // m == n == input_dim
  std::size_t classes = 0;
  std::vector<Slot> slots;  // index = layer * cats + cat
  Matrix head;              // frozen
  std::vector<int> groups;
  std::vector<std::size_t> blocks;
  std::vector<std::array<std::size_t, 2>> offsets;
  std::size_t total_params = 0;

  void index_params() {
    groups.clear();
    blocks.clear();
    offsets.assign(slots.size(), {0, 0});
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      std::size_t block = 0;
      for (int grp = 0; grp < 2; ++grp) {
        offsets[i][grp] = cursor;
        std::size_t count = slot_param_count(slots[i], grp);
        for (std::size_t k = 0; k < count; ++k) groups.push_back(grp);
        cursor += count;
        block += count;
      }
      if (block > 0) blocks.push_back(block);
    }
    total_params = cursor;
  }

  struct ForwardTrace {
    std::vector<Matrix> inputs;            // input of each block
    std::vector<std::vector<Matrix>> qkv;  // per block: q, k, v, probs, h
  };

  Matrix forward_blocks(const Matrix& x, ForwardTrace* trace) const;
  AdapterModel::EvalStats run(const Matrix& x, const std::vector<int>& y,
                              std::vector<double>* grad) const;
};

Matrix AdapterModel::State::forward_blocks(const Matrix& x,
                                           ForwardTrace* trace) const {
  Matrix cur = x;
  if (kind == TaskKind::blobs) {
    for (std::size_t l = 0; l < layers; ++l) {
      if (trace) trace->inputs.push_back(cur);
      Matrix y = slot_forward(slots[l], cur);
      if (l + 1 < layers)
        for (double& v : y.data) v = std::tanh(v);
      cur = std::move(y);
    }
    return cur;
  }

  const std::size_t rows = x.rows;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t l = 0; l < layers; ++l) {
    if (trace) {
      trace->inputs.push_back(cur);
      trace->qkv.emplace_back();
    }
    // Every (sample, token) pair becomes one row for the projections.
    Matrix tokens(rows * kAttentionSeqLen, dim);
    for (std::size_t b = 0; b < rows; ++b)
      std::memcpy(tokens.row(b * kAttentionSeqLen), cur.row(b),
                  kAttentionSeqLen * dim * sizeof(double));
    Matrix q = slot_forward(slots[l * cats + 0], tokens);
    Matrix k = slot_forward(slots[l * cats + 1], tokens);
    Matrix v = slot_forward(slots[l * cats + 2], tokens);
    Matrix probs(rows * kAttentionSeqLen, kAttentionSeqLen);
    Matrix h(rows * kAttentionSeqLen, dim);
    for (std::size_t b = 0; b < rows; ++b) {
      const std::size_t base = b * kAttentionSeqLen;
      for (std::size_t i = 0; i < kAttentionSeqLen; ++i) {
        double* prow = probs.row(base + i);
        for (std::size_t j = 0; j < kAttentionSeqLen; ++j)
          prow[j] =
              kernels::dot(q.row(base + i), k.row(base + j), dim) * inv_sqrt;
        double mx = prow[0];
        for (std::size_t j = 1; j < kAttentionSeqLen; ++j)
          mx = std::max(mx, prow[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < kAttentionSeqLen; ++j) {
          prow[j] = std::exp(prow[j] - mx);
          sum += prow[j];
        }
        for (std::size_t j = 0; j < kAttentionSeqLen; ++j) prow[j] /= sum;
      }
      for (std::size_t i = 0; i < kAttentionSeqLen; ++i) {
        double* hrow = h.row(base + i);
        std::memset(hrow, 0, dim * sizeof(double));
        const double* prow = probs.row(base + i);
        for (std::size_t j = 0; j < kAttentionSeqLen; ++j)
          kernels::axpy(prow[j], v.row(base + j), hrow, dim);
      }
    }
    Matrix o = slot_forward(slots[l * cats + 3], h);
    if (trace) trace->qkv[l] = {q, k, v, probs, h};

    Matrix next(rows, kAttentionSeqLen * dim);
    for (std::size_t b = 0; b < rows; ++b)
      std::memcpy(next.row(b), o.row(b * kAttentionSeqLen),
                  kAttentionSeqLen * dim * sizeof(double));
    if (l + 1 < layers)
      for (double& vv : next.data) vv = std::tanh(vv);
    cur = std::move(next);
  }

  Matrix pooled(rows, dim);
  for (std::size_t b = 0; b < rows; ++b) {
    double* prow = pooled.row(b);
    std::memset(prow, 0, dim * sizeof(double));
    for (std::size_t t = 0; t < kAttentionSeqLen; ++t)
      kernels::axpy(1.0 / kAttentionSeqLen, cur.row(b) + t * dim, prow, dim);
  }
  return pooled;
}

AdapterModel::EvalStats AdapterModel::State::run(
    const Matrix& x, const std::vector<int>& y,
    std::vector<double>* grad) const {
  const std::size_t rows = x.rows;
  ForwardTrace trace;
  Matrix features = forward_blocks(x, grad ? &trace : nullptr);
  Matrix logits = matmul_nt(features, head);

  AdapterModel::EvalStats stats;
  Matrix dlogits(rows, classes);
  for (std::size_t b = 0; b < rows; ++b) {
    const double* lrow = logits.row(b);
    double mx = lrow[0];
    std::size_t arg = 0;
    for (std::size_t c = 1; c < classes; ++c)
      if (lrow[c] > mx) {
        mx = lrow[c];
        arg = c;
      }
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(lrow[c] - mx);
    stats.loss += mx + std::log(sum) - lrow[static_cast<std::size_t>(y[b])];
    stats.acc += arg == static_cast<std::size_t>(y[b]) ? 1.0 : 0.0;
    if (grad) {
      double* drow = dlogits.row(b);
      for (std::size_t c = 0; c < classes; ++c)
        drow[c] = std::exp(lrow[c] - mx) / sum;
      drow[static_cast<std::size_t>(y[b])] -= 1.0;
    }
  }
  stats.loss /= static_cast<double>(rows);
  stats.acc /= static_cast<double>(rows);
  if (!grad) return stats;

  kernels::scal(1.0 / static_cast<double>(rows), dlogits.data.data(),
                dlogits.data.size());
  Matrix dfeat = matmul(dlogits, head);

  grad->assign(total_params, 0.0);
  auto g0 = [&](std::size_t slot) { return grad->data() + offsets[slot][0]; };
  auto g1 = [&](std::size_t slot) { return grad->data() + offsets[slot][1]; };

  if (kind == TaskKind::blobs) {
    Matrix g = std::move(dfeat);
    for (std::size_t l = layers; l-- > 0;) {
      if (l + 1 < layers) {
        // Post-tanh output of layer l is the traced input of layer l+1.
        const Matrix& act = trace.inputs[l + 1];
        for (std::size_t i = 0; i < g.data.size(); ++i)
          g.data[i] *= 1.0 - act.data[i] * act.data[i];
      }
      g = slot_backward(slots[l], trace.inputs[l], g, g0(l), g1(l));
    }
    return stats;
  }

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dim));
  Matrix g(rows, kAttentionSeqLen * dim);
  for (std::size_t b = 0; b < rows; ++b)
    for (std::size_t t = 0; t < kAttentionSeqLen; ++t)
      for (std::size_t j = 0; j < dim; ++j)
        g.at(b, t * dim + j) = dfeat.at(b, j) / kAttentionSeqLen;

  for (std::size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) {
      const Matrix& act = trace.inputs[l + 1];
      for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] *= 1.0 - act.data[i] * act.data[i];
    }
    const Matrix& q = trace.qkv[l][0];
    const Matrix& k = trace.qkv[l][1];
    const Matrix& v = trace.qkv[l][2];
    const Matrix& probs = trace.qkv[l][3];
    const Matrix& h = trace.qkv[l][4];

    Matrix tokens(rows * kAttentionSeqLen, dim);
    for (std::size_t b = 0; b < rows; ++b)
      std::memcpy(tokens.row(b * kAttentionSeqLen), trace.inputs[l].row(b),
                  kAttentionSeqLen * dim * sizeof(double));
    Matrix go(rows * kAttentionSeqLen, dim);
    for (std::size_t b = 0; b < rows; ++b)
      std::memcpy(go.row(b * kAttentionSeqLen), g.row(b),
                  kAttentionSeqLen * dim * sizeof(double));

    Matrix dh = slot_backward(slots[l * cats + 3], h, go, g0(l * cats + 3),
                              g1(l * cats + 3));

    Matrix dq(rows * kAttentionSeqLen, dim);
    Matrix dk(rows * kAttentionSeqLen, dim);
    Matrix dv(rows * kAttentionSeqLen, dim);
    double dprobs[kAttentionSeqLen][kAttentionSeqLen];
    double dscores[kAttentionSeqLen][kAttentionSeqLen];
    for (std::size_t b = 0; b < rows; ++b) {
      const std::size_t base = b * kAttentionSeqLen;
      for (std::size_t i = 0; i < kAttentionSeqLen; ++i)
        for (std::size_t j = 0; j < kAttentionSeqLen; ++j)
          dprobs[i][j] = kernels::dot(dh.row(base + i), v.row(base + j), dim);
      for (std::size_t j = 0; j < kAttentionSeqLen; ++j) {
        double* dvrow = dv.row(base + j);
        std::memset(dvrow, 0, dim * sizeof(double));
        for (std::size_t i = 0; i < kAttentionSeqLen; ++i)
          kernels::axpy(probs.at(base + i, j), dh.row(base + i), dvrow, dim);
      }
      for (std::size_t i = 0; i < kAttentionSeqLen; ++i) {
        const double* prow = probs.row(base + i);
        double inner = 0.0;
        for (std::size_t j = 0; j < kAttentionSeqLen; ++j)
          inner += dprobs[i][j] * prow[j];
        for (std::size_t j = 0; j < kAttentionSeqLen; ++j)
          dscores[i][j] = (dprobs[i][j] - inner) * prow[j] * inv_sqrt;
      }
      for (std::size_t i = 0; i < kAttentionSeqLen; ++i) {
        double* dqrow = dq.row(base + i);
        std::memset(dqrow, 0, dim * sizeof(double));
        for (std::size_t j = 0; j < kAttentionSeqLen; ++j)
          kernels::axpy(dscores[i][j], k.row(base + j), dqrow, dim);
      }
      for (std::size_t j = 0; j < kAttentionSeqLen; ++j) {
        double* dkrow = dk.row(base + j);
        std::memset(dkrow, 0, dim * sizeof(double));
        for (std::size_t i = 0; i < kAttentionSeqLen; ++i)
          kernels::axpy(dscores[i][j], q.row(base + i), dkrow, dim);
      }
    }

    Matrix dx_q = slot_backward(slots[l * cats + 0], tokens, dq,
                                g0(l * cats + 0), g1(l * cats + 0));
    Matrix dx_k = slot_backward(slots[l * cats + 1], tokens, dk,
                                g0(l * cats + 1), g1(l * cats + 1));
    Matrix dx_v = slot_backward(slots[l * cats + 2], tokens, dv,
                                g0(l * cats + 2), g1(l * cats + 2));

    Matrix gnext(rows, kAttentionSeqLen * dim);
    for (std::size_t b = 0; b < rows; ++b)
      for (std::size_t t = 0; t < kAttentionSeqLen; ++t)
        for (std::size_t j = 0; j < dim; ++j)
          gnext.at(b, t * dim + j) = dx_q.at(b * kAttentionSeqLen + t, j) +
                                     dx_k.at(b * kAttentionSeqLen + t, j) +
                                     dx_v.at(b * kAttentionSeqLen + t, j);
    g = std::move(gnext);
  }
  return stats;
}

// ---- AdapterModel ----------------------------------------------------------

AdapterModel::AdapterModel() = default;
AdapterModel::~AdapterModel() = default;
AdapterModel::AdapterModel(AdapterModel&&) noexcept = default;
AdapterModel& AdapterModel::operator=(AdapterModel&&) noexcept = default;

AdapterModel::AdapterModel(const AdapterModel& o)
    : state_(o.state_ ? std::make_unique<State>(*o.state_) : nullptr) {}

AdapterModel& AdapterModel::operator=(const AdapterModel& o) {
  if (this != &o)
    state_ = o.state_ ? std::make_unique<State>(*o.state_) : nullptr;
  return *this;
}

std::size_t AdapterModel::trainable_count() const {
  return state_->total_params;
}

const std::vector<int>& AdapterModel::param_groups() const {
  return state_->groups;
}

const std::vector<std::size_t>& AdapterModel::param_blocks() const {
  return state_->blocks;
}

Scheme AdapterModel::scheme() const { return state_->scheme; }

std::vector<double> AdapterModel::trainable() const {
  std::vector<double> out(state_->total_params);
  for (std::size_t i = 0; i < state_->slots.size(); ++i)
    for (int grp = 0; grp < 2; ++grp)
      slot_gather(state_->slots[i], grp, out.data() + state_->offsets[i][grp]);
  return out;
}

void AdapterModel::set_trainable(std::span<const double> theta) {
  if (theta.size() != state_->total_params)
    throw validation_error("set_trainable: length mismatch");
  for (std::size_t i = 0; i < state_->slots.size(); ++i)
    for (int grp = 0; grp < 2; ++grp)
      slot_scatter(state_->slots[i], grp,
                   theta.data() + state_->offsets[i][grp]);
}

AdapterModel::EvalStats AdapterModel::evaluate(
    const Matrix& x, const std::vector<int>& y) const {
  return state_->run(x, y, nullptr);
}

AdapterModel::EvalStats AdapterModel::batch_gradients(
    const Matrix& x, const std::vector<int>& y,
    std::vector<double>& grad) const {
  return state_->run(x, y, &grad);
}

std::vector<const FrodLayer*> AdapterModel::frod_layers() const {
  std::vector<const FrodLayer*> out;
  for (const Slot& slot : state_->slots)
    if (const FrodSlot* f = std::get_if<FrodSlot>(&slot))
      out.push_back(&f->layer);
  return out;
}

// ---- builders and the training loop ----------------------------------------

namespace {

std::unique_ptr<AdapterModel::State> make_base_state(const TrainConfig& cfg) {
  auto st = std::make_unique<AdapterModel::State>();
  st->kind = cfg.task.kind;
  st->scheme = cfg.scheme.name;
  st->layers = cfg.model.layers;
  st->cats = cfg.task.kind == TaskKind::blobs ? 1 : 4;
  st->dim = cfg.model.n;
  st->classes = cfg.task.classes;
  SplitMix64 head_rng(derive_seed(cfg.seed, kTagHead));
  st->head = Matrix(cfg.task.classes, st->dim);
  const double head_sd = 1.0 / std::sqrt(static_cast<double>(st->dim));
  for (double& v : st->head.data) v = head_rng.next_normal() * head_sd;
  return st;
}

AdapterModel wrap_state(std::unique_ptr<AdapterModel::State> st);

AdapterModel make_dense_model(const TrainConfig& cfg, bool trainable) {
  auto st = make_base_state(cfg);
  st->scheme = Scheme::full;
  SplitMix64 rng(derive_seed(cfg.seed, kTagInit));
  const double sd = 1.0 / std::sqrt(static_cast<double>(st->dim));
  for (std::size_t slot = 0; slot < st->layers * st->cats; ++slot) {
    DenseSlot d;
    d.w = Matrix(st->dim, st->dim);
    for (double& v : d.w.data) v = rng.next_normal() * sd;
    d.trainable = trainable;
    st->slots.emplace_back(std::move(d));
  }
  st->index_params();
  return wrap_state(std::move(st));
}

struct LoopSpec {
  double lr_group0 = 0.0;
  double lr_group1 = 0.0;
  std::size_t epochs = 1;
  std::uint64_t shuffle_seed = 0;
};

TrainReport run_loop(AdapterModel& model, const Dataset& data,
                     const TrainConfig& cfg, const LoopSpec& spec) {
  auto t0 = std::chrono::steady_clock::now();
  TrainReport report;

  const std::size_t train_n = data.train_x.rows;
  const std::size_t batch = std::min(cfg.optim.batch, train_n);
  const std::size_t steps_per_epoch = (train_n + batch - 1) / batch;
  const std::size_t total_steps = steps_per_epoch * spec.epochs;

  const std::vector<int>& groups = model.param_groups();
  std::vector<std::size_t> idx0, idx1;
  for (std::size_t i = 0; i < groups.size(); ++i)
    (groups[i] == 0 ? idx0 : idx1).push_back(i);
  report.trainable_count = (spec.lr_group0 != 0.0 ? idx0.size() : 0) +
                           (spec.lr_group1 != 0.0 ? idx1.size() : 0);
  AdamState state0, state1;

  auto record_epoch = [&]() {
    EpochStats st;
    auto tr = model.evaluate(data.train_x, data.train_y);
    auto ev = model.evaluate(data.eval_x, data.eval_y);
    st.train_loss = tr.loss;
    st.train_acc = tr.acc;
    st.eval_loss = ev.loss;
    st.eval_acc = ev.acc;
    report.epochs.push_back(st);
    report.checkpoints.push_back(model.trainable());
  };
  record_epoch();

  std::vector<double> theta = model.trainable();
  std::vector<double> grad(theta.size(), 0.0);
  std::vector<double> p0(idx0.size()), gg0(idx0.size());
  std::vector<double> p1(idx1.size()), gg1(idx1.size());

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < spec.epochs && !report.diverged;
       ++epoch) {
    std::vector<std::size_t> perm(train_n);
    std::iota(perm.begin(), perm.end(), 0);
    SplitMix64 shuffler(derive_seed(spec.shuffle_seed, kTagShuffle + epoch));
    for (std::size_t i = 0; i + 1 < train_n; ++i) {
      std::size_t j = i + shuffler.next_below(train_n - i);
      std::swap(perm[i], perm[j]);
    }

    for (std::size_t start = 0; start < train_n; start += batch) {
      const std::size_t rows = std::min(batch, train_n - start);
      Matrix bx(rows, data.train_x.cols);
      std::vector<int> by(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        std::memcpy(bx.row(r), data.train_x.row(perm[start + r]),
                    data.train_x.cols * sizeof(double));
        by[r] = data.train_y[perm[start + r]];
      }
      auto st = model.batch_gradients(bx, by, grad);
      if (!std::isfinite(st.loss)) {
        report.diverged = true;
        break;
      }

      double lr0 = spec.lr_group0, lr1 = spec.lr_group1;
      if (cfg.optim.schedule == Schedule::cosine) {
        lr0 = cosine_lr(step, total_steps, cfg.optim.warmup_frac, lr0);
        lr1 = cosine_lr(step, total_steps, cfg.optim.warmup_frac, lr1);
      }
      report.step_lrs.push_back({lr0, lr1});

      if (!idx0.empty() && spec.lr_group0 != 0.0) {
        for (std::size_t i = 0; i < idx0.size(); ++i) {
          p0[i] = theta[idx0[i]];
          gg0[i] = grad[idx0[i]];
        }
        adamw_step(state0, p0, gg0, lr0, cfg.optim.beta1, cfg.optim.beta2,
                   cfg.optim.adam_eps, cfg.optim.weight_decay);
        for (std::size_t i = 0; i < idx0.size(); ++i) theta[idx0[i]] = p0[i];
      }
      if (!idx1.empty() && spec.lr_group1 != 0.0) {
        for (std::size_t i = 0; i < idx1.size(); ++i) {
          p1[i] = theta[idx1[i]];
          gg1[i] = grad[idx1[i]];
        }
        adamw_step(state1, p1, gg1, lr1, cfg.optim.beta1, cfg.optim.beta2,
                   cfg.optim.adam_eps, cfg.optim.weight_decay);
        for (std::size_t i = 0; i < idx1.size(); ++i) theta[idx1[i]] = p1[i];
      }
      model.set_trainable(theta);
      ++step;
    }
    record_epoch();
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

// (lr group 0, lr group 1) by scheme.
std::pair<double, double> scheme_lrs(const SchemeSpec& s) {
  switch (s.name) {
    case Scheme::frod: return {s.lr_sigma, s.lr_s};
    case Scheme::sigma_only: return {s.lr_sigma, 0.0};
    case Scheme::s_only: return {0.0, s.lr_s};
    default: return {s.lr_other, 0.0};
  }
}

}  // namespace

AdapterModel AdapterModel::build(const TrainConfig& cfg) {
  cfg.validate();

  // The pretrained backbone comes from a short full-FT warm start on a
  // seed-shifted sibling task; the head stays frozen throughout.
  AdapterModel dense = make_dense_model(cfg, /*trainable=*/true);
  Dataset pre_data =
      make_task(cfg.task, derive_seed(cfg.seed, kTagPretrainTask));
  LoopSpec pre_spec;
  pre_spec.lr_group0 = 1e-2;
  pre_spec.lr_group1 = 0.0;
  pre_spec.epochs = 5;
  pre_spec.shuffle_seed = derive_seed(cfg.seed, kTagPretrainTask);
  run_loop(dense, pre_data, cfg, pre_spec);

  if (cfg.scheme.name == Scheme::full) {
    return dense;  // dense slots stay trainable
  }

  const State& pre = *dense.state_;
  auto st = make_base_state(cfg);
  const std::size_t cats = st->cats;

  if (cfg.scheme.name == Scheme::frod || cfg.scheme.name == Scheme::sigma_only ||
      cfg.scheme.name == Scheme::s_only) {
    static const char* kCatLabels[4] = {"q", "k", "v", "o"};
    WeightStack stack;
    for (std::size_t c = 0; c < cats; ++c) {
      CategoryStack cat;
      cat.label = cats == 1 ? "layers" : kCatLabels[c];
      for (std::size_t l = 0; l < st->layers; ++l)
        cat.layers.push_back(std::get<DenseSlot>(pre.slots[l * cats + c]).w);
      stack.categories.push_back(std::move(cat));
    }
    JointDecomposition dec =
        hjd_decompose(stack, cfg.pi, AggregationMode::blockwise);
    st->slots.resize(st->layers * cats);
    for (std::size_t l = 0; l < st->layers; ++l)
      for (std::size_t c = 0; c < cats; ++c) {
        FrodSlot slot;
        slot.layer = make_frod_layer(
            dec, c, l, cfg.scheme.s,
            derive_seed(cfg.seed, kTagSupport + l * cats + c));
        st->slots[l * cats + c] = std::move(slot);
      }
  } else if (cfg.scheme.name == Scheme::lora) {
    for (std::size_t slot = 0; slot < st->layers * cats; ++slot) {
      LoraSlot ls;
      ls.layer = lora_init(std::get<DenseSlot>(pre.slots[slot]).w,
                           cfg.scheme.r, derive_seed(cfg.seed, kTagAdapter + slot));
      st->slots.emplace_back(std::move(ls));
    }
  } else if (cfg.scheme.name == Scheme::pissa) {
    for (std::size_t slot = 0; slot < st->layers * cats; ++slot) {
      PissaInit init =
          pissa_init(std::get<DenseSlot>(pre.slots[slot]).w, cfg.scheme.r);
      LoraSlot ls;
      ls.layer.w0 = std::move(init.w_residual);
      ls.layer.b = std::move(init.b);
      ls.layer.a = std::move(init.a);
      st->slots.emplace_back(std::move(ls));
    }
  } else if (cfg.scheme.name == Scheme::vera) {
    VeraShared shared = vera_shared_basis(cfg.model.m, cfg.model.n,
                                          cfg.scheme.r,
                                          derive_seed(cfg.seed, kTagAdapter));
    for (std::size_t slot = 0; slot < st->layers * cats; ++slot) {
      VeraSlot vs;
      vs.layer = vera_init(std::get<DenseSlot>(pre.slots[slot]).w, shared);
      st->slots.emplace_back(std::move(vs));
    }
  }

  st->index_params();
  return wrap_state(std::move(st));
}

namespace {
AdapterModel wrap_state(std::unique_ptr<AdapterModel::State> st) {
  AdapterModel m;
  m.adopt(std::move(st));
  return m;
}
}  // namespace

void AdapterModel::adopt(std::unique_ptr<State> st) { state_ = std::move(st); }

TrainOutcome train_run_with_model(const TrainConfig& cfg) {
  cfg.validate();
  TrainOutcome out;
  out.model = AdapterModel::build(cfg);
  out.data = make_task(cfg.task, cfg.seed);
  auto [lr0, lr1] = scheme_lrs(cfg.scheme);
  LoopSpec spec;
  spec.lr_group0 = lr0;
  spec.lr_group1 = lr1;
  spec.epochs = cfg.optim.epochs;
  spec.shuffle_seed = cfg.seed;
  out.report = run_loop(out.model, out.data, cfg, spec);
  return out;
}

TrainReport train_run(const TrainConfig& cfg) {
  return train_run_with_model(cfg).report;
}

std::string TrainReport::report_json() const {
  nlohmann::ordered_json j;
  j["trainable"] = trainable_count;
  j["diverged"] = diverged;
  j["epochs"] = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    j["epochs"].push_back({{"epoch", e},
                           {"train_loss", epochs[e].train_loss},
                           {"train_acc", epochs[e].train_acc},
                           {"eval_loss", epochs[e].eval_loss},
                           {"eval_acc", epochs[e].eval_acc}});
  }
  j["step_lrs"] = nlohmann::ordered_json::array();
  for (const auto& lr : step_lrs) j["step_lrs"].push_back({lr[0], lr[1]});
  return j.dump(2);
}

std::string TrainReport::epochs_csv() const {
  std::string out = "epoch,loss,acc,lr_sigma,lr_S\n";
  const std::size_t rows = epochs.size();
  const std::size_t spe = rows > 1 ? step_lrs.size() / (rows - 1) : 0;
  for (std::size_t e = 0; e < rows; ++e) {
    double lr0 = 0.0, lr1 = 0.0;
    if (e > 0 && spe > 0) {
      std::size_t last = std::min(e * spe, step_lrs.size()) - 1;
      lr0 = step_lrs[last][0];
      lr1 = step_lrs[last][1];
    }
    out += std::to_string(e) + "," + csv_num(epochs[e].train_loss) + "," +
           csv_num(epochs[e].train_acc) + "," + csv_num(lr0) + "," +
           csv_num(lr1) + "\n";
  }
  return out;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string ablation_sweep(const SweepGrid& grid) {
  if (grid.s_values.empty() || grid.lr_s_values.empty() ||
      grid.lr_sigma_values.empty() || grid.seeds.empty())
    throw validation_error("sweep: empty grid axis");
  grid.base.validate();
  for (double lr_s : grid.lr_s_values)
    for (double lr_sigma : grid.lr_sigma_values)
      if (lr_s == 0.0 && lr_sigma == 0.0)
        throw validation_error("sweep: config with no trainable group");

  struct Cell {
    double s, lr_s, lr_sigma;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double s : grid.s_values)
    for (double lr_s : grid.lr_s_values)
      for (double lr_sigma : grid.lr_sigma_values)
        for (std::uint64_t seed : grid.seeds)
          cells.push_back({s, lr_s, lr_sigma, seed});

  struct Row {
    Cell cell;
    double acc1 = 0.0, acc4 = 0.0, acc10 = 0.0, final_loss = 0.0;
    bool has_proxy = false;
    double proxy = 0.0;
  };
  std::vector<Row> rows(cells.size());

  parallel_for(cells.size(), 0, [&](std::size_t i) {
    const Cell& c = cells[i];
    TrainConfig cfg = grid.base;
    cfg.seed = c.seed;
    cfg.scheme.name = Scheme::frod;
    cfg.scheme.s = c.s;
    cfg.scheme.lr_s = c.lr_s;
    cfg.scheme.lr_sigma = c.lr_sigma;
    TrainReport rep = train_run(cfg);
    Row& row = rows[i];
    row.cell = c;
    auto acc_at = [&](std::size_t epoch) {
      std::size_t e = std::min(epoch, rep.epochs.size() - 1);
      return rep.epochs[e].eval_acc;
    };
    row.acc1 = acc_at(1);
    row.acc4 = acc_at(4);
    row.acc10 = acc_at(10);
    row.final_loss = rep.epochs.back().train_loss;
    if (c.lr_sigma > 0.0) {
      row.has_proxy = true;
      row.proxy = tan_alpha_proxy(c.s, c.lr_s, c.lr_sigma, cfg.model.n);
    }
  });

  std::string csv =
      "s,lr_S,lr_sigma,seed,acc_epoch1,acc_epoch4,acc_epoch10,final_train_"
      "loss,tan_alpha,tan_alpha_in_band\n";
  for (const Row& row : rows) {
    csv += csv_num(row.cell.s) + "," + csv_num(row.cell.lr_s) + "," +
           csv_num(row.cell.lr_sigma) + "," + std::to_string(row.cell.seed) +
           "," + csv_num(row.acc1) + "," + csv_num(row.acc4) + "," +
           csv_num(row.acc10) + "," + csv_num(row.final_loss) + ",";
    if (row.has_proxy)
      csv += csv_num(row.proxy) + "," +
             (tan_alpha_in_sweet_band(row.proxy) ? "1" : "0");
    else
      csv += ",";
    csv += "\n";
  }

  // Median block: one row per configuration, medians across seeds.
  const std::size_t per_cfg = grid.seeds.size();
  for (std::size_t c = 0; c < rows.size(); c += per_cfg) {
    std::vector<double> a1, a4, a10, fl;
    for (std::size_t k = 0; k < per_cfg; ++k) {
      a1.push_back(rows[c + k].acc1);
      a4.push_back(rows[c + k].acc4);
      a10.push_back(rows[c + k].acc10);
      fl.push_back(rows[c + k].final_loss);
    }
    const Row& head_row = rows[c];
    csv += csv_num(head_row.cell.s) + "," + csv_num(head_row.cell.lr_s) + "," +
           csv_num(head_row.cell.lr_sigma) + ",median," +
           csv_num(median_of(a1)) + "," + csv_num(median_of(a4)) + "," +
           csv_num(median_of(a10)) + "," + csv_num(median_of(fl)) + ",";
    if (head_row.has_proxy)
      csv += csv_num(head_row.proxy) + "," +
             (tan_alpha_in_sweet_band(head_row.proxy) ? "1" : "0");
    else
      csv += ",";
    csv += "\n";
  }
  return csv;
}

}  // namespace frod
