// Copyright (c) 2026 the frodlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "frod/adapter.hpp"
#include "frod/matrix.hpp"

namespace frod {

enum class TaskKind { blobs, tiny_attention };
enum class Schedule { cosine, constant };

struct TaskSpec {
  TaskKind kind = TaskKind::blobs;
  std::size_t classes = 8;
  std::size_t input_dim = 32;  // token dimension for tiny-attention
  std::size_t samples = 4096;
};

struct ModelSpec {
  std::size_t layers = 4;
  std::size_t m = 32;
  std::size_t n = 32;
};

struct SchemeSpec {
  Scheme name = Scheme::frod;
  double s = 0.02;
  std::size_t r = 8;
  double lr_sigma = 1e-3;
  double lr_s = 1e-4;
  double lr_other = 1e-3;
};

struct OptimSpec {
  std::size_t epochs = 10;
  std::size_t batch = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double warmup_frac = 0.1;
  Schedule schedule = Schedule::cosine;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  TaskSpec task;
  ModelSpec model;
  SchemeSpec scheme;
  OptimSpec optim;
  double pi = 1e-3;  // decomposition ridge for the frod family

  void validate() const;
  static TrainConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

// Deterministic 80/20 split; rows are flattened samples (tiny-attention rows
// hold seq_len * input_dim features).
struct Dataset {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix eval_x;
  std::vector<int> eval_y;
};

Dataset make_task(const TaskSpec& spec, std::uint64_t seed);

// Exact two-class gaussian error rate for unit-variance blobs with the given
// mean separation; test oracle for separability.
double blobs_bayes_error(double mean_distance);

constexpr std::size_t kAttentionSeqLen = 8;

// Linear warmup to base_lr over ceil(warmup_frac * total) steps, then cosine
// decay to zero at step == total_steps.
double cosine_lr(std::size_t step, std::size_t total_steps, double warmup_frac,
                 double base_lr);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long step = 0;
};

// Decoupled weight decay;
// theta <- theta - lr * (mhat / (sqrt(vhat) + eps) + wd * theta).
void adamw_step(AdamState& state, std::span<double> params,
                std::span<const double> grads, double lr, double beta1,
                double beta2, double eps, double weight_decay);

struct EpochStats {
  double train_loss = 0.0;
  double train_acc = 0.0;
  double eval_loss = 0.0;
  double eval_acc = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;  // index 0 = before any update
  std::vector<std::array<double, 2>> step_lrs;  // (group 0, group 1) per step
  std::size_t trainable_count = 0;
  bool diverged = false;
  std::vector<std::vector<double>> checkpoints;  // theta per epoch row
  double wall_seconds = 0.0;  // stderr only, never serialized

  std::string report_json() const;
  std::string epochs_csv() const;  // epoch,loss,acc,lr_sigma,lr_S
};

// A pretrained backbone wrapped by one adapter scheme. Copyable (deep copy)
// so landscape threads can probe independent instances. Group 0 holds
// sigma-like (or the scheme's only) parameters, group 1 the off-diagonal S
// values.
class AdapterModel {
 public:
  static AdapterModel build(const TrainConfig& config);

  std::size_t trainable_count() const;
  std::vector<double> trainable() const;
  void set_trainable(std::span<const double> theta);
  // Per-scalar group ids aligned with trainable().
  const std::vector<int>& param_groups() const;
  // Per-layer block sizes of the flattened vector, for filter-normalized
  // landscape directions.
  const std::vector<std::size_t>& param_blocks() const;

  struct EvalStats {
    double loss = 0.0;
    double acc = 0.0;
  };
  EvalStats evaluate(const Matrix& x, const std::vector<int>& y) const;
  // Accumulates parameter gradients (mean over rows) into grad, aligned with
  // trainable().
  EvalStats batch_gradients(const Matrix& x, const std::vector<int>& y,
                            std::vector<double>& grad) const;

  Scheme scheme() const;
  std::vector<const FrodLayer*> frod_layers() const;

  AdapterModel();
  AdapterModel(const AdapterModel&);
  AdapterModel& operator=(const AdapterModel&);
  AdapterModel(AdapterModel&&) noexcept;
  AdapterModel& operator=(AdapterModel&&) noexcept;
  ~AdapterModel();

  struct State;
  void adopt(std::unique_ptr<State> st);  // internal builder hook

 private:
  std::unique_ptr<State> state_;
};

struct TrainOutcome {
  TrainReport report;
  AdapterModel model;
  Dataset data;
};

TrainReport train_run(const TrainConfig& config);
TrainOutcome train_run_with_model(const TrainConfig& config);

struct SweepGrid {
  std::vector<double> s_values;
  std::vector<double> lr_s_values;
  std::vector<double> lr_sigma_values;
  std::vector<std::uint64_t> seeds;
  TrainConfig base;
};

// One CSV row per (config, seed) with accuracy at epochs {1,4,10}, the
// tan-alpha proxy and its sweet-band flag, plus per-config medians appended.
// Configurations run in parallel up to FROD_THREADS; row order follows the
// grid, not completion.
std::string ablation_sweep(const SweepGrid& grid);

}  // namespace frod
