// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rddc/data.hpp"
#include "rddc/loss.hpp"
#include "rddc/nn.hpp"

namespace rddc {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

enum class SelectOn { train, val };

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t batch_size = 200;  // clamped to the training-set size
  std::size_t restarts = 20;
  AdamOptions adam;
  LossOptions loss;
  std::uint64_t seed = 0;
  /// Worker threads for restarts; 0 picks min(restarts, hardware threads).
  std::size_t jobs = 0;
  SelectOn select_on = SelectOn::train;
};

/// Per-parameter first and second moments.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  static AdamState like(const std::vector<Tensor>& params);
};

/// One bias-corrected Adam update, in place.
void adam_step(std::vector<Tensor>& params, const std::vector<std::span<const double>>& grads,
               AdamState& state, const AdamOptions& options);
/// Reads each parameter's gradient (zero when it has none) and clears it.
void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamOptions& options);

struct EpochLoss {
  std::size_t epoch = 0;
  double l1 = 0.0, l2 = 0.0, l3 = 0.0, total = 0.0;
};

struct RunRecord {
  std::size_t restart = 0;
  std::uint64_t seed = 0;
  /// Selection loss: full selection set, eval mode, after the last epoch.
  double final_loss = 0.0;
  std::vector<EpochLoss> epochs;  // size-weighted means over each epoch's batches
  bool selected = false;
  bool failed = false;
  std::string diagnostic;
};

template <class Model>
struct TrainedRun {
  Model model;
  RunRecord record;
};

template <class Model>
struct ExperimentResult {
  Model best;
  std::vector<RunRecord> records;
  std::size_t selected = 0;
};

/// Loss terms of the whole dataset in eval mode, without a tape.
template <class Model>
LossTerms evaluate_loss(const Model& model, const Dataset& ds, const LossOptions& options);

/// Hidden features and assignments for every sequence, in dataset order.
template <class Model>
ForwardResult infer(const Model& model, const Dataset& ds);

/// Trains `model` in place for cfg.epochs; a non-finite loss marks the record
/// failed instead of throwing. The selection loss is computed on `selection`.
template <class Model>
TrainedRun<Model> train_once(Model model, const Dataset& train, const Dataset& selection,
                             const TrainConfig& cfg, std::uint64_t restart_seed, std::size_t restart = 0);

/// Restart r initializes from seed cfg.seed + r. Selects the lowest final loss,
/// ties going to the lower index. Throws Error when every restart fails.
template <class Model>
ExperimentResult<Model> run_experiment(const Dataset& train, const ModelConfig& model_config,
                                       const TrainConfig& cfg, const Dataset* validation = nullptr);

/// Index of the non-failed record with the lowest final_loss.
std::size_t select_best(const std::vector<RunRecord>& records);

/// Row-wise argmax, ties to the lower index.
std::vector<int> argmax_rows(const Tensor& alpha);

template <class Model>
std::vector<int> predict(const Model& model, const Dataset& ds);

/// Batch shuffling seed for one epoch of one restart.
std::uint64_t epoch_seed(std::uint64_t restart_seed, std::size_t epoch);

}  // namespace rddc
