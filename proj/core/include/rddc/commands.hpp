// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner behind the `rddc` tool. Every command is a function of its
// configuration and input files; outputs land in ExperimentConfig::out_dir.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rddc/data.hpp"
#include "rddc/loss.hpp"
#include "rddc/nn.hpp"
#include "rddc/train.hpp"

namespace rddc {

enum class BaselineMethod { kmeans, ward, ddc };

const char* to_string(BaselineMethod method);
BaselineMethod parse_baseline_method(const std::string& name);

struct ExperimentConfig {
  std::optional<std::filesystem::path> data;  // dataset file; otherwise `synth` is generated
  std::optional<SynthSpec> synth;
  std::size_t clusters = 0;  // 0: number of distinct labels
  std::size_t gru_units = 32;
  std::size_t fc1_units = 32;
  TrainConfig train;
  SplitSpec split;
  std::vector<BaselineMethod> baseline_methods{BaselineMethod::kmeans, BaselineMethod::ward, BaselineMethod::ddc};
  std::vector<Vectorization> vectorizations{Vectorization::zero_pad, Vectorization::crop, Vectorization::time_avg};
  std::size_t kmeans_restarts = 10;
  std::optional<std::filesystem::path> checkpoint;
  std::filesystem::path out_dir = "rddc-out";
  std::uint64_t seed = 0;
};

/// Parses a JSON configuration; absent keys keep their defaults and unknown
/// keys are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies the experiment seed to the split, training and synthesis seeds.
void apply_seed(ExperimentConfig& config, std::uint64_t seed);

/// Dataset file named by the config, or the synthesized one.
Dataset resolve_dataset(const ExperimentConfig& config);

/// Maps raw labels to dense class indices in sorted label order.
std::vector<int> dense_labels(const Dataset& ds, const std::vector<int>& classes);

struct SynthReport {
  std::filesystem::path dataset_path;
  std::size_t size = 0, dim = 0, min_length = 0, max_length = 0;
  std::vector<std::size_t> class_counts;
};

struct EvalMetrics {
  std::optional<double> acc;
  std::optional<double> nmi;
  double l1 = 0.0, l2 = 0.0, l3 = 0.0, total = 0.0;
};

struct TrainReport {
  EvalMetrics test;
  std::size_t selected_restart = 0;
  double selection_loss = 0.0;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  std::filesystem::path metrics_path, log_path, checkpoint_path;
};

struct BaselineRow {
  BaselineMethod method;
  Vectorization vectorization;
  double acc = 0.0;
  double nmi = 0.0;
  std::string warning;
};

struct BaselineReport {
  std::vector<BaselineRow> rows;
  std::string table;
  std::filesystem::path table_path, results_path;
};

struct EmbedReport {
  std::filesystem::path path;
  std::size_t rows = 0;
};

struct EvalReport {
  EvalMetrics metrics;
  std::filesystem::path path;
};

SynthReport cmd_synth(const ExperimentConfig& config);
TrainReport cmd_train(const ExperimentConfig& config);
BaselineReport cmd_baseline(const ExperimentConfig& config);
EmbedReport cmd_embed(const ExperimentConfig& config);
EvalReport cmd_eval(const ExperimentConfig& config);

/// Evaluates a model's clustering of `ds` against its labels (if any).
EvalMetrics evaluate(const RddcModel& model, const Dataset& ds, const std::vector<int>& classes,
                     const LossOptions& loss);

/// Sets library log verbosity from a level name (trace, debug, info, warn,
/// error, off).
void set_log_level(const std::string& level);

}  // namespace rddc
