// SPDX-License-Identifier: Apache-2.0
//
// Recurrent clustering network: masked two-layer bidirectional GRU, batch
// normalization, a dense feature layer and a softmax assignment head.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rddc/batch.hpp"
#include "rddc/tensor.hpp"

namespace rddc {

enum class Mode { train, eval };

/// Trainable tensor with deep-copy semantics, so that parameter structs and
/// models behave as values.
class Param : public Tensor {
 public:
  Param() = default;
  Param(Tensor t) : Tensor(std::move(t)) {}  // NOLINT(google-explicit-constructor)
  Param(const Param& other) : Tensor(other.defined() ? other.clone() : Tensor{}) {}
  Param(Param&&) noexcept = default;
  Param& operator=(const Param& other) {
    if (this != &other) Tensor::operator=(other.defined() ? other.clone() : Tensor{});
    return *this;
  }
  Param& operator=(Param&&) noexcept = default;
  ~Param() = default;
};

using Rng = std::mt19937_64;

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct GruLayerParams {
  std::size_t input_size = 0;
  std::size_t units = 0;
  Param w_z, w_r, w_n;  // input_size × units
  Param u_z, u_r, u_n;  // units × units
  Param b_z, b_r, b_n;  // units

  static GruLayerParams init(std::size_t input_size, std::size_t units, Rng& rng);
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

/// One GRU update:
///   z  = sigmoid(x W_z + h U_z + b_z)
///   r  = sigmoid(x W_r + h U_r + b_r)
///   n  = tanh(x W_n + (r * h) U_n + b_n)
///   h' = (1 - z) * n + z * h
Tensor gru_cell_step(const GruLayerParams& params, const Tensor& x_t, const Tensor& h_prev);

struct BiGruEncoder {
  std::size_t input_size = 0;
  std::size_t units = 0;
  // Index 0 reads the input sequence, index 1 reads the concatenated
  // layer-0 outputs of both directions.
  std::array<GruLayerParams, 2> forward;
  std::array<GruLayerParams, 2> backward;

  static BiGruEncoder init(std::size_t input_size, std::size_t units, Rng& rng);
  std::size_t output_size() const noexcept { return 2 * units; }
};

/// Last layer's final forward state (at t = length) concatenated with its final
/// backward state (after consuming x_1). Padding steps never reach the result.
Tensor encode_batch(const BiGruEncoder& encoder, const PaddedBatch& batch);

struct BatchNormParams {
  Param gamma, beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double eps = 1e-5;

  static BatchNormParams init(std::size_t dim);
  std::size_t dim() const noexcept { return running_mean.size(); }
};

/// Train mode normalizes with batch statistics (biased variance) and folds
/// them into the running estimates; requires n >= 2.
Tensor batch_norm(BatchNormParams& bn, const Tensor& y, Mode mode);
/// Eval mode only.
Tensor batch_norm(const BatchNormParams& bn, const Tensor& y);

enum class Activation { none, relu };

struct DenseParams {
  Param w;  // d_in × d_out
  Param b;  // d_out
  Activation activation = Activation::none;

  static DenseParams init(std::size_t d_in, std::size_t d_out, Activation activation, Rng& rng);
  std::size_t input_size() const { return w.shape()[0]; }
  std::size_t output_size() const { return w.shape()[1]; }
};

Tensor dense(const DenseParams& layer, const Tensor& x);

struct ForwardResult {
  Tensor h;      // n × fc1 units
  Tensor alpha;  // n × k, rows on the probability simplex
};

struct ModelConfig {
  std::size_t input_size = 1;
  std::size_t gru_units = 32;
  std::size_t fc1_units = 32;
  std::size_t clusters = 2;
};

class RddcModel {
 public:
  RddcModel() = default;
  static RddcModel init(const ModelConfig& config, std::uint64_t seed);

  ForwardResult forward(const PaddedBatch& batch, Mode mode);
  ForwardResult forward(const PaddedBatch& batch) const;

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  const ModelConfig& config() const noexcept { return config_; }

  BiGruEncoder encoder;
  BatchNormParams bn;
  DenseParams fc1;
  DenseParams out;

 private:
  void check(const PaddedBatch& batch) const;
  ModelConfig config_;
};

ForwardResult forward(RddcModel& model, const PaddedBatch& batch, Mode mode);

/// fc1 followed by the softmax head, applied directly to fixed-length vectors.
/// Vectors arrive as batches of single-step sequences (T_max == 1).
class DenseHeadModel {
 public:
  DenseHeadModel() = default;
  /// `gru_units` is ignored.
  static DenseHeadModel init(const ModelConfig& config, std::uint64_t seed);

  ForwardResult forward(const PaddedBatch& batch, Mode mode);
  ForwardResult forward(const PaddedBatch& batch) const;

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  const ModelConfig& config() const noexcept { return config_; }

  DenseParams fc1;
  DenseParams out;

 private:
  ModelConfig config_;
};

}  // namespace rddc
