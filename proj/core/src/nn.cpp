// SPDX-License-Identifier: Apache-2.0
#include "rddc/nn.hpp"

#include <cmath>

#include "rddc/errors.hpp"

namespace rddc {

namespace {

Tensor add_bias(const Tensor& x, const Tensor& b) { return x + broadcast_rows(b, x.shape()[0]); }

// Recurrent part of one GRU step; input projections (bias included) are
// supplied by the caller so they can be computed for all timesteps at once.
Tensor gru_recurrence(const GruLayerParams& p, const Tensor& xz, const Tensor& xr, const Tensor& xn,
                      const Tensor& h) {
  Tensor z = sigmoid(xz + matmul(h, p.u_z));
  Tensor r = sigmoid(xr + matmul(h, p.u_r));
  Tensor n = tanh(xn + matmul(r * h, p.u_n));
  return (1.0 - z) * n + z * h;
}

// Runs one direction over a time-major stack (row t*n + i is sequence i at
// step t). Rows whose sequence has ended keep their previous state.
struct DirectionResult {
  Tensor final_state;
  std::vector<Tensor> states;  // one n×u tensor per step, when requested
};

DirectionResult run_direction(const GruLayerParams& p, const Tensor& stacked, std::size_t n,
                              std::size_t steps, const std::vector<std::size_t>& lengths,
                              bool keep_states) {
  Tensor xz = add_bias(matmul(stacked, p.w_z), p.b_z);
  Tensor xr = add_bias(matmul(stacked, p.w_r), p.b_r);
  Tensor xn = add_bias(matmul(stacked, p.w_n), p.b_n);
  DirectionResult result;
  Tensor h = Tensor::zeros({n, p.units});
  std::vector<bool> active(n);
  for (std::size_t t = 0; t < steps; ++t) {
    std::size_t live = 0;
    for (std::size_t i = 0; i < n; ++i) live += (active[i] = t < lengths[i]);
    if (live > 0) {
      Tensor next = gru_recurrence(p, slice_rows(xz, t * n, n), slice_rows(xr, t * n, n),
                                   slice_rows(xn, t * n, n), h);
      h = live == n ? next : select_rows(active, next, h);
    }
    if (keep_states) result.states.push_back(h);
  }
  result.final_state = h;
  return result;
}

void check_step_shapes(const GruLayerParams& p, const Tensor& x, const Tensor& h) {
  if (x.rank() != 2 || h.rank() != 2 || x.shape()[1] != p.input_size || h.shape()[1] != p.units ||
      x.shape()[0] != h.shape()[0]) {
    throw DimensionError("gru_cell_step: input " + x.shape().str() + " and state " + h.shape().str() +
                         " do not fit a layer with input size " + std::to_string(p.input_size) +
                         " and " + std::to_string(p.units) + " units");
  }
}

}  // namespace

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(fan_in * fan_out);
  for (double& v : w) v = dist(rng);
  return Tensor({fan_in, fan_out}, std::move(w), true);
}

// GRU --------------------------------------------------------------------------

GruLayerParams GruLayerParams::init(std::size_t input_size, std::size_t units, Rng& rng) {
  if (input_size == 0 || units == 0) throw ContractError("GRU layer sizes must be positive");
  GruLayerParams p;
  p.input_size = input_size;
  p.units = units;
  p.w_z = glorot_uniform(input_size, units, rng);
  p.w_r = glorot_uniform(input_size, units, rng);
  p.w_n = glorot_uniform(input_size, units, rng);
  p.u_z = glorot_uniform(units, units, rng);
  p.u_r = glorot_uniform(units, units, rng);
  p.u_n = glorot_uniform(units, units, rng);
  p.b_z = Tensor::zeros({units}, true);
  p.b_r = Tensor::zeros({units}, true);
  p.b_n = Tensor::zeros({units}, true);
  return p;
}

std::vector<std::pair<std::string, Tensor>> GruLayerParams::named_parameters() const {
  return {{"w_z", w_z}, {"w_r", w_r}, {"w_n", w_n}, {"u_z", u_z}, {"u_r", u_r},
          {"u_n", u_n}, {"b_z", b_z}, {"b_r", b_r}, {"b_n", b_n}};
}

Tensor gru_cell_step(const GruLayerParams& p, const Tensor& x_t, const Tensor& h_prev) {
  check_step_shapes(p, x_t, h_prev);
  return gru_recurrence(p, add_bias(matmul(x_t, p.w_z), p.b_z), add_bias(matmul(x_t, p.w_r), p.b_r),
                        add_bias(matmul(x_t, p.w_n), p.b_n), h_prev);
}

BiGruEncoder BiGruEncoder::init(std::size_t input_size, std::size_t units, Rng& rng) {
  BiGruEncoder e;
  e.input_size = input_size;
  e.units = units;
  e.forward[0] = GruLayerParams::init(input_size, units, rng);
  e.backward[0] = GruLayerParams::init(input_size, units, rng);
  e.forward[1] = GruLayerParams::init(2 * units, units, rng);
  e.backward[1] = GruLayerParams::init(2 * units, units, rng);
  return e;
}

Tensor encode_batch(const BiGruEncoder& encoder, const PaddedBatch& batch) {
  if (batch.dim() != encoder.input_size) {
    throw DimensionError("encode_batch: batch has d=" + std::to_string(batch.dim()) +
                         ", encoder expects " + std::to_string(encoder.input_size));
  }
  std::size_t n = batch.size(), steps = batch.max_length(), d = batch.dim();
  const auto& lengths = batch.lengths();

  // n×T×d to time-major (T·n)×d.
  std::vector<double> stacked(steps * n * d);
  auto src = batch.values().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < steps; ++t)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((i * steps + t) * d), d,
                  stacked.begin() + static_cast<std::ptrdiff_t>((t * n + i) * d));
  Tensor x({steps * n, d}, std::move(stacked));

  // Row s*n+i of a reversed stack holds step L_i-1-s of sequence i. The map is
  // its own inverse on valid rows, so it also re-aligns reversed outputs.
  std::vector<long> reverse(steps * n, -1);
  for (std::size_t s = 0; s < steps; ++s)
    for (std::size_t i = 0; i < n; ++i)
      if (s < lengths[i]) reverse[s * n + i] = static_cast<long>((lengths[i] - 1 - s) * n + i);

  auto fwd0 = run_direction(encoder.forward[0], x, n, steps, lengths, true);
  auto bwd0 = run_direction(encoder.backward[0], gather_rows(x, reverse), n, steps, lengths, true);
  Tensor layer1_in = concat({concat(fwd0.states, 0), gather_rows(concat(bwd0.states, 0), reverse)}, 1);

  auto fwd1 = run_direction(encoder.forward[1], layer1_in, n, steps, lengths, false);
  auto bwd1 = run_direction(encoder.backward[1], gather_rows(layer1_in, reverse), n, steps, lengths, false);
  return concat({fwd1.final_state, bwd1.final_state}, 1);
}

// Batch normalization ----------------------------------------------------------

BatchNormParams BatchNormParams::init(std::size_t dim) {
  BatchNormParams bn;
  bn.gamma = Tensor::full({dim}, 1.0, true);
  bn.beta = Tensor::zeros({dim}, true);
  bn.running_mean.assign(dim, 0.0);
  bn.running_var.assign(dim, 1.0);
  return bn;
}

Tensor batch_norm(BatchNormParams& bn, const Tensor& y, Mode mode) {
  if (mode == Mode::eval) return batch_norm(static_cast<const BatchNormParams&>(bn), y);
  if (y.rank() != 2 || y.shape()[1] != bn.dim()) {
    throw DimensionError("batch_norm: input " + y.shape().str() + " for " + std::to_string(bn.dim()) +
                         " features");
  }
  std::size_t n = y.shape()[0];
  if (n < 2) throw ContractError("batch_norm: train mode needs at least 2 rows, got " + std::to_string(n));
  Tensor mu = mean(y, 0);
  Tensor centered = y - broadcast_rows(mu, n);
  Tensor var = mean(square(centered), 0);
  Tensor inv_std = 1.0 / sqrt(var + bn.eps);
  Tensor out = centered * broadcast_rows(inv_std * bn.gamma, n) + broadcast_rows(bn.beta, n);

  auto mu_v = mu.data();
  auto var_v = var.data();
  for (std::size_t j = 0; j < bn.dim(); ++j) {
    bn.running_mean[j] = bn.momentum * bn.running_mean[j] + (1.0 - bn.momentum) * mu_v[j];
    bn.running_var[j] = bn.momentum * bn.running_var[j] + (1.0 - bn.momentum) * var_v[j];
  }
  return out;
}

Tensor batch_norm(const BatchNormParams& bn, const Tensor& y) {
  if (y.rank() != 2 || y.shape()[1] != bn.dim()) {
    throw DimensionError("batch_norm: input " + y.shape().str() + " for " + std::to_string(bn.dim()) +
                         " features");
  }
  std::size_t dim = bn.dim();
  std::vector<double> shift(dim), scale(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    shift[j] = bn.running_mean[j];
    scale[j] = 1.0 / std::sqrt(bn.running_var[j] + bn.eps);
  }
  std::size_t n = y.shape()[0];
  Tensor centered = y - broadcast_rows(Tensor::from_vector(std::move(shift)), n);
  Tensor factor = Tensor::from_vector(std::move(scale)) * bn.gamma;
  return centered * broadcast_rows(factor, n) + broadcast_rows(bn.beta, n);
}

// Dense ------------------------------------------------------------------------

DenseParams DenseParams::init(std::size_t d_in, std::size_t d_out, Activation activation, Rng& rng) {
  if (d_in == 0 || d_out == 0) throw ContractError("dense layer sizes must be positive");
  DenseParams p;
  p.w = glorot_uniform(d_in, d_out, rng);
  p.b = Tensor::zeros({d_out}, true);
  p.activation = activation;
  return p;
}

Tensor dense(const DenseParams& layer, const Tensor& x) {
  Tensor y = add_bias(matmul(x, layer.w), layer.b);
  return layer.activation == Activation::relu ? relu(y) : y;
}

// Models -----------------------------------------------------------------------

RddcModel RddcModel::init(const ModelConfig& config, std::uint64_t seed) {
  if (config.clusters < 2) throw ContractError("model needs at least 2 clusters");
  Rng rng(seed);
  RddcModel m;
  m.config_ = config;
  m.encoder = BiGruEncoder::init(config.input_size, config.gru_units, rng);
  m.bn = BatchNormParams::init(m.encoder.output_size());
  m.fc1 = DenseParams::init(m.encoder.output_size(), config.fc1_units, Activation::relu, rng);
  m.out = DenseParams::init(config.fc1_units, config.clusters, Activation::none, rng);
  return m;
}

void RddcModel::check(const PaddedBatch& batch) const {
  if (batch.size() == 0) throw ContractError("forward on an empty batch");
  if (batch.dim() != config_.input_size) {
    throw DimensionError("model expects d=" + std::to_string(config_.input_size) + ", batch has d=" +
                         std::to_string(batch.dim()));
  }
}

ForwardResult RddcModel::forward(const PaddedBatch& batch, Mode mode) {
  check(batch);
  Tensor y = batch_norm(bn, encode_batch(encoder, batch), mode);
  Tensor h = dense(fc1, y);
  return {h, softmax_rows(dense(out, h))};
}

ForwardResult RddcModel::forward(const PaddedBatch& batch) const {
  check(batch);
  Tensor y = batch_norm(bn, encode_batch(encoder, batch));
  Tensor h = dense(fc1, y);
  return {h, softmax_rows(dense(out, h))};
}

std::vector<std::pair<std::string, Tensor>> RddcModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> all;
  auto add_layer = [&](const std::string& prefix, const GruLayerParams& p) {
    for (auto& [name, t] : p.named_parameters()) all.emplace_back(prefix + name, t);
  };
  for (std::size_t l = 0; l < 2; ++l) {
    add_layer("encoder.forward" + std::to_string(l) + ".", encoder.forward[l]);
    add_layer("encoder.backward" + std::to_string(l) + ".", encoder.backward[l]);
  }
  all.emplace_back("bn.gamma", bn.gamma);
  all.emplace_back("bn.beta", bn.beta);
  all.emplace_back("fc1.w", fc1.w);
  all.emplace_back("fc1.b", fc1.b);
  all.emplace_back("out.w", out.w);
  all.emplace_back("out.b", out.b);
  return all;
}

std::vector<Tensor> RddcModel::parameters() const {
  std::vector<Tensor> ps;
  for (auto& [name, t] : named_parameters()) ps.push_back(t);
  return ps;
}

ForwardResult forward(RddcModel& model, const PaddedBatch& batch, Mode mode) {
  return model.forward(batch, mode);
}

DenseHeadModel DenseHeadModel::init(const ModelConfig& config, std::uint64_t seed) {
  if (config.clusters < 2) throw ContractError("model needs at least 2 clusters");
  Rng rng(seed);
  DenseHeadModel m;
  m.config_ = config;
  m.fc1 = DenseParams::init(config.input_size, config.fc1_units, Activation::relu, rng);
  m.out = DenseParams::init(config.fc1_units, config.clusters, Activation::none, rng);
  return m;
}

ForwardResult DenseHeadModel::forward(const PaddedBatch& batch, Mode) {
  return static_cast<const DenseHeadModel&>(*this).forward(batch);
}

ForwardResult DenseHeadModel::forward(const PaddedBatch& batch) const {
  if (batch.max_length() != 1) {
    throw ContractError("dense head expects single-step inputs, got T_max=" +
                        std::to_string(batch.max_length()));
  }
  if (batch.dim() != config_.input_size) {
    throw DimensionError("dense head expects p=" + std::to_string(config_.input_size) + ", got " +
                         std::to_string(batch.dim()));
  }
  Tensor x = reshape(batch.values(), {batch.size(), batch.dim()});
  Tensor h = dense(fc1, x);
  return {h, softmax_rows(dense(out, h))};
}

std::vector<std::pair<std::string, Tensor>> DenseHeadModel::named_parameters() const {
  return {{"fc1.w", fc1.w}, {"fc1.b", fc1.b}, {"out.w", out.w}, {"out.b", out.b}};
}

std::vector<Tensor> DenseHeadModel::parameters() const {
  return {fc1.w, fc1.b, out.w, out.b};
}

}  // namespace rddc
