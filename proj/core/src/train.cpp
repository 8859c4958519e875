// SPDX-License-Identifier: Apache-2.0
#include "rddc/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "rddc/errors.hpp"

namespace rddc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::size_t kInferenceChunk = 512;

}  // namespace

std::uint64_t epoch_seed(std::uint64_t restart_seed, std::size_t epoch) {
  return splitmix64(splitmix64(restart_seed) ^ static_cast<std::uint64_t>(epoch));
}

// Adam -------------------------------------------------------------------------

AdamState AdamState::like(const std::vector<Tensor>& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.numel(), 0.0);
    s.v.emplace_back(p.numel(), 0.0);
  }
  return s;
}

void adam_step(std::vector<Tensor>& params, const std::vector<std::span<const double>>& grads,
               AdamState& state, const AdamOptions& options) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ContractError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                        std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                        " moment buffers");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(options.beta1, t);
  const double correct2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].mutable_data();
    const auto& g = grads[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (g.size() != theta.size() || m.size() != theta.size()) {
      throw ContractError("adam_step: shape mismatch for parameter " + std::to_string(k));
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g[i] * g[i];
      double m_hat = m[i] / correct1;
      double v_hat = v[i] / correct2;
      theta[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamOptions& options) {
  std::vector<std::vector<double>> zeros;
  std::vector<std::span<const double>> grads;
  zeros.reserve(params.size());
  for (auto& p : params) {
    if (p.has_grad()) {
      grads.push_back(p.grad());
    } else {
      zeros.emplace_back(p.numel(), 0.0);
      grads.emplace_back(zeros.back());
    }
  }
  adam_step(params, grads, state, options);
  for (auto& p : params) p.zero_grad();
}

// Inference --------------------------------------------------------------------

std::vector<int> argmax_rows(const Tensor& alpha) {
  std::size_t n = alpha.rows(), k = alpha.cols();
  auto v = alpha.data();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (v[i * k + j] > v[i * k + best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

template <class Model>
ForwardResult infer(const Model& model, const Dataset& ds) {
  if (ds.empty()) throw ContractError("inference on an empty dataset");
  std::vector<Tensor> hs, alphas;
  for (const auto& batch : sequential_batches(ds, kInferenceChunk)) {
    ForwardResult r = model.forward(batch);
    hs.push_back(r.h);
    alphas.push_back(r.alpha);
  }
  if (hs.size() == 1) return {hs[0], alphas[0]};
  return {concat(hs, 0), concat(alphas, 0)};
}

template <class Model>
LossTerms evaluate_loss(const Model& model, const Dataset& ds, const LossOptions& options) {
  ForwardResult r = infer(model, ds);
  return total_loss(r.h, r.alpha, options);
}

template <class Model>
std::vector<int> predict(const Model& model, const Dataset& ds) {
  return argmax_rows(infer(model, ds).alpha);
}

// Training ---------------------------------------------------------------------

template <class Model>
TrainedRun<Model> train_once(Model model, const Dataset& train, const Dataset& selection,
                             const TrainConfig& cfg, std::uint64_t restart_seed, std::size_t restart) {
  if (train.size() < 2) throw ContractError("training needs at least 2 sequences");
  if (cfg.epochs == 0 || cfg.batch_size < 2) throw ContractError("epochs must be positive and batch_size >= 2");
  const std::size_t batch_size = std::min(cfg.batch_size, train.size());
  std::vector<Tensor> params = model.parameters();
  AdamState adam = AdamState::like(params);

  RunRecord record;
  record.restart = restart;
  record.seed = restart_seed;
  try {
    for (std::size_t epoch = 0; epoch < cfg.epochs && !record.failed; ++epoch) {
      EpochLoss acc{epoch, 0.0, 0.0, 0.0, 0.0};
      std::size_t seen = 0;
      for (const PaddedBatch& batch : make_batches(train, batch_size, epoch_seed(restart_seed, epoch))) {
        // Batch statistics and the bandwidth are undefined for one item.
        if (batch.size() < 2) continue;
        Graph graph;
        GradScope scope(graph);
        ForwardResult out = model.forward(batch, Mode::train);
        LossTerms terms = total_loss(out.h, out.alpha, cfg.loss);
        double total = terms.total.item();
        if (!std::isfinite(total)) {
          record.failed = true;
          record.diagnostic = "non-finite loss at epoch " + std::to_string(epoch);
          break;
        }
        graph.backward(terms.total);
        adam_step(params, adam, cfg.adam);
        double w = static_cast<double>(batch.size());
        acc.l1 += w * terms.l1;
        acc.l2 += w * terms.l2;
        acc.l3 += w * terms.l3;
        acc.total += w * total;
        seen += batch.size();
      }
      if (record.failed) break;
      double inv = 1.0 / static_cast<double>(seen);
      acc.l1 *= inv;
      acc.l2 *= inv;
      acc.l3 *= inv;
      acc.total *= inv;
      spdlog::debug("restart {} epoch {} loss {:.6f} (l1 {:.6f} l2 {:.6f} l3 {:.6f})", restart, epoch, acc.total,
                    acc.l1, acc.l2, acc.l3);
      record.epochs.push_back(acc);
    }
    if (!record.failed) {
      record.final_loss = evaluate_loss(model, selection, cfg.loss).total.item();
      if (!std::isfinite(record.final_loss)) {
        record.failed = true;
        record.diagnostic = "non-finite selection loss";
      }
    }
  } catch (const Error& e) {
    record.failed = true;
    record.diagnostic = e.what();
  }
  if (record.failed) spdlog::warn("restart {} aborted: {}", restart, record.diagnostic);
  return {std::move(model), std::move(record)};
}

std::size_t select_best(const std::vector<RunRecord>& records) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].failed) continue;
    if (!best || records[i].final_loss < records[*best].final_loss) best = i;
  }
  if (!best) throw Error("every restart failed");
  return *best;
}

template <class Model>
ExperimentResult<Model> run_experiment(const Dataset& train, const ModelConfig& model_config,
                                       const TrainConfig& cfg, const Dataset* validation) {
  if (cfg.restarts == 0) throw ContractError("restarts must be positive");
  const Dataset& selection =
      cfg.select_on == SelectOn::val && validation && validation->size() >= 2 ? *validation : train;
  if (cfg.select_on == SelectOn::val && &selection == &train) {
    spdlog::warn("validation set unavailable or too small; selecting on training loss");
  }

  std::vector<std::optional<TrainedRun<Model>>> runs(cfg.restarts);
  std::size_t jobs = cfg.jobs ? cfg.jobs : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  jobs = std::min(jobs, cfg.restarts);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.restarts; r = next++) {
      try {
        std::uint64_t seed = cfg.seed + r;
        runs[r].emplace(train_once(Model::init(model_config, seed), train, selection, cfg, seed, r));
        spdlog::info("restart {}/{} final loss {:.6f}{}", r + 1, cfg.restarts, runs[r]->record.final_loss,
                     runs[r]->record.failed ? " (failed)" : "");
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  ExperimentResult<Model> result;
  for (auto& run : runs) result.records.push_back(run->record);
  result.selected = select_best(result.records);
  result.records[result.selected].selected = true;
  result.best = std::move(runs[result.selected]->model);
  return result;
}

#define RDDC_INSTANTIATE(Model)                                                                      \
  template ForwardResult infer<Model>(const Model&, const Dataset&);                                 \
  template LossTerms evaluate_loss<Model>(const Model&, const Dataset&, const LossOptions&);         \
  template std::vector<int> predict<Model>(const Model&, const Dataset&);                            \
  template TrainedRun<Model> train_once<Model>(Model, const Dataset&, const Dataset&, const TrainConfig&, \
                                               std::uint64_t, std::size_t);                          \
  template ExperimentResult<Model> run_experiment<Model>(const Dataset&, const ModelConfig&,         \
                                                         const TrainConfig&, const Dataset*);

RDDC_INSTANTIATE(RddcModel)
RDDC_INSTANTIATE(DenseHeadModel)

#undef RDDC_INSTANTIATE

}  // namespace rddc
