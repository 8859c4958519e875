// SPDX-License-Identifier: Apache-2.0
#include "rddc/baselines.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "rddc/errors.hpp"

namespace rddc {

namespace {

double sq_distance(const double* a, const double* b, std::size_t p) {
  double s = 0.0;
  for (std::size_t c = 0; c < p; ++c) {
    double d = a[c] - b[c];
    s += d * d;
  }
  return s;
}

Matrix kmeans_plus_plus(const Matrix& x, std::size_t k, std::mt19937_64& rng) {
  Matrix centroids{k, x.cols, std::vector<double>(k * x.cols)};
  std::uniform_int_distribution<std::size_t> pick(0, x.rows - 1);
  std::size_t first = pick(rng);
  std::copy_n(x.row(first), x.cols, centroids.data.begin());
  std::vector<double> nearest(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) nearest[i] = sq_distance(x.row(i), centroids.row(0), x.cols);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    std::size_t chosen = 0;
    if (total > 0.0) {
      double target = unit(rng) * total, run = 0.0;
      chosen = x.rows - 1;
      for (std::size_t i = 0; i < x.rows; ++i) {
        run += nearest[i];
        if (run >= target && nearest[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    std::copy_n(x.row(chosen), x.cols, centroids.data.begin() + static_cast<std::ptrdiff_t>(c * x.cols));
    for (std::size_t i = 0; i < x.rows; ++i) {
      nearest[i] = std::min(nearest[i], sq_distance(x.row(i), centroids.row(c), x.cols));
    }
  }
  return centroids;
}

double inertia_of(const Matrix& x, const Matrix& centroids, const std::vector<int>& assignments) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    s += sq_distance(x.row(i), centroids.row(static_cast<std::size_t>(assignments[i])), x.cols);
  }
  return s;
}

struct LloydRun {
  Matrix centroids;
  std::vector<int> assignments;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> trace;
};

LloydRun lloyd(const Matrix& x, std::size_t k, std::size_t max_iterations, std::mt19937_64& rng) {
  LloydRun run;
  run.centroids = kmeans_plus_plus(x, k, rng);
  run.assignments.assign(x.rows, -1);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    std::vector<int> next = assign_nearest(x, run.centroids);
    if (next == run.assignments) break;
    run.assignments = std::move(next);
    run.iterations = iter + 1;

    run.centroids = cluster_means(x, run.assignments, k);
    std::vector<std::size_t> counts(k, 0);
    for (int a : run.assignments) ++counts[static_cast<std::size_t>(a)];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      // Re-seed an empty cluster at the point farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < x.rows; ++i) {
        auto own = static_cast<std::size_t>(run.assignments[i]);
        if (counts[own] < 2) continue;
        double d = sq_distance(x.row(i), run.centroids.row(own), x.cols);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far_d < 0.0) break;
      --counts[static_cast<std::size_t>(run.assignments[far])];
      ++counts[c];
      run.assignments[far] = static_cast<int>(c);
      std::copy_n(x.row(far), x.cols, run.centroids.data.begin() + static_cast<std::ptrdiff_t>(c * x.cols));
    }
    run.trace.push_back(inertia_of(x, run.centroids, run.assignments));
  }
  run.inertia = inertia_of(x, run.centroids, run.assignments);
  return run;
}

}  // namespace

std::vector<int> assign_nearest(const Matrix& x, const Matrix& centroids) {
  if (x.cols != centroids.cols) throw DimensionError("assign_nearest: width mismatch");
  std::vector<int> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows; ++c) {
      double d = sq_distance(x.row(i), centroids.row(c), x.cols);
      if (d < best) {
        best = d;
        out[i] = static_cast<int>(c);
      }
    }
  }
  return out;
}

Matrix cluster_means(const Matrix& x, const std::vector<int>& assignments, std::size_t k) {
  Matrix means{k, x.cols, std::vector<double>(k * x.cols, 0.0)};
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto c = static_cast<std::size_t>(assignments.at(i));
    ++counts[c];
    for (std::size_t j = 0; j < x.cols; ++j) means(c, j) += x(i, j);
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c])
      for (std::size_t j = 0; j < x.cols; ++j) means(c, j) /= static_cast<double>(counts[c]);
  return means;
}

KMeansResult kmeans(const Matrix& x, std::size_t k, const KMeansOptions& options) {
  if (k < 1) throw ContractError("kmeans: k must be at least 1");
  if (x.rows < k) {
    throw ContractError("kmeans: " + std::to_string(x.rows) + " points cannot form " + std::to_string(k) +
                        " clusters");
  }
  if (options.restarts == 0) throw ContractError("kmeans: restarts must be positive");
  std::mt19937_64 rng(options.seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < options.restarts; ++r) {
    LloydRun run = lloyd(x, k, options.max_iterations, rng);
    best.inertia_traces.push_back(run.trace);
    if (run.inertia < best.inertia) {
      best.centroids = std::move(run.centroids);
      best.assignments = std::move(run.assignments);
      best.inertia = run.inertia;
      best.iterations = run.iterations;
    }
  }
  return best;
}

WardResult ward_hc(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows;
  if (k < 1 || n < k) {
    throw ContractError("ward_hc: " + std::to_string(n) + " points cannot form " + std::to_string(k) + " clusters");
  }
  // dist holds the Ward merge cost n_i n_j / (n_i + n_j) * ||c_i - c_j||^2.
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i * n + j] = dist[j * n + i] = 0.5 * sq_distance(x.row(i), x.row(j), x.cols);
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> alive(n, true);
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});

  WardResult result;
  for (std::size_t clusters = n; clusters > k; --clusters) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (alive[j] && dist[i * n + j] < best) {
          best = dist[i * n + j];
          bi = i;
          bj = j;
        }
      }
    }
    result.merge_heights.push_back(best);
    const double ni = static_cast<double>(size[bi]), nj = static_cast<double>(size[bj]);
    for (std::size_t m = 0; m < n; ++m) {
      if (!alive[m] || m == bi || m == bj) continue;
      const double nm = static_cast<double>(size[m]);
      double updated = ((ni + nm) * dist[bi * n + m] + (nj + nm) * dist[bj * n + m] - nm * best) / (ni + nj + nm);
      dist[bi * n + m] = dist[m * n + bi] = updated;
    }
    size[bi] += size[bj];
    alive[bj] = false;
    parent[bj] = bi;
  }

  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i];
    return i;
  };
  std::vector<int> label_of(n, -1);
  int next = 0;
  result.assignments.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = root(i);
    if (label_of[r] < 0) label_of[r] = next++;
    result.assignments[i] = label_of[r];
  }
  return result;
}

DdcVectorResult ddc_vector(const Matrix& x, std::size_t k, const TrainConfig& cfg, std::size_t fc1_units) {
  Dataset ds = from_vectors(x);
  ModelConfig mc;
  mc.input_size = x.cols;
  mc.fc1_units = fc1_units;
  mc.clusters = k;
  auto experiment = run_experiment<DenseHeadModel>(ds, mc, cfg);
  DdcVectorResult out;
  out.assignments = predict(experiment.best, ds);
  out.model = std::move(experiment.best);
  out.records = std::move(experiment.records);
  return out;
}

std::vector<int> ddc_vector_predict(const DenseHeadModel& model, const Matrix& x) {
  return predict(model, from_vectors(x));
}

}  // namespace rddc
