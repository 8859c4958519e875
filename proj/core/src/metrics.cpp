// SPDX-License-Identifier: Apache-2.0
#include "rddc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rddc/errors.hpp"

namespace rddc {

namespace {

std::size_t inferred_count(const std::vector<int>& v) {
  int mx = -1;
  for (int x : v) mx = std::max(mx, x);
  return static_cast<std::size_t>(mx + 1);
}

double entropy(const std::vector<std::size_t>& counts, double n) {
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

LabeledPartition::LabeledPartition(std::vector<int> true_labels, std::vector<int> pred_clusters,
                                   std::size_t class_count, std::size_t cluster_count)
    : labels_(std::move(true_labels)),
      preds_(std::move(pred_clusters)),
      classes_(class_count),
      clusters_(cluster_count) {
  if (labels_.size() != preds_.size()) {
    throw ContractError("partition: " + std::to_string(labels_.size()) + " labels vs " +
                        std::to_string(preds_.size()) + " predictions");
  }
  for (int l : labels_) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes_) {
      throw ContractError("partition: label " + std::to_string(l) + " outside [0, " +
                          std::to_string(classes_) + ")");
    }
  }
  for (int c : preds_) {
    if (c < 0 || static_cast<std::size_t>(c) >= clusters_) {
      throw ContractError("partition: cluster " + std::to_string(c) + " outside [0, " +
                          std::to_string(clusters_) + ")");
    }
  }
}

LabeledPartition::LabeledPartition(std::vector<int> true_labels, std::vector<int> pred_clusters)
    : LabeledPartition(true_labels, pred_clusters, inferred_count(true_labels),
                       inferred_count(pred_clusters)) {}

CountMatrix contingency(const LabeledPartition& p) {
  CountMatrix table(p.class_count(), std::vector<std::size_t>(p.cluster_count(), 0));
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++table[static_cast<std::size_t>(p.true_labels()[i])][static_cast<std::size_t>(p.pred_clusters()[i])];
  }
  return table;
}

// Shortest augmenting path with row/column potentials, O(n^3).
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  for (const auto& row : cost) {
    if (row.size() != n) throw DimensionError("hungarian: cost matrix is not square");
  }
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based; column 0 is a virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      std::size_t i0 = match[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

double acc(const LabeledPartition& p) {
  if (p.size() == 0) throw ContractError("acc: empty partition");
  if (p.cluster_count() != p.class_count()) {
    throw ContractError("acc: " + std::to_string(p.cluster_count()) + " clusters vs " +
                        std::to_string(p.class_count()) + " classes; a bijective map needs equal counts");
  }
  CountMatrix table = contingency(p);
  const std::size_t k = p.cluster_count();
  const double n = static_cast<double>(p.size());
  // Rows are clusters, columns classes.
  std::vector<std::vector<double>> cost(k, std::vector<double>(k));
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t l = 0; l < k; ++l) cost[c][l] = n - static_cast<double>(table[l][c]);
  auto map = hungarian(cost);
  std::size_t hits = 0;
  for (std::size_t c = 0; c < k; ++c) hits += table[map[c]][c];
  return static_cast<double>(hits) / n;
}

double nmi(const LabeledPartition& p) {
  if (p.size() == 0) throw ContractError("nmi: empty partition");
  CountMatrix table = contingency(p);
  const double n = static_cast<double>(p.size());
  std::vector<std::size_t> row(p.class_count(), 0), col(p.cluster_count(), 0);
  for (std::size_t l = 0; l < table.size(); ++l)
    for (std::size_t c = 0; c < table[l].size(); ++c) {
      row[l] += table[l][c];
      col[c] += table[l][c];
    }
  double h_l = entropy(row, n), h_c = entropy(col, n);
  if (h_l + h_c == 0.0) return 1.0;
  double mi = 0.0;
  for (std::size_t l = 0; l < table.size(); ++l)
    for (std::size_t c = 0; c < table[l].size(); ++c) {
      if (table[l][c] == 0) continue;
      double joint = static_cast<double>(table[l][c]) / n;
      mi += joint * std::log(joint * n * n / (static_cast<double>(row[l]) * static_cast<double>(col[c])));
    }
  return std::clamp(2.0 * mi / (h_l + h_c), 0.0, 1.0);
}

}  // namespace rddc
