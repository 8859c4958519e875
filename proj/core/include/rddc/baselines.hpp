// SPDX-License-Identifier: Apache-2.0
//
// Classical clusterers over vectorized sequences, plus the dense-head variant
// of the divergence clusterer that sees only fixed-length vectors.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rddc/data.hpp"
#include "rddc/nn.hpp"
#include "rddc/train.hpp"

namespace rddc {

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Matrix centroids;  // k×p
  std::vector<int> assignments;
  double inertia = 0.0;
  std::size_t iterations = 0;
  /// Inertia after every Lloyd update, one trace per restart.
  std::vector<std::vector<double>> inertia_traces;
};

/// k-means++ seeding, Lloyd iterations to an assignment fixpoint, best inertia
/// over restarts. An empty cluster takes the point farthest from its centroid.
KMeansResult kmeans(const Matrix& x, std::size_t k, const KMeansOptions& options = {});

/// Nearest centroid per row, ties to the lower index.
std::vector<int> assign_nearest(const Matrix& x, const Matrix& centroids);

/// Per-cluster means; empty clusters stay at zero.
Matrix cluster_means(const Matrix& x, const std::vector<int>& assignments, std::size_t k);

struct WardResult {
  std::vector<int> assignments;
  /// Ward cost (increase in within-cluster sum of squares) of each merge.
  std::vector<double> merge_heights;
};

/// Agglomerative Ward linkage with Lance-Williams updates, cut at k clusters.
/// Cluster ids follow the order of first appearance.
WardResult ward_hc(const Matrix& x, std::size_t k);

struct DdcVectorResult {
  DenseHeadModel model;
  std::vector<int> assignments;
  std::vector<RunRecord> records;
};

/// Trains fc1 -> softmax directly on the rows of x with the clustering loss
/// and the restart protocol; returns the selected model and its argmax clusters.
DdcVectorResult ddc_vector(const Matrix& x, std::size_t k, const TrainConfig& cfg, std::size_t fc1_units = 32);

/// Argmax clusters of new rows under a trained dense head.
std::vector<int> ddc_vector_predict(const DenseHeadModel& model, const Matrix& x);

}  // namespace rddc
