// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace rddc {

/// Ground-truth classes in [0, class_count) paired with predicted clusters in
/// [0, cluster_count).
class LabeledPartition {
 public:
  LabeledPartition(std::vector<int> true_labels, std::vector<int> pred_clusters, std::size_t class_count,
                   std::size_t cluster_count);
  /// Counts inferred as max label + 1 on each side.
  LabeledPartition(std::vector<int> true_labels, std::vector<int> pred_clusters);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t class_count() const noexcept { return classes_; }
  std::size_t cluster_count() const noexcept { return clusters_; }
  const std::vector<int>& true_labels() const noexcept { return labels_; }
  const std::vector<int>& pred_clusters() const noexcept { return preds_; }

 private:
  std::vector<int> labels_;
  std::vector<int> preds_;
  std::size_t classes_;
  std::size_t clusters_;
};

using CountMatrix = std::vector<std::vector<std::size_t>>;

/// class_count × cluster_count table of co-occurrences.
CountMatrix contingency(const LabeledPartition& p);

/// Best accuracy over bijective cluster-to-class maps. Requires
/// cluster_count == class_count and a nonempty partition.
double acc(const LabeledPartition& p);

/// 2 I(l, c) / (H(l) + H(c)) with natural logs; 1 when both are constant.
double nmi(const LabeledPartition& p);

/// Minimum-cost perfect assignment of a square cost matrix; result[row] = col.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost);

}  // namespace rddc
