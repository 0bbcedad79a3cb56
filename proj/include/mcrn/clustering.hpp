#pragma once

#include "mcrn/common.hpp"

namespace mcrn {

constexpr int kNoiseLabel = -1;

struct ClusterLabeling {
  std::vector<int> assignment;  // per sample: cluster id or kNoiseLabel
  int n_clusters = 0;
};

// Density clustering under cosine distance (1 - dot on unit vectors).
// A point is core when its eps-neighborhood (self included) holds at least
// min_pts points. Points are scanned in ascending index order and expansion
// queues run in ascending index order, so the labeling is deterministic and
// border points join the first cluster that reaches them.
ClusterLabeling dbscan(const std::vector<FeatureVector>& features, double eps,
                       int min_pts);

// A labeled dataset view for one domain and one epoch. Pseudo labels are
// contiguous in [0, n_classes). true_ids are the generator's hidden
// identities and are touched only by evaluation code.
struct PseudoDataset {
  Domain domain = Domain::Target;
  std::vector<int> sample_index;  // position in the raw dataset
  std::vector<FeatureVector> features;
  std::vector<int> labels;
  std::vector<int> true_ids;
  int n_classes = 0;

  std::size_t size() const { return labels.size(); }
  // Sample positions (into this dataset) grouped per class, ascending.
  std::vector<std::vector<int>> members_by_class() const;
};

// Drops noise-labeled samples and re-numbers the surviving cluster ids to a
// contiguous range (ascending original id order). Throws DegenerateInput when
// every sample was noise.
PseudoDataset build_pseudo_dataset(const ClusterLabeling& labeling,
                                   const std::vector<FeatureVector>& features,
                                   const std::vector<int>& true_ids,
                                   Domain domain);

// Same packaging for a ground-truth labeling (no noise involved); labels may
// be any non-negative ids and are re-numbered contiguously.
PseudoDataset dataset_from_labels(const std::vector<int>& labels,
                                  const std::vector<FeatureVector>& features,
                                  const std::vector<int>& true_ids,
                                  Domain domain);

// Label-noise injection. Merges merge_pairs disjoint uniformly drawn class
// pairs into single classes, then splits split_classes uniformly drawn
// classes (of size >= 2) into two halves by order of appearance, then
// re-numbers labels contiguously. True ids are untouched.
PseudoDataset corrupt_clusters(const PseudoDataset& dataset, int merge_pairs,
                               int split_classes, Rng& rng);

}  // namespace mcrn
