#pragma once

#include "mcrn/clustering.hpp"
#include "mcrn/common.hpp"

namespace mcrn {

// How the positive centroid is picked among a class's k slots, by rank of
// ascending cosine similarity to the query (ties broken by slot index):
// Least = rank 1, Moderate = rank ceil(k/2), Most = rank k.
enum class PositiveStrategy { Moderate, Most, Least };

// Negative representation per class: the normalized mean of its k centroids,
// or all k centroids individually.
enum class NegativeStrategy { Mean, All };

// Which classes contribute negatives: only the query's domain, or both.
enum class NegativeScope { SameDomain, BothDomains };

struct PositiveSelection {
  FeatureVector feature;
  int slot = -1;
};

struct NegativeSample {
  FeatureVector feature;
  Domain domain = Domain::Source;
  int class_id = -1;
  int slot = -1;  // -1 marks a class-mean representative
  std::string id() const;
};

// Class-structured centroid memory: k unit-norm rows per class for every
// class of both domains. Rows are stored at float32 precision (see
// quantize_f32) so checkpoints round-trip exactly. The bank is rebuilt from
// scratch at every epoch; nothing here survives re-clustering.
class CentroidBank {
 public:
  // Every slot of a class starts as the class's normalized mean feature.
  CentroidBank(const PseudoDataset& source, const PseudoDataset& target,
               int k);

  int k() const { return k_; }
  int feature_dim() const { return dim_; }
  int n_classes(Domain d) const {
    return d == Domain::Source ? n_source_ : n_target_;
  }
  int rows() const { return static_cast<int>(rows_.size()); }

  const FeatureVector& centroid(Domain d, int cls, int slot) const;
  std::vector<FeatureVector> class_centroids(Domain d, int cls) const;
  // Normalized mean of the class's k centroids.
  FeatureVector mean_centroid(Domain d, int cls) const;

  // Matches the k queries to the class's k centroids (score-maximal pairing),
  // then moves each matched centroid to momentum * centroid +
  // (1 - momentum) * query, re-normalized. Returns the pairing used.
  std::vector<int> update_class(Domain d, int cls,
                                const std::vector<FeatureVector>& queries,
                                double momentum);

  PositiveSelection select_positive(const FeatureVector& query, Domain d,
                                    int cls, PositiveStrategy strategy) const;

  // Deterministic order: source classes ascending, then target classes
  // ascending, skipping the positive class; Mean yields one sample per class,
  // All yields k (slot ascending).
  std::vector<NegativeSample> select_negatives(Domain query_domain,
                                               int positive_cls,
                                               NegativeStrategy strategy,
                                               NegativeScope scope) const;

  // Flat row access for checkpointing. Layout: source classes ascending, then
  // target classes ascending, k slots each.
  const std::vector<FeatureVector>& raw_rows() const { return rows_; }
  static CentroidBank from_rows(int k, int n_source, int n_target, int dim,
                                std::vector<FeatureVector> rows);

 private:
  CentroidBank() = default;
  int row_index(Domain d, int cls, int slot) const;
  void check_class(Domain d, int cls) const;

  int k_ = 0;
  int n_source_ = 0;
  int n_target_ = 0;
  int dim_ = 0;
  std::vector<FeatureVector> rows_;
};

}  // namespace mcrn
