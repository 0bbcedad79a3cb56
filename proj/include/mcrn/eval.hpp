#pragma once

#include "mcrn/clustering.hpp"
#include "mcrn/common.hpp"

namespace mcrn {

struct RetrievalItem {
  FeatureVector feature;
  int identity = -1;
  int record_id = -1;  // >= 0 enables query/gallery self-exclusion
};

struct RetrievalProtocol {
  std::vector<RetrievalItem> queries;
  std::vector<RetrievalItem> gallery;
};

struct RetrievalResult {
  double mean_ap = 0.0;
  std::vector<double> cmc;  // cmc[r-1] = hit rate within rank r, r = 1..max
  int evaluated = 0;
  int skipped = 0;  // queries whose identity never appears in the gallery
};

// Ranked retrieval quality. Gallery is sorted per query by descending cosine
// similarity, ties broken by gallery index; a gallery item sharing the
// query's record_id is excluded. AP averages precision over the relevant
// positions; CMC counts first-hit ranks.
RetrievalResult map_cmc(const RetrievalProtocol& protocol, int max_rank);

// 1 - cosine between the normalized mean features of the two sets.
double domain_distance(const std::vector<FeatureVector>& source,
                       const std::vector<FeatureVector>& target);

// Fraction of samples whose cluster's majority identity matches their own.
double cluster_purity(const std::vector<int>& labels,
                      const std::vector<int>& true_ids);
double cluster_purity(const PseudoDataset& dataset);

}  // namespace mcrn
