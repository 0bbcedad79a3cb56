#include "mcrn/eval.hpp"

#include <algorithm>
#include <iostream>
#include <map>

#include "mcrn/numerics.hpp"

namespace mcrn {

RetrievalResult map_cmc(const RetrievalProtocol& protocol, int max_rank) {
  if (protocol.queries.empty() || protocol.gallery.empty()) {
    throw std::invalid_argument("map_cmc: empty query or gallery set");
  }
  if (max_rank < 1) throw std::invalid_argument("map_cmc: max_rank must be >= 1");

  RetrievalResult result;
  result.cmc.assign(max_rank, 0.0);
  std::vector<int> first_hit_counts(max_rank, 0);
  double ap_sum = 0.0;

  for (const auto& q : protocol.queries) {
    // (negated similarity, gallery index): ascending sort gives descending
    // similarity with index as the tie-breaker.
    std::vector<std::pair<double, int>> order;
    order.reserve(protocol.gallery.size());
    int relevant = 0;
    for (std::size_t g = 0; g < protocol.gallery.size(); ++g) {
      const auto& item = protocol.gallery[g];
      if (q.record_id >= 0 && item.record_id == q.record_id) continue;
      order.emplace_back(-cosine_sim(q.feature, item.feature),
                         static_cast<int>(g));
      if (item.identity == q.identity) ++relevant;
    }
    if (relevant == 0) {
      ++result.skipped;
      std::cerr << "map_cmc: query identity " << q.identity
                << " never appears in the gallery, skipping it\n";
      continue;
    }
    std::sort(order.begin(), order.end());

    int hits = 0;
    double ap = 0.0;
    int first_hit = -1;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      if (protocol.gallery[order[rank].second].identity != q.identity) continue;
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
      if (first_hit < 0) first_hit = static_cast<int>(rank + 1);
    }
    ap_sum += ap / static_cast<double>(relevant);
    if (first_hit >= 1 && first_hit <= max_rank) {
      ++first_hit_counts[first_hit - 1];
    }
    ++result.evaluated;
  }

  if (result.evaluated == 0) {
    throw DegenerateInput("map_cmc: every query was skipped");
  }
  result.mean_ap = ap_sum / static_cast<double>(result.evaluated);
  int cumulative = 0;
  for (int r = 0; r < max_rank; ++r) {
    cumulative += first_hit_counts[r];
    result.cmc[r] =
        static_cast<double>(cumulative) / static_cast<double>(result.evaluated);
  }
  return result;
}

double domain_distance(const std::vector<FeatureVector>& source,
                       const std::vector<FeatureVector>& target) {
  return 1.0 - cosine_sim(mean_vector(source), mean_vector(target));
}

double cluster_purity(const std::vector<int>& labels,
                      const std::vector<int>& true_ids) {
  if (labels.empty() || labels.size() != true_ids.size()) {
    throw std::invalid_argument("cluster_purity: bad inputs");
  }
  std::map<int, std::map<int, int>> counts;  // cluster -> identity -> count
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      throw std::invalid_argument("cluster_purity: negative label");
    }
    ++counts[labels[i]][true_ids[i]];
  }
  long majority_total = 0;
  for (const auto& [cluster, ids] : counts) {
    int best = 0;
    for (const auto& [id, c] : ids) best = std::max(best, c);
    majority_total += best;
  }
  return static_cast<double>(majority_total) /
         static_cast<double>(labels.size());
}

double cluster_purity(const PseudoDataset& dataset) {
  return cluster_purity(dataset.labels, dataset.true_ids);
}

}  // namespace mcrn
