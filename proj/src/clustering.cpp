#include "mcrn/clustering.hpp"

#include <algorithm>
#include <map>

#include "mcrn/numerics.hpp"

namespace mcrn {

namespace {
constexpr int kUnvisited = -2;
}

ClusterLabeling dbscan(const std::vector<FeatureVector>& features, double eps,
                       int min_pts) {
  if (eps < 0.0) throw std::invalid_argument("dbscan: eps must be >= 0");
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
  const int n = static_cast<int>(features.size());
  ClusterLabeling out;
  out.assignment.assign(n, kUnvisited);
  if (n == 0) return out;

  // Neighbor lists up front; n is desk-scale so the n^2 pass is fine.
  std::vector<std::vector<int>> neighbors(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (1.0 - cosine_sim(features[i], features[j]) <= eps) {
        neighbors[i].push_back(j);
      }
    }
  }

  int cluster = 0;
  for (int i = 0; i < n; ++i) {
    if (out.assignment[i] != kUnvisited) continue;
    if (static_cast<int>(neighbors[i].size()) < min_pts) {
      out.assignment[i] = kNoiseLabel;
      continue;
    }
    out.assignment[i] = cluster;
    std::vector<int> queue = neighbors[i];
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int q = queue[head];
      if (out.assignment[q] == kNoiseLabel) {
        out.assignment[q] = cluster;  // border point, reached first by us
      }
      if (out.assignment[q] != kUnvisited) continue;
      out.assignment[q] = cluster;
      if (static_cast<int>(neighbors[q].size()) >= min_pts) {
        queue.insert(queue.end(), neighbors[q].begin(), neighbors[q].end());
      }
    }
    ++cluster;
  }
  out.n_clusters = cluster;
  return out;
}

std::vector<std::vector<int>> PseudoDataset::members_by_class() const {
  std::vector<std::vector<int>> members(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    members[labels[i]].push_back(static_cast<int>(i));
  }
  return members;
}

namespace {

// Keeps samples whose label passes `keep`, re-numbering labels contiguously
// in ascending original-id order.
PseudoDataset pack_dataset(const std::vector<int>& labels,
                           const std::vector<FeatureVector>& features,
                           const std::vector<int>& true_ids, Domain domain,
                           bool drop_negative) {
  if (labels.size() != features.size() || labels.size() != true_ids.size()) {
    throw std::invalid_argument("pseudo dataset: length mismatch");
  }
  std::map<int, int> relabel;
  for (int l : labels) {
    if (l < 0) {
      if (!drop_negative) {
        throw std::invalid_argument("pseudo dataset: negative label");
      }
      continue;
    }
    relabel.emplace(l, 0);
  }
  int next = 0;
  for (auto& [old_id, new_id] : relabel) new_id = next++;

  PseudoDataset out;
  out.domain = domain;
  out.n_classes = next;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    out.sample_index.push_back(static_cast<int>(i));
    out.features.push_back(features[i]);
    out.labels.push_back(relabel.at(labels[i]));
    out.true_ids.push_back(true_ids[i]);
  }
  if (out.labels.empty()) {
    throw DegenerateInput("pseudo dataset: no usable samples (all noise)");
  }
  return out;
}

}  // namespace

PseudoDataset build_pseudo_dataset(const ClusterLabeling& labeling,
                                   const std::vector<FeatureVector>& features,
                                   const std::vector<int>& true_ids,
                                   Domain domain) {
  return pack_dataset(labeling.assignment, features, true_ids, domain, true);
}

PseudoDataset dataset_from_labels(const std::vector<int>& labels,
                                  const std::vector<FeatureVector>& features,
                                  const std::vector<int>& true_ids,
                                  Domain domain) {
  return pack_dataset(labels, features, true_ids, domain, false);
}

PseudoDataset corrupt_clusters(const PseudoDataset& dataset, int merge_pairs,
                               int split_classes, Rng& rng) {
  if (merge_pairs < 0 || split_classes < 0) {
    throw std::invalid_argument("corrupt_clusters: negative counts");
  }
  if (2 * merge_pairs > dataset.n_classes) {
    throw std::invalid_argument(
        "corrupt_clusters: not enough classes to merge");
  }

  std::vector<int> labels = dataset.labels;
  int n_classes = dataset.n_classes;

  if (merge_pairs > 0) {
    // Partial Fisher-Yates; the first 2*merge_pairs entries form the pairs.
    std::vector<int> order(n_classes);
    for (int i = 0; i < n_classes; ++i) order[i] = i;
    for (int i = 0; i < 2 * merge_pairs; ++i) {
      const int j = i + rng.uniform_int(n_classes - i);
      std::swap(order[i], order[j]);
    }
    std::vector<int> target(n_classes);
    for (int i = 0; i < n_classes; ++i) target[i] = i;
    for (int p = 0; p < merge_pairs; ++p) {
      const int a = order[2 * p];
      const int b = order[2 * p + 1];
      const int keep = std::min(a, b);
      target[a] = keep;
      target[b] = keep;
    }
    for (int& l : labels) l = target[l];
  }

  if (split_classes > 0) {
    std::vector<std::vector<int>> members;  // positions per surviving label
    members.resize(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      members[labels[i]].push_back(static_cast<int>(i));
    }
    std::vector<int> splittable;
    for (int c = 0; c < n_classes; ++c) {
      if (members[c].size() >= 2) splittable.push_back(c);
    }
    if (static_cast<int>(splittable.size()) < split_classes) {
      throw std::invalid_argument(
          "corrupt_clusters: not enough splittable classes");
    }
    for (int i = 0; i < split_classes; ++i) {
      const int j = i + rng.uniform_int(static_cast<int>(splittable.size()) - i);
      std::swap(splittable[i], splittable[j]);
    }
    for (int s = 0; s < split_classes; ++s) {
      const auto& m = members[splittable[s]];
      // First half (rounded up) keeps the label, the rest move to a new one.
      const std::size_t keep = (m.size() + 1) / 2;
      const int fresh = n_classes++;
      for (std::size_t i = keep; i < m.size(); ++i) labels[m[i]] = fresh;
    }
  }

  PseudoDataset out =
      pack_dataset(labels, dataset.features, dataset.true_ids, dataset.domain,
                   false);
  out.domain = dataset.domain;
  out.sample_index = dataset.sample_index;  // positions are unchanged
  return out;
}

}  // namespace mcrn
