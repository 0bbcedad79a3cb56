#include "mcrn/memory.hpp"

#include <algorithm>
#include <numeric>

#include "mcrn/assignment.hpp"
#include "mcrn/numerics.hpp"

namespace mcrn {

std::string NegativeSample::id() const {
  std::string s = domain == Domain::Source ? "src" : "tgt";
  s += std::to_string(class_id);
  if (slot >= 0) {
    s += '.';
    s += std::to_string(slot);
  }
  return s;
}

namespace {

std::vector<FeatureVector> class_means(const PseudoDataset& ds) {
  const auto members = ds.members_by_class();
  std::vector<FeatureVector> means;
  means.reserve(members.size());
  for (const auto& m : members) {
    if (m.empty()) {
      throw std::invalid_argument("centroid bank: class without samples");
    }
    std::vector<FeatureVector> feats;
    feats.reserve(m.size());
    for (int pos : m) feats.push_back(ds.features[pos]);
    FeatureVector mean = mean_vector(feats);
    quantize_f32(mean);
    means.push_back(std::move(mean));
  }
  return means;
}

}  // namespace

CentroidBank::CentroidBank(const PseudoDataset& source,
                           const PseudoDataset& target, int k) {
  if (k < 1) throw std::invalid_argument("centroid bank: k must be >= 1");
  if (source.domain != Domain::Source || target.domain != Domain::Target) {
    throw std::invalid_argument("centroid bank: datasets passed in wrong order");
  }
  if (source.features.empty() || target.features.empty()) {
    throw std::invalid_argument("centroid bank: empty dataset");
  }
  const std::size_t dim = source.features[0].size();
  if (target.features[0].size() != dim) {
    throw std::invalid_argument("centroid bank: feature dim mismatch");
  }
  k_ = k;
  n_source_ = source.n_classes;
  n_target_ = target.n_classes;
  dim_ = static_cast<int>(dim);

  rows_.reserve(static_cast<std::size_t>(k_) * (n_source_ + n_target_));
  for (const auto& mean : class_means(source)) {
    for (int s = 0; s < k_; ++s) rows_.push_back(mean);
  }
  for (const auto& mean : class_means(target)) {
    for (int s = 0; s < k_; ++s) rows_.push_back(mean);
  }
}

int CentroidBank::row_index(Domain d, int cls, int slot) const {
  const int base = d == Domain::Source ? 0 : n_source_ * k_;
  return base + cls * k_ + slot;
}

void CentroidBank::check_class(Domain d, int cls) const {
  if (cls < 0 || cls >= n_classes(d)) {
    throw std::invalid_argument("centroid bank: class id out of range");
  }
}

const FeatureVector& CentroidBank::centroid(Domain d, int cls,
                                            int slot) const {
  check_class(d, cls);
  if (slot < 0 || slot >= k_) {
    throw std::invalid_argument("centroid bank: slot out of range");
  }
  return rows_[row_index(d, cls, slot)];
}

std::vector<FeatureVector> CentroidBank::class_centroids(Domain d,
                                                         int cls) const {
  check_class(d, cls);
  std::vector<FeatureVector> out;
  out.reserve(k_);
  for (int s = 0; s < k_; ++s) out.push_back(rows_[row_index(d, cls, s)]);
  return out;
}

FeatureVector CentroidBank::mean_centroid(Domain d, int cls) const {
  return mean_vector(class_centroids(d, cls));
}

std::vector<int> CentroidBank::update_class(
    Domain d, int cls, const std::vector<FeatureVector>& queries,
    double momentum) {
  check_class(d, cls);
  if (static_cast<int>(queries.size()) != k_) {
    throw std::invalid_argument(
        "centroid bank: update needs exactly k queries");
  }
  if (momentum < 0.0 || momentum > 1.0) {
    throw std::invalid_argument("centroid bank: momentum outside [0, 1]");
  }
  const std::vector<FeatureVector> current = class_centroids(d, cls);
  const std::vector<int> pairing = match_queries_to_centroids(queries, current);
  for (int i = 0; i < k_; ++i) {
    const FeatureVector& q = queries[i];
    const FeatureVector& c = current[pairing[i]];
    if (static_cast<int>(q.size()) != dim_) {
      throw std::invalid_argument("centroid bank: query dim mismatch");
    }
    FeatureVector blend(dim_);
    for (int j = 0; j < dim_; ++j) {
      blend[j] = momentum * c[j] + (1.0 - momentum) * q[j];
    }
    FeatureVector next = l2_normalize(blend);
    quantize_f32(next);
    rows_[row_index(d, cls, pairing[i])] = std::move(next);
  }
  return pairing;
}

PositiveSelection CentroidBank::select_positive(
    const FeatureVector& query, Domain d, int cls,
    PositiveStrategy strategy) const {
  check_class(d, cls);
  std::vector<std::pair<double, int>> ranked;  // (similarity, slot)
  ranked.reserve(k_);
  for (int s = 0; s < k_; ++s) {
    ranked.emplace_back(cosine_sim(query, rows_[row_index(d, cls, s)]), s);
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first < b.first;
              return a.second < b.second;
            });
  int rank = 0;  // index into the ascending order
  switch (strategy) {
    case PositiveStrategy::Least:
      rank = 0;
      break;
    case PositiveStrategy::Moderate:
      rank = (k_ + 1) / 2 - 1;
      break;
    case PositiveStrategy::Most:
      rank = k_ - 1;
      break;
  }
  const int slot = ranked[rank].second;
  return {rows_[row_index(d, cls, slot)], slot};
}

std::vector<NegativeSample> CentroidBank::select_negatives(
    Domain query_domain, int positive_cls, NegativeStrategy strategy,
    NegativeScope scope) const {
  check_class(query_domain, positive_cls);
  std::vector<NegativeSample> out;
  const Domain domains[2] = {Domain::Source, Domain::Target};
  for (Domain d : domains) {
    if (scope == NegativeScope::SameDomain && d != query_domain) continue;
    for (int cls = 0; cls < n_classes(d); ++cls) {
      if (d == query_domain && cls == positive_cls) continue;
      if (strategy == NegativeStrategy::Mean) {
        out.push_back({mean_centroid(d, cls), d, cls, -1});
      } else {
        for (int s = 0; s < k_; ++s) {
          out.push_back({rows_[row_index(d, cls, s)], d, cls, s});
        }
      }
    }
  }
  return out;
}

CentroidBank CentroidBank::from_rows(int k, int n_source, int n_target,
                                     int dim,
                                     std::vector<FeatureVector> rows) {
  if (k < 1 || n_source < 1 || n_target < 1 || dim < 1) {
    throw std::invalid_argument("centroid bank: bad dimensions");
  }
  if (static_cast<int>(rows.size()) != k * (n_source + n_target)) {
    throw std::invalid_argument("centroid bank: row count mismatch");
  }
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != dim) {
      throw std::invalid_argument("centroid bank: row dim mismatch");
    }
  }
  CentroidBank bank;
  bank.k_ = k;
  bank.n_source_ = n_source;
  bank.n_target_ = n_target;
  bank.dim_ = dim;
  bank.rows_ = std::move(rows);
  return bank;
}

}  // namespace mcrn
