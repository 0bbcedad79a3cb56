#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mcrn/clustering.hpp"
#include "mcrn/eval.hpp"
#include "mcrn/numerics.hpp"
#include "test_helpers.hpp"

using namespace mcrn;

namespace {

// 2-d feature whose cosine against (1,0) equals c
FeatureVector at_cos(double c) { return {c, std::sqrt(1.0 - c * c)}; }

// Average precision by pairwise rank counting: the rank of a gallery item is
// one plus the number of items that beat it (higher similarity, or equal
// similarity at a lower index). No sorting of the candidate list involved,
// so this is an independent path to the same number.
struct OracleResult {
  double mean_ap = 0.0;
  int evaluated = 0;
  int skipped = 0;
};

OracleResult oracle_map(const RetrievalProtocol& protocol) {
  OracleResult out;
  double ap_sum = 0.0;
  for (const auto& q : protocol.queries) {
    std::vector<double> sims;
    std::vector<int> idx;
    std::vector<bool> rel;
    for (std::size_t g = 0; g < protocol.gallery.size(); ++g) {
      const auto& item = protocol.gallery[g];
      if (q.record_id >= 0 && item.record_id == q.record_id) continue;
      sims.push_back(cosine_sim(q.feature, item.feature));
      idx.push_back(static_cast<int>(g));
      rel.push_back(item.identity == q.identity);
    }
    int relevant = 0;
    for (bool r : rel) relevant += r ? 1 : 0;
    if (relevant == 0) {
      ++out.skipped;
      continue;
    }
    std::vector<int> relevant_ranks;
    for (std::size_t i = 0; i < sims.size(); ++i) {
      if (!rel[i]) continue;
      int beaten_by = 0;
      for (std::size_t j = 0; j < sims.size(); ++j) {
        if (j == i) continue;
        if (sims[j] > sims[i] || (sims[j] == sims[i] && idx[j] < idx[i])) {
          ++beaten_by;
        }
      }
      relevant_ranks.push_back(beaten_by + 1);
    }
    std::sort(relevant_ranks.begin(), relevant_ranks.end());
    double ap = 0.0;
    for (std::size_t k = 0; k < relevant_ranks.size(); ++k) {
      ap += static_cast<double>(k + 1) / static_cast<double>(relevant_ranks[k]);
    }
    ap_sum += ap / static_cast<double>(relevant);
    ++out.evaluated;
  }
  out.mean_ap = ap_sum / static_cast<double>(out.evaluated);
  return out;
}

}  // namespace

TEST_CASE("average precision on a worked example") {
  RetrievalProtocol p;
  p.queries.push_back({{1.0, 0.0}, 0, -1});
  p.gallery.push_back({at_cos(0.9), 0, -1});
  p.gallery.push_back({at_cos(0.8), 1, -1});
  p.gallery.push_back({at_cos(0.7), 0, -1});
  const auto res = map_cmc(p, 3);
  // hits at ranks 1 and 3: (1/1 + 2/3) / 2
  CHECK(res.mean_ap == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(res.evaluated == 1);
  CHECK(res.skipped == 0);
  CHECK(res.cmc[0] == 1.0);
  CHECK(res.cmc[1] == 1.0);
  CHECK(res.cmc[2] == 1.0);
}

TEST_CASE("cmc counts first hits only") {
  RetrievalProtocol p;
  // first query hits at rank 1, second at rank 3
  p.queries.push_back({{1.0, 0.0}, 0, -1});
  p.queries.push_back({{0.0, 1.0}, 1, -1});
  p.gallery.push_back({{1.0, 0.0}, 0, -1});  // q0 match at similarity 1
  // two distractors crowd out q1's match, which sits at cosine 0.8 to it
  p.gallery.push_back({at_cos(0.2), 2, -1});
  p.gallery.push_back({at_cos(0.3), 2, -1});
  p.gallery.push_back({{0.6, 0.8}, 1, -1});
  const auto res = map_cmc(p, 4);
  CHECK(res.evaluated == 2);
  CHECK(res.cmc[0] == 0.5);
  CHECK(res.cmc[1] == 0.5);
  CHECK(res.cmc[2] == 1.0);
  CHECK(res.cmc[3] == 1.0);

  // a window smaller than the first-hit rank drops that query from the curve
  const auto narrow = map_cmc(p, 2);
  CHECK(narrow.cmc[0] == 0.5);
  CHECK(narrow.cmc[1] == 0.5);
}

TEST_CASE("similarity ties break by gallery index") {
  RetrievalProtocol p;
  p.queries.push_back({{1.0, 0.0}, 0, -1});
  // both gallery items sit at the same similarity; the wrong identity comes
  // first in the list so the relevant item lands at rank 2
  p.gallery.push_back({{1.0, 0.0}, 1, -1});
  p.gallery.push_back({{1.0, 0.0}, 0, -1});
  const auto res = map_cmc(p, 2);
  CHECK(res.mean_ap == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(res.cmc[0] == 0.0);
  CHECK(res.cmc[1] == 1.0);
}

TEST_CASE("matching record ids are excluded from the gallery") {
  RetrievalProtocol p;
  p.queries.push_back({{1.0, 0.0}, 0, 7});
  p.gallery.push_back({{1.0, 0.0}, 0, 7});        // the query itself
  p.gallery.push_back({at_cos(0.4), 0, 8});
  p.gallery.push_back({at_cos(0.6), 1, 9});
  const auto res = map_cmc(p, 2);
  // with the self-match gone the true match sits behind one distractor
  CHECK(res.mean_ap == doctest::Approx(0.5).epsilon(1e-12));

  // a negative query record id disables the exclusion
  p.queries[0].record_id = -1;
  const auto keep = map_cmc(p, 2);
  CHECK(keep.mean_ap == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("queries without gallery matches are skipped") {
  RetrievalProtocol p;
  p.queries.push_back({{1.0, 0.0}, 0, -1});
  p.queries.push_back({{1.0, 0.0}, 5, -1});  // identity 5 never appears
  p.gallery.push_back({{1.0, 0.0}, 0, -1});
  const auto res = map_cmc(p, 1);
  CHECK(res.evaluated == 1);
  CHECK(res.skipped == 1);
  CHECK(res.mean_ap == 1.0);
  CHECK(res.cmc[0] == 1.0);

  RetrievalProtocol hopeless;
  hopeless.queries.push_back({{1.0, 0.0}, 5, -1});
  hopeless.gallery.push_back({{1.0, 0.0}, 0, -1});
  CHECK_THROWS_AS(map_cmc(hopeless, 1), DegenerateInput);
}

TEST_CASE("map_cmc input validation") {
  RetrievalProtocol p;
  CHECK_THROWS_AS(map_cmc(p, 1), std::invalid_argument);
  p.queries.push_back({{1.0, 0.0}, 0, -1});
  CHECK_THROWS_AS(map_cmc(p, 1), std::invalid_argument);  // empty gallery
  p.gallery.push_back({{1.0, 0.0}, 0, -1});
  CHECK_THROWS_AS(map_cmc(p, 0), std::invalid_argument);
  CHECK_NOTHROW(map_cmc(p, 1));
}

TEST_CASE("mean average precision matches pairwise rank counting") {
  Rng rng(401);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = 2 + static_cast<int>(rng.uniform_int(6));
    const int n_ids = 2 + static_cast<int>(rng.uniform_int(4));
    const int n_gallery = 1 + static_cast<int>(rng.uniform_int(50));
    const int n_queries = 1 + static_cast<int>(rng.uniform_int(8));

    RetrievalProtocol p;
    for (int g = 0; g < n_gallery; ++g) {
      RetrievalItem it;
      it.feature = helpers::random_unit(dim, rng);
      it.identity = static_cast<int>(rng.uniform_int(n_ids));
      it.record_id = 100 + g;
      p.gallery.push_back(std::move(it));
    }
    for (int q = 0; q < n_queries; ++q) {
      RetrievalItem it;
      it.feature = helpers::random_unit(dim, rng);
      it.identity = static_cast<int>(rng.uniform_int(n_ids));
      // half the queries carry a record id that collides with the gallery
      it.record_id = (q % 2 == 0) ? 100 + static_cast<int>(
                                              rng.uniform_int(n_gallery))
                                  : -1;
      p.queries.push_back(std::move(it));
    }

    const auto oracle = oracle_map(p);
    if (oracle.evaluated == 0) {
      CHECK_THROWS_AS(map_cmc(p, 5), DegenerateInput);
      continue;
    }
    const auto res = map_cmc(p, 5);
    CHECK(res.evaluated == oracle.evaluated);
    CHECK(res.skipped == oracle.skipped);
    // identical accumulation order makes the agreement exact
    CHECK(res.mean_ap == oracle.mean_ap);
  }
}

TEST_CASE("domain distance") {
  const std::vector<FeatureVector> a{{1.0, 0.0}, {1.0, 0.0}};
  const std::vector<FeatureVector> b{{0.0, 1.0}};
  const std::vector<FeatureVector> c{{-1.0, 0.0}};
  CHECK(std::abs(domain_distance(a, a)) <= 1e-12);
  CHECK(domain_distance(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(domain_distance(a, c) == doctest::Approx(2.0).epsilon(1e-12));

  // the mean is taken before normalization: opposing members cancel
  const std::vector<FeatureVector> mixed{{1.0, 0.0}, {0.0, 1.0}};
  CHECK(domain_distance(a, mixed) ==
        doctest::Approx(1.0 - std::cos(std::atan2(1.0, 1.0))).epsilon(1e-12));

  CHECK_THROWS(domain_distance({}, a));
  CHECK_THROWS(domain_distance(a, {}));
}

TEST_CASE("cluster purity") {
  // cluster 0 majority identity 5 (2 of 3), cluster 1 pure: (2 + 2) / 5
  CHECK(cluster_purity({0, 0, 0, 1, 1}, {5, 5, 6, 7, 7}) ==
        doctest::Approx(0.8).epsilon(1e-12));
  CHECK(cluster_purity({0, 1, 2}, {3, 4, 5}) == 1.0);
  CHECK(cluster_purity({0, 0, 0}, {1, 2, 3}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(cluster_purity({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(cluster_purity({0, 1}, {0}), std::invalid_argument);
  CHECK_THROWS_AS(cluster_purity({0, -1}, {0, 1}), std::invalid_argument);

  // the dataset overload reads the same two columns
  const std::vector<int> labels{0, 0, 1, 1};
  const std::vector<FeatureVector> fs(4, FeatureVector{1.0, 0.0});
  const PseudoDataset ds = dataset_from_labels(labels, fs, {9, 9, 9, 8},
                                               Domain::Target);
  CHECK(cluster_purity(ds) == cluster_purity(ds.labels, ds.true_ids));
  CHECK(cluster_purity(ds) == doctest::Approx(0.75).epsilon(1e-12));
}
