#include "mcrn/assignment.hpp"

#include <cmath>
#include <limits>

#include "mcrn/numerics.hpp"

namespace mcrn {

namespace {

// Kuhn-Munkres with potentials and shortest augmenting paths, O(n^3),
// minimizing cost. Index 0 is a virtual row/column; real ids are 1-based.
// Comparisons are exact: the potential method cannot cycle, and exact
// comparisons keep the returned matching exactly optimal.
std::vector<int> hungarian_min(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> matched_row(n + 1, 0);  // matched_row[col] = row
  std::vector<int> way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    matched_row[0] = i;
    int j0 = 0;
    std::vector<double> min_slack(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = matched_row[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[matched_row[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (matched_row[j0] != 0);
    do {
      const int j1 = way[j0];
      matched_row[j0] = matched_row[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> mapping(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (matched_row[j] != 0) mapping[matched_row[j] - 1] = j - 1;
  }
  return mapping;
}

}  // namespace

std::vector<int> hungarian_max(const ScoreMatrix& score) {
  const int n = static_cast<int>(score.size());
  if (n == 0) throw std::invalid_argument("hungarian_max: empty matrix");
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(score[i].size()) != n) {
      throw std::invalid_argument("hungarian_max: matrix is not square");
    }
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(score[i][j])) {
        throw std::invalid_argument("hungarian_max: non-finite score");
      }
      cost[i][j] = -score[i][j];
    }
  }
  return hungarian_min(cost);
}

std::vector<int> match_queries_to_centroids(
    const std::vector<FeatureVector>& queries,
    const std::vector<FeatureVector>& centroids) {
  if (queries.empty() || queries.size() != centroids.size()) {
    throw std::invalid_argument(
        "match_queries_to_centroids: need equal nonzero counts");
  }
  const int k = static_cast<int>(queries.size());
  ScoreMatrix score(k, std::vector<double>(k));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      score[i][j] = cosine_sim(queries[i], centroids[j]);
    }
  }
  return hungarian_max(score);
}

double assignment_score(const ScoreMatrix& score,
                        const std::vector<int>& mapping) {
  if (mapping.size() != score.size()) {
    throw std::invalid_argument("assignment_score: size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    total += score[i][static_cast<std::size_t>(mapping[i])];
  }
  return total;
}

}  // namespace mcrn
