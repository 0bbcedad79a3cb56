#pragma once

#include "mcrn/common.hpp"

namespace mcrn {

using ScoreMatrix = std::vector<std::vector<double>>;

// Maximum-total-score one-to-one assignment on a square score matrix.
// Returns mapping where mapping[i] is the column matched to row i.
// Deterministic: rows are processed in ascending order and column scans take
// the first (lowest-index) minimum, so ties always resolve the same way.
std::vector<int> hungarian_max(const ScoreMatrix& score);

// Builds the cosine score matrix between k queries and k centroids and
// solves for the score-maximizing pairing.
std::vector<int> match_queries_to_centroids(
    const std::vector<FeatureVector>& queries,
    const std::vector<FeatureVector>& centroids);

// Total score of a given mapping, summed in ascending row order.
double assignment_score(const ScoreMatrix& score,
                        const std::vector<int>& mapping);

}  // namespace mcrn
