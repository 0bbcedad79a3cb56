#include "mcrn/numerics.hpp"

#include <cmath>

namespace mcrn {

void check_finite(const FeatureVector& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument(std::string(what) + ": non-finite entry");
    }
  }
}

double dot(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(const FeatureVector& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

FeatureVector l2_normalize(const FeatureVector& v) {
  if (v.empty()) throw std::invalid_argument("l2_normalize: empty vector");
  check_finite(v, "l2_normalize");
  const double n2 = squared_norm(v);
  if (n2 == 0.0) throw DegenerateInput("l2_normalize: zero vector");
  if (std::abs(n2 - 1.0) <= 1e-6) return v;  // already unit within tolerance
  const double inv = 1.0 / std::sqrt(n2);
  FeatureVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return out;
}

double cosine_sim(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_sim: dimension mismatch");
  }
  return dot(a, b);
}

FeatureVector mean_vector(const std::vector<FeatureVector>& vs) {
  if (vs.empty()) throw std::invalid_argument("mean_vector: empty input");
  const std::size_t dim = vs[0].size();
  FeatureVector acc(dim, 0.0);
  for (const auto& v : vs) {
    if (v.size() != dim) {
      throw std::invalid_argument("mean_vector: dimension mismatch");
    }
    for (std::size_t i = 0; i < dim; ++i) acc[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(vs.size());
  for (double& x : acc) x *= inv;
  try {
    return l2_normalize(acc);
  } catch (const DegenerateInput&) {
    throw DegenerateInput("mean_vector: inputs cancel to the zero vector");
  }
}

}  // namespace mcrn
