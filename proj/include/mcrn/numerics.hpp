#pragma once

#include "mcrn/common.hpp"

namespace mcrn {

double dot(const FeatureVector& a, const FeatureVector& b);
double squared_norm(const FeatureVector& v);

// Unit-normalizes v. Vectors that are already unit within |norm^2 - 1| <= 1e-6
// come back unchanged, which makes normalization exactly idempotent and keeps
// float32-representable unit vectors bit-stable through re-normalization.
// Throws DegenerateInput on an exactly zero vector.
FeatureVector l2_normalize(const FeatureVector& v);

// Plain dot product; callers pass unit-norm vectors so the result is a cosine.
double cosine_sim(const FeatureVector& a, const FeatureVector& b);

// Arithmetic mean (double accumulation, input order) followed by l2_normalize.
// Throws DegenerateInput when the inputs cancel to the zero vector.
FeatureVector mean_vector(const std::vector<FeatureVector>& vs);

void check_finite(const FeatureVector& v, const char* what);

}  // namespace mcrn
