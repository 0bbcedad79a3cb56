#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcrn {

// Feature vectors are plain double sequences; unit norm is enforced at the
// boundaries that produce them (encoder output, memory writes, interpolation).
using FeatureVector = std::vector<double>;

enum class Domain { Source, Target };

inline const char* domain_name(Domain d) {
  return d == Domain::Source ? "source" : "target";
}

// Input that is mathematically unusable: a zero vector, an exactly cancelling
// mean, a clustering that discarded everything. Callers decide the fallback.
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Persistent training state (encoder parameters, optimizer moments, memory
// rows) is kept at float32 precision while arithmetic runs in double.
// Rounding through float after every write keeps the in-memory state
// bit-identical to what a checkpoint stores.
inline double quantize_f32(double x) {
  return static_cast<double>(static_cast<float>(x));
}
void quantize_f32(std::vector<double>& xs);

uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(const void* data, std::size_t len);
uint64_t fnv1a64(const std::string& s);

// Shortest decimal form that round-trips, so repeated runs emit identical
// bytes in CSV/JSON output.
std::string fmt_double(double x);

// mt19937_64 wrapper with exact state serialization. Gaussians draw a fresh
// Box-Muller pair per call (second value discarded) so the engine state is
// the entire rng state.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double gaussian();
  int uniform_int(int n);  // [0, n), rejection sampled

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  // Derives an independent stream seed from a master seed and a stream tag.
  static uint64_t mix(uint64_t seed, uint64_t tag);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mcrn
