#pragma once

#include "mcrn/clustering.hpp"
#include "mcrn/common.hpp"

namespace mcrn {

struct DomainSpec {
  int n_identities = 10;
  int samples_per_identity = 30;
  int input_dim = 16;
  double center_spread = 2.0;  // per-coordinate RMS of each identity center
  double noise_sigma = 0.05;   // per-sample jitter around the center
  double shift = 0.0;          // norm of the additive domain offset
  double distortion = 0.0;     // strength of the random linear mix
  // Look-alike identities: pair t rotates the center of identity 2t+1 toward
  // the center of identity 2t until their directions have cosine twin_cos,
  // modelling people who genuinely resemble each other. 0 pairs = all
  // centers stay mutually orthogonal (while the dimension lasts).
  int twin_pairs = 0;
  double twin_cos = 0.75;
  // Appearance modes per identity (outfit / camera changes): samples are
  // spread round-robin over `modes` sub-centers, each displaced from the
  // identity center by a random direction with per-coordinate RMS
  // mode_spread. modes = 1 keeps every identity unimodal and draws nothing
  // extra from the stream.
  int modes = 1;
  double mode_spread = 0.0;
};

struct RawDataset {
  Domain domain = Domain::Source;
  std::vector<std::vector<double>> inputs;
  std::vector<int> true_ids;
  std::size_t size() const { return inputs.size(); }
};

// Two synthetic identity populations. Per domain: mutually orthogonal random
// identity centers (see generate_one), gaussian per-sample noise, then the
// domain's own offset vector (random direction, norm = shift) and linear
// distortion x -> (I + distortion*G/sqrt(D)) x applied to every sample.
// Identities are numbered 0..n-1 per domain and are unrelated across domains.
std::pair<RawDataset, RawDataset> generate_domains(const DomainSpec& source,
                                                   const DomainSpec& target,
                                                   Rng& rng);

// Additive gaussian jitter; sigma = 0 returns the input unchanged.
std::vector<double> augment(const std::vector<double>& x, double sigma,
                            Rng& rng);

struct QueryRef {
  int raw_index = -1;  // position in the domain's raw dataset
  int class_id = -1;   // pseudo label
};

struct MiniBatch {
  std::vector<QueryRef> source;
  std::vector<QueryRef> target;
};

// Draws p distinct classes uniformly, then k samples per class (without
// replacement when the class has at least k members, with replacement
// otherwise). Entries come back grouped per class in draw order.
std::vector<QueryRef> pk_sample(const PseudoDataset& dataset, int p, int k,
                                Rng& rng);

// Flat text round-trip: one sample per line as
//   domain,true_id,v0,v1,...  with shortest round-trip number formatting.
void export_flat_text(const std::string& path, const RawDataset& source,
                      const RawDataset& target);
std::pair<RawDataset, RawDataset> import_flat_text(const std::string& path);

}  // namespace mcrn
