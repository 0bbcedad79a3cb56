#pragma once

#include "mcrn/common.hpp"
#include "mcrn/memory.hpp"

namespace mcrn {

enum class SynthesisMethod { Soni, Qnni, Rnni, None };
enum class LossScope { Ucl, Dscl };

struct LossReport {
  double value = 0.0;
  FeatureVector grad_query;  // d value / d query, selections held fixed
  std::vector<std::string> participants;  // denominator ids, positive first
  bool degenerate_no_negatives = false;
};

// Temperature-scaled contrastive value for one query:
//   -log( exp(q.c+/tau) / (exp(q.c+/tau) + sum_k exp(q.c_k/tau)) )
// computed with max-subtraction. Gradients treat the positive and negatives
// as constants. An empty negative set yields value 0 and a zero gradient.
LossReport info_nce(const FeatureVector& query, const FeatureVector& positive,
                    const std::vector<FeatureVector>& negatives, double tau);

// Contrastive loss with negatives drawn from both domains.
LossReport ucl_loss(const FeatureVector& query, const CentroidBank& bank,
                    Domain domain, int cls, double tau,
                    PositiveStrategy positive, NegativeStrategy negative);

// Contrastive loss with negatives restricted to the query's own domain.
// A single-class domain gives value 0 and sets degenerate_no_negatives.
LossReport dscl_loss(const FeatureVector& query, const CentroidBank& bank,
                     Domain domain, int cls, double tau,
                     PositiveStrategy positive, NegativeStrategy negative);

struct SyntheticSample {
  FeatureVector feature;
  int anchor_class = -1;  // -1 means the query itself was the anchor
  int anchor_slot = -1;
  int neighbor_class = -1;
  int neighbor_slot = -1;
  double beta = 0.0;
};

// Count of hard-negative anchors for a target-class count: 0 at alpha == 0,
// otherwise max(1, floor(alpha * n_target_classes)).
int synthesis_budget(double alpha, int n_target_classes);

// Interpolation-based synthetic negatives around the positive centroid.
// The candidate pool is every individual target-domain centroid outside the
// positive class. H = the budget-many pool members nearest to c_plus; each
// anchor h in H is blended with its nearest H-member of a different pseudo
// label: normalize(beta * h + (1 - beta) * h_other). Anchors with no
// different-label neighbor are skipped; beta is drawn fresh per anchor from
// [beta_lo, beta_hi) unless shared_beta pins it.
std::vector<SyntheticSample> soni_synthesize(
    const FeatureVector& c_plus, const CentroidBank& bank, int positive_cls,
    double alpha, Rng& rng, double beta_lo = 0.2, double beta_hi = 0.5,
    const double* shared_beta = nullptr);

// Query-side variant: budget-many draws, each blending the query with its
// single nearest pool member under a fresh beta.
std::vector<SyntheticSample> qnni_synthesize(
    const FeatureVector& query, const CentroidBank& bank, int positive_cls,
    double alpha, Rng& rng, double beta_lo = 0.2, double beta_hi = 0.5,
    const double* shared_beta = nullptr);

// Random-pair variant: budget-many draws, each blending two distinct
// uniformly chosen members of H (labels unrestricted). |H| < 2 gives nothing.
std::vector<SyntheticSample> rnni_synthesize(
    const FeatureVector& c_plus, const CentroidBank& bank, int positive_cls,
    double alpha, Rng& rng, double beta_lo = 0.2, double beta_hi = 0.5,
    const double* shared_beta = nullptr);

// dscl_loss with the synthetic negatives appended to the denominator.
// With an empty synthetic set this is exactly dscl_loss.
LossReport dscl_star_loss(const FeatureVector& query, const CentroidBank& bank,
                          Domain domain, int cls,
                          const std::vector<SyntheticSample>& synthetics,
                          double tau, PositiveStrategy positive,
                          NegativeStrategy negative);

struct LossConfig {
  double tau = 0.05;
  LossScope scope = LossScope::Dscl;
  SynthesisMethod synthesis = SynthesisMethod::Soni;
  double alpha = 0.03;
  double beta_lo = 0.2;
  double beta_hi = 0.5;
  bool shared_beta = false;  // one beta per batch instead of per anchor
  PositiveStrategy positive = PositiveStrategy::Moderate;
  NegativeStrategy negative = NegativeStrategy::Mean;
};

struct EncodedQuery {
  FeatureVector feature;
  int class_id = -1;
};

struct BatchLossReport {
  double value = 0.0;
  std::vector<LossReport> source_reports;
  std::vector<LossReport> target_reports;
  std::vector<std::vector<SyntheticSample>> target_synthetics;
  bool source_empty = false;
  bool target_empty = false;
};

// Batch objective: mean source-query loss plus mean target-query loss.
// Synthesis (if enabled) applies to target queries only. An empty side
// contributes zero and is flagged.
BatchLossReport total_loss(const std::vector<EncodedQuery>& source,
                           const std::vector<EncodedQuery>& target,
                           const CentroidBank& bank, const LossConfig& config,
                           Rng& rng);

}  // namespace mcrn
