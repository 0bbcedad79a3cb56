#include "mcrn/losses.hpp"

#include <algorithm>
#include <cmath>

#include "mcrn/numerics.hpp"

namespace mcrn {

LossReport info_nce(const FeatureVector& query, const FeatureVector& positive,
                    const std::vector<FeatureVector>& negatives, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("info_nce: tau must be > 0");
  if (query.size() != positive.size()) {
    throw std::invalid_argument("info_nce: dimension mismatch");
  }
  check_finite(query, "info_nce query");

  const std::size_t dim = query.size();
  LossReport report;
  report.grad_query.assign(dim, 0.0);
  if (negatives.empty()) {
    // Lone positive: probability one, zero value, zero gradient.
    return report;
  }

  // Scaled similarities, positive first.
  std::vector<double> logits;
  logits.reserve(negatives.size() + 1);
  logits.push_back(dot(query, positive) / tau);
  for (const auto& n : negatives) {
    if (n.size() != dim) {
      throw std::invalid_argument("info_nce: negative dimension mismatch");
    }
    logits.push_back(dot(query, n) / tau);
  }

  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  std::vector<double> weights(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    weights[i] = std::exp(logits[i] - peak);
    z += weights[i];
  }
  report.value = std::log(z) - (logits[0] - peak);

  // d value / d query = (sum_j p_j v_j - positive) / tau
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = weights[i] / z;
    const FeatureVector& v = i == 0 ? positive : negatives[i - 1];
    for (std::size_t d = 0; d < dim; ++d) {
      report.grad_query[d] += p * v[d];
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    report.grad_query[d] = (report.grad_query[d] - positive[d]) / tau;
  }
  return report;
}

namespace {

std::string positive_id(Domain domain, int cls, int slot) {
  std::string s = domain == Domain::Source ? "src" : "tgt";
  s += std::to_string(cls);
  s += '.';
  s += std::to_string(slot);
  s += '+';
  return s;
}

// Shared body of the class-contrastive losses: select the positive, gather
// scoped negatives, append any synthetics, run the kernel.
LossReport class_contrastive_loss(const FeatureVector& query,
                                  const CentroidBank& bank, Domain domain,
                                  int cls, NegativeScope scope,
                                  const std::vector<SyntheticSample>& synths,
                                  double tau, PositiveStrategy positive,
                                  NegativeStrategy negative) {
  const PositiveSelection pos = bank.select_positive(query, domain, cls,
                                                     positive);
  const std::vector<NegativeSample> negs =
      bank.select_negatives(domain, cls, negative, scope);

  std::vector<FeatureVector> denom;
  denom.reserve(negs.size() + synths.size());
  std::vector<std::string> ids;
  ids.reserve(negs.size() + synths.size() + 1);
  ids.push_back(positive_id(domain, cls, pos.slot));
  for (const auto& n : negs) {
    denom.push_back(n.feature);
    ids.push_back(n.id());
  }
  for (std::size_t i = 0; i < synths.size(); ++i) {
    denom.push_back(synths[i].feature);
    ids.push_back("syn" + std::to_string(i));
  }

  LossReport report = info_nce(query, pos.feature, denom, tau);
  report.participants = std::move(ids);
  report.degenerate_no_negatives = denom.empty();
  return report;
}

struct Pool {
  std::vector<FeatureVector> features;
  std::vector<int> class_ids;
  std::vector<int> slots;
};

// Every individual target-domain centroid outside the positive class,
// ordered class-ascending then slot-ascending.
Pool negative_pool(const CentroidBank& bank, int positive_cls) {
  Pool pool;
  for (int cls = 0; cls < bank.n_classes(Domain::Target); ++cls) {
    if (cls == positive_cls) continue;
    for (int s = 0; s < bank.k(); ++s) {
      pool.features.push_back(bank.centroid(Domain::Target, cls, s));
      pool.class_ids.push_back(cls);
      pool.slots.push_back(s);
    }
  }
  return pool;
}

// Indices of the `budget` pool members most similar to `probe`, ties broken
// by (class, slot) ascending via the pool's stable order.
std::vector<int> hardest_members(const Pool& pool, const FeatureVector& probe,
                                 int budget) {
  std::vector<std::pair<double, int>> scored;
  scored.reserve(pool.features.size());
  for (std::size_t i = 0; i < pool.features.size(); ++i) {
    scored.emplace_back(cosine_sim(probe, pool.features[i]),
                        static_cast<int>(i));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) {
                     return a.first > b.first;
                   });
  const int take = std::min<int>(budget, static_cast<int>(scored.size()));
  std::vector<int> out;
  out.reserve(take);
  for (int i = 0; i < take; ++i) out.push_back(scored[i].second);
  return out;
}

FeatureVector blend_normalized(const FeatureVector& a, const FeatureVector& b,
                               double beta) {
  FeatureVector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    v[i] = beta * a[i] + (1.0 - beta) * b[i];
  }
  return l2_normalize(v);
}

double draw_beta(Rng& rng, double lo, double hi, const double* shared) {
  if (shared != nullptr) return *shared;
  return rng.uniform(lo, hi);
}

}  // namespace

LossReport ucl_loss(const FeatureVector& query, const CentroidBank& bank,
                    Domain domain, int cls, double tau,
                    PositiveStrategy positive, NegativeStrategy negative) {
  return class_contrastive_loss(query, bank, domain, cls,
                                NegativeScope::BothDomains, {}, tau, positive,
                                negative);
}

LossReport dscl_loss(const FeatureVector& query, const CentroidBank& bank,
                     Domain domain, int cls, double tau,
                     PositiveStrategy positive, NegativeStrategy negative) {
  return class_contrastive_loss(query, bank, domain, cls,
                                NegativeScope::SameDomain, {}, tau, positive,
                                negative);
}

int synthesis_budget(double alpha, int n_target_classes) {
  if (alpha < 0.0) throw std::invalid_argument("synthesis: alpha must be >= 0");
  if (alpha == 0.0) return 0;
  return std::max(1, static_cast<int>(std::floor(alpha * n_target_classes)));
}

std::vector<SyntheticSample> soni_synthesize(
    const FeatureVector& c_plus, const CentroidBank& bank, int positive_cls,
    double alpha, Rng& rng, double beta_lo, double beta_hi,
    const double* shared_beta) {
  const int n_t = bank.n_classes(Domain::Target);
  std::vector<SyntheticSample> out;
  if (n_t < 2) return out;
  const int budget = synthesis_budget(alpha, n_t);
  if (budget == 0) return out;

  const Pool pool = negative_pool(bank, positive_cls);
  const std::vector<int> hard = hardest_members(pool, c_plus, budget);

  for (int idx : hard) {
    // Nearest member of H with a different pseudo label; first wins on ties.
    int best = -1;
    double best_sim = 0.0;
    for (int other : hard) {
      if (pool.class_ids[other] == pool.class_ids[idx]) continue;
      const double sim = cosine_sim(pool.features[idx], pool.features[other]);
      if (best < 0 || sim > best_sim) {
        best = other;
        best_sim = sim;
      }
    }
    if (best < 0) continue;  // H is single-label around this anchor
    const double beta = draw_beta(rng, beta_lo, beta_hi, shared_beta);
    SyntheticSample s;
    s.feature = blend_normalized(pool.features[idx], pool.features[best], beta);
    s.anchor_class = pool.class_ids[idx];
    s.anchor_slot = pool.slots[idx];
    s.neighbor_class = pool.class_ids[best];
    s.neighbor_slot = pool.slots[best];
    s.beta = beta;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SyntheticSample> qnni_synthesize(
    const FeatureVector& query, const CentroidBank& bank, int positive_cls,
    double alpha, Rng& rng, double beta_lo, double beta_hi,
    const double* shared_beta) {
  const int n_t = bank.n_classes(Domain::Target);
  std::vector<SyntheticSample> out;
  if (n_t < 2) return out;
  const int budget = synthesis_budget(alpha, n_t);
  if (budget == 0) return out;

  const Pool pool = negative_pool(bank, positive_cls);
  const std::vector<int> nearest = hardest_members(pool, query, 1);
  if (nearest.empty()) return out;
  const int nn = nearest[0];

  for (int i = 0; i < budget; ++i) {
    const double beta = draw_beta(rng, beta_lo, beta_hi, shared_beta);
    SyntheticSample s;
    s.feature = blend_normalized(query, pool.features[nn], beta);
    s.neighbor_class = pool.class_ids[nn];
    s.neighbor_slot = pool.slots[nn];
    s.beta = beta;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SyntheticSample> rnni_synthesize(
    const FeatureVector& c_plus, const CentroidBank& bank, int positive_cls,
    double alpha, Rng& rng, double beta_lo, double beta_hi,
    const double* shared_beta) {
  const int n_t = bank.n_classes(Domain::Target);
  std::vector<SyntheticSample> out;
  if (n_t < 2) return out;
  const int budget = synthesis_budget(alpha, n_t);
  if (budget == 0) return out;

  const Pool pool = negative_pool(bank, positive_cls);
  const std::vector<int> hard = hardest_members(pool, c_plus, budget);
  if (hard.size() < 2) return out;

  const int h = static_cast<int>(hard.size());
  for (int i = 0; i < budget; ++i) {
    const int a = rng.uniform_int(h);
    int b = rng.uniform_int(h - 1);
    if (b >= a) ++b;  // distinct pair
    const double beta = draw_beta(rng, beta_lo, beta_hi, shared_beta);
    SyntheticSample s;
    s.feature =
        blend_normalized(pool.features[hard[a]], pool.features[hard[b]], beta);
    s.anchor_class = pool.class_ids[hard[a]];
    s.anchor_slot = pool.slots[hard[a]];
    s.neighbor_class = pool.class_ids[hard[b]];
    s.neighbor_slot = pool.slots[hard[b]];
    s.beta = beta;
    out.push_back(std::move(s));
  }
  return out;
}

LossReport dscl_star_loss(const FeatureVector& query, const CentroidBank& bank,
                          Domain domain, int cls,
                          const std::vector<SyntheticSample>& synthetics,
                          double tau, PositiveStrategy positive,
                          NegativeStrategy negative) {
  return class_contrastive_loss(query, bank, domain, cls,
                                NegativeScope::SameDomain, synthetics, tau,
                                positive, negative);
}

BatchLossReport total_loss(const std::vector<EncodedQuery>& source,
                           const std::vector<EncodedQuery>& target,
                           const CentroidBank& bank, const LossConfig& config,
                           Rng& rng) {
  const NegativeScope scope = config.scope == LossScope::Ucl
                                  ? NegativeScope::BothDomains
                                  : NegativeScope::SameDomain;
  BatchLossReport batch;

  // One beta for the whole batch, drawn only when synthesis can actually
  // produce samples; an alpha = 0 run consumes the exact same stream as a
  // synthesis-free run.
  double shared_beta = 0.0;
  const double* shared = nullptr;
  if (config.shared_beta && config.synthesis != SynthesisMethod::None &&
      !target.empty() && bank.n_classes(Domain::Target) >= 2 &&
      synthesis_budget(config.alpha, bank.n_classes(Domain::Target)) > 0) {
    shared_beta = rng.uniform(config.beta_lo, config.beta_hi);
    shared = &shared_beta;
  }

  double source_sum = 0.0;
  for (const auto& q : source) {
    LossReport r = class_contrastive_loss(q.feature, bank, Domain::Source,
                                          q.class_id, scope, {}, config.tau,
                                          config.positive, config.negative);
    source_sum += r.value;
    batch.source_reports.push_back(std::move(r));
  }

  double target_sum = 0.0;
  for (const auto& q : target) {
    std::vector<SyntheticSample> synths;
    switch (config.synthesis) {
      case SynthesisMethod::Soni: {
        const PositiveSelection pos = bank.select_positive(
            q.feature, Domain::Target, q.class_id, config.positive);
        synths = soni_synthesize(pos.feature, bank, q.class_id, config.alpha,
                                 rng, config.beta_lo, config.beta_hi, shared);
        break;
      }
      case SynthesisMethod::Qnni:
        synths = qnni_synthesize(q.feature, bank, q.class_id, config.alpha,
                                 rng, config.beta_lo, config.beta_hi, shared);
        break;
      case SynthesisMethod::Rnni: {
        const PositiveSelection pos = bank.select_positive(
            q.feature, Domain::Target, q.class_id, config.positive);
        synths = rnni_synthesize(pos.feature, bank, q.class_id, config.alpha,
                                 rng, config.beta_lo, config.beta_hi, shared);
        break;
      }
      case SynthesisMethod::None:
        break;
    }
    LossReport r = class_contrastive_loss(q.feature, bank, Domain::Target,
                                          q.class_id, scope, synths,
                                          config.tau, config.positive,
                                          config.negative);
    target_sum += r.value;
    batch.target_reports.push_back(std::move(r));
    batch.target_synthetics.push_back(std::move(synths));
  }

  batch.source_empty = source.empty();
  batch.target_empty = target.empty();
  if (!source.empty()) {
    batch.value += source_sum / static_cast<double>(source.size());
  }
  if (!target.empty()) {
    batch.value += target_sum / static_cast<double>(target.size());
  }
  return batch;
}

}  // namespace mcrn
