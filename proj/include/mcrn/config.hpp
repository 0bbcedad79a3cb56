#pragma once

#include "mcrn/common.hpp"
#include "mcrn/datasim.hpp"
#include "mcrn/losses.hpp"

namespace mcrn {

enum class Representation { Multi, Uni };

struct ExperimentConfig {
  // [run]
  uint64_t seed = 1;
  int epochs = 50;
  int iterations = 0;  // 0 = one sweep over the clustered target samples

  // [data] / [data.source] / [data.target]
  int input_dim = 16;
  DomainSpec source{10, 30, 16, 2.0, 0.05, 0.0, 0.0};
  DomainSpec target{10, 40, 16, 2.0, 0.05, 0.6, 0.25};
  double augment_sigma = 0.02;
  double query_fraction = 0.25;
  std::string import_path;  // load raw samples instead of generating
  std::string export_path;  // dump raw samples after generation

  // [encoder]
  std::vector<int> hidden_dims{64, 64};
  int feature_dim = 32;

  // [cluster]
  double dbscan_eps = 0.5;
  int dbscan_min_pts = 4;
  int source_merge_pairs = 0;
  int source_split_classes = 0;
  int target_merge_pairs = 0;
  int target_split_classes = 0;

  // [memory]
  int k = 4;
  double momentum = 0.2;
  Representation representation = Representation::Multi;
  PositiveStrategy positive = PositiveStrategy::Moderate;
  NegativeStrategy negative = NegativeStrategy::Mean;

  // [loss]
  double tau = 0.05;
  LossScope scope = LossScope::Dscl;
  SynthesisMethod synthesis = SynthesisMethod::Soni;
  double alpha = 0.03;
  double beta_lo = 0.2;
  double beta_hi = 0.5;
  bool shared_beta = false;

  // [optim]
  double lr = 0.00035;
  double lr_decay = 0.1;
  int lr_decay_every = 20;
  double weight_decay = 0.0005;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // [batch]
  int p = 4;

  LossConfig loss_config() const;
};

// Parses "[section]" / "key = value" text. Every key must be known; unknown
// sections or keys raise std::runtime_error with the line number. Keys that
// are absent keep their defaults.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Full config in parse_config_text form, fixed key order. parse(canonical(c))
// reproduces c exactly.
std::string canonical_config(const ExperimentConfig& config);

// Hash of the canonical form; stamped into checkpoints.
uint64_t config_hash(const ExperimentConfig& config);

// Range checks plus normalization: the uni-centroid representation forces
// k = 1 with the Moderate positive. Throws std::invalid_argument.
void validate_config(ExperimentConfig& config);

const char* to_string(Representation v);
const char* to_string(PositiveStrategy v);
const char* to_string(NegativeStrategy v);
const char* to_string(LossScope v);
const char* to_string(SynthesisMethod v);

}  // namespace mcrn
