#pragma once

#include <iosfwd>
#include <optional>

#include "mcrn/config.hpp"
#include "mcrn/encoder.hpp"

namespace mcrn {

struct MetricsRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_ap = 0.0;
  double cmc1 = 0.0;
  double cmc5 = 0.0;
  double cmc10 = 0.0;
  double purity = 0.0;
  int n_target_classes = 0;
  double domain_distance = 0.0;
  double wall_clock_sec = 0.0;  // measured, kept out of serialized lines
};

// One JSON object, fixed key order. wall_clock_sec is deliberately omitted so
// identical (config, seed) runs produce byte-identical metric streams.
std::string metrics_json_line(const MetricsRecord& record);

struct RunOptions {
  std::ostream* metrics_out = nullptr;  // receives one JSON line per record
  std::ostream* log = nullptr;          // human progress notes, timings
  int save_at_epoch = -1;               // save after completing this epoch
  std::string save_path;
};

struct RunResult {
  std::vector<MetricsRecord> records;
};

// Full training run: per epoch, re-extract features, cluster the target
// domain, rebuild the centroid memory, then run the sampled contrastive
// iterations. Epoch records count from 1; epochs = 0 evaluates the untrained
// encoder once as epoch 0.
RunResult run_experiment(const ExperimentConfig& config,
                         const RunOptions& options = {});

// Continues a checkpointed run through the remaining epochs. The checkpoint
// must match the config (hash check) and yields the same trajectory the
// uninterrupted run would have produced.
RunResult resume_experiment(const ExperimentConfig& config,
                            const std::string& checkpoint_path,
                            const RunOptions& options = {});

// Loads the encoder from a checkpoint and evaluates it once (retrieval
// metrics, clustering purity, domain distance) without training.
MetricsRecord evaluate_checkpoint(const ExperimentConfig& config,
                                  const std::string& checkpoint_path);

// One run per value of "k" or "alpha" (shared seed), newline-terminated CSV
// of the final epoch's metrics.
std::string sweep(const ExperimentConfig& base, const std::string& param,
                  const std::vector<double>& values,
                  std::ostream* log = nullptr);

// Fixed comparison suites, n_seeds runs per arm (seeds base, base+1, ...):
//   table1: multi-centroid memory vs the uni-centroid variant
//   table2: positive/negative selection strategies
//   table3: synthetic hard-negative methods
//   dscl:   same-domain vs both-domain negative scope
// CSV rows carry every seed plus a per-arm median row.
std::string ablate(const ExperimentConfig& base, const std::string& preset,
                   int n_seeds, std::ostream* log = nullptr);

// Serialized training state. Layout: "MCRN" magic, format version, config
// hash, epoch/step counters, encoder shape, then float32 parameters, Adam
// moments and memory rows, then the serialized rng state.
struct Checkpoint {
  uint32_t format_version = 0;
  uint64_t config_hash = 0;
  int completed_epochs = 0;
  Encoder encoder;
  AdamState adam;
  int bank_k = 0;
  int bank_n_source = 0;
  int bank_n_target = 0;
  int bank_dim = 0;
  std::vector<FeatureVector> bank_rows;
  std::string rng_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& state);
Checkpoint load_checkpoint(const std::string& path);

struct CheckpointHeader {
  uint32_t format_version = 0;
  uint64_t config_hash = 0;
  int completed_epochs = 0;
};
CheckpointHeader read_checkpoint_header(const std::string& path);

// The deterministic query/gallery split: per identity, the query_fraction
// share of samples (at least one, never all) ordered by a seeded hash of the
// sample index. Returns query flags per sample.
std::vector<char> query_split(const std::vector<int>& true_ids,
                              double query_fraction, uint64_t seed);

}  // namespace mcrn
