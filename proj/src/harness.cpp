#include "mcrn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <utility>

#include "mcrn/eval.hpp"

namespace mcrn {

namespace {

// Stream tags so dataset generation, encoder init and the training stream are
// independently reproducible. Resume re-generates the data and re-derives the
// init stream but restores the training stream from the checkpoint.
constexpr uint64_t kDataTag = 0x64617461;     // "data"
constexpr uint64_t kEncoderTag = 0x656e6364;  // "encd"
constexpr uint64_t kTrainTag = 0x7472616e;    // "tran"

constexpr uint32_t kCheckpointVersion = 1;
constexpr char kMagic[4] = {'M', 'C', 'R', 'N'};

std::vector<FeatureVector> encode_all(
    const Encoder& encoder, const std::vector<std::vector<double>>& inputs) {
  std::vector<FeatureVector> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(encoder.forward(x).feature);
  return out;
}

struct EpochData {
  PseudoDataset source;
  PseudoDataset target;
};

// Start-of-epoch preparation: extract features with the current encoder,
// cluster the target domain, apply any configured label corruption.
EpochData prepare_epoch(const ExperimentConfig& config, const Encoder& encoder,
                        const RawDataset& raw_source,
                        const RawDataset& raw_target, Rng& train_rng) {
  EpochData data;
  const auto source_features = encode_all(encoder, raw_source.inputs);
  data.source = dataset_from_labels(raw_source.true_ids, source_features,
                                    raw_source.true_ids, Domain::Source);
  if (config.source_merge_pairs > 0 || config.source_split_classes > 0) {
    data.source = corrupt_clusters(data.source, config.source_merge_pairs,
                                   config.source_split_classes, train_rng);
  }

  const auto target_features = encode_all(encoder, raw_target.inputs);
  const ClusterLabeling labeling =
      dbscan(target_features, config.dbscan_eps, config.dbscan_min_pts);
  data.target = build_pseudo_dataset(labeling, target_features,
                                     raw_target.true_ids, Domain::Target);
  if (config.target_merge_pairs > 0 || config.target_split_classes > 0) {
    data.target = corrupt_clusters(data.target, config.target_merge_pairs,
                                   config.target_split_classes, train_rng);
  }
  return data;
}

struct TrainContext {
  ExperimentConfig config;
  RawDataset raw_source;
  RawDataset raw_target;
  std::vector<char> target_is_query;
  Encoder encoder;
  AdamState adam;
  Rng train_rng{0};
  int completed_epochs = 0;
  // Memory state after the most recent epoch; rebuilt every epoch, kept only
  // so checkpoints capture it.
  std::optional<CentroidBank> bank;
};

TrainContext make_context(const ExperimentConfig& config) {
  TrainContext ctx;
  ctx.config = config;

  Rng data_rng(Rng::mix(config.seed, kDataTag));
  if (!config.import_path.empty()) {
    auto loaded = import_flat_text(config.import_path);
    ctx.raw_source = std::move(loaded.first);
    ctx.raw_target = std::move(loaded.second);
    if (static_cast<int>(ctx.raw_source.inputs.front().size()) !=
        config.input_dim) {
      throw std::runtime_error(
          "imported samples have dimension " +
          std::to_string(ctx.raw_source.inputs.front().size()) +
          ", config says " + std::to_string(config.input_dim));
    }
  } else {
    auto generated = generate_domains(config.source, config.target, data_rng);
    ctx.raw_source = std::move(generated.first);
    ctx.raw_target = std::move(generated.second);
  }
  if (!config.export_path.empty()) {
    export_flat_text(config.export_path, ctx.raw_source, ctx.raw_target);
  }

  ctx.target_is_query = query_split(ctx.raw_target.true_ids,
                                    config.query_fraction, config.seed);

  Rng encoder_rng(Rng::mix(config.seed, kEncoderTag));
  ctx.encoder = Encoder::init(config.input_dim, config.hidden_dims,
                              config.feature_dim, encoder_rng);
  AdamConfig adam_config{config.adam_beta1, config.adam_beta2, config.adam_eps,
                         config.weight_decay};
  ctx.adam = ctx.encoder.zero_adam_state(adam_config);
  ctx.train_rng = Rng(Rng::mix(config.seed, kTrainTag));
  return ctx;
}

MetricsRecord evaluate_epoch(const TrainContext& ctx, int epoch,
                             double mean_loss, const PseudoDataset& target_ds) {
  const auto source_features = encode_all(ctx.encoder, ctx.raw_source.inputs);
  const auto target_features = encode_all(ctx.encoder, ctx.raw_target.inputs);

  RetrievalProtocol protocol;
  for (std::size_t i = 0; i < ctx.raw_target.size(); ++i) {
    RetrievalItem item;
    item.feature = target_features[i];
    item.identity = ctx.raw_target.true_ids[i];
    item.record_id = static_cast<int>(i);
    if (ctx.target_is_query[i]) {
      protocol.queries.push_back(std::move(item));
    } else {
      protocol.gallery.push_back(std::move(item));
    }
  }
  const RetrievalResult retrieval = map_cmc(protocol, 10);

  MetricsRecord record;
  record.epoch = epoch;
  record.mean_loss = mean_loss;
  record.mean_ap = retrieval.mean_ap;
  record.cmc1 = retrieval.cmc[0];
  record.cmc5 = retrieval.cmc[4];
  record.cmc10 = retrieval.cmc[9];
  record.purity = cluster_purity(target_ds);
  record.n_target_classes = target_ds.n_classes;
  record.domain_distance = domain_distance(source_features, target_features);
  return record;
}

// One epoch: preparation, the sampled contrastive iterations, evaluation.
MetricsRecord run_epoch(TrainContext& ctx, int epoch) {
  const ExperimentConfig& config = ctx.config;
  EpochData data = prepare_epoch(config, ctx.encoder, ctx.raw_source,
                                 ctx.raw_target, ctx.train_rng);
  if (data.source.n_classes < config.p || data.target.n_classes < config.p) {
    throw std::runtime_error(
        "epoch " + std::to_string(epoch) + ": " +
        std::to_string(data.source.n_classes) + " source / " +
        std::to_string(data.target.n_classes) +
        " target classes, need at least p = " + std::to_string(config.p));
  }

  CentroidBank bank(data.source, data.target, config.k);

  const int group = config.p * config.k;
  const int iterations =
      config.iterations > 0
          ? config.iterations
          : (static_cast<int>(data.target.size()) + group - 1) / group;
  const double lr =
      lr_at(epoch - 1, config.lr, config.lr_decay, config.lr_decay_every);
  const LossConfig loss_config = config.loss_config();
  const double grad_scale = 1.0 / static_cast<double>(group);

  double loss_sum = 0.0;
  for (int iter = 0; iter < iterations; ++iter) {
    const std::vector<QueryRef> batch_source =
        pk_sample(data.source, config.p, config.k, ctx.train_rng);
    const std::vector<QueryRef> batch_target =
        pk_sample(data.target, config.p, config.k, ctx.train_rng);

    std::vector<ForwardCache> caches;
    caches.reserve(2 * group);
    std::vector<EncodedQuery> source_queries;
    std::vector<EncodedQuery> target_queries;
    source_queries.reserve(group);
    target_queries.reserve(group);
    for (const QueryRef& ref : batch_source) {
      const auto x = augment(ctx.raw_source.inputs[ref.raw_index],
                             config.augment_sigma, ctx.train_rng);
      caches.push_back(ctx.encoder.forward(x));
      source_queries.push_back({caches.back().feature, ref.class_id});
    }
    for (const QueryRef& ref : batch_target) {
      const auto x = augment(ctx.raw_target.inputs[ref.raw_index],
                             config.augment_sigma, ctx.train_rng);
      caches.push_back(ctx.encoder.forward(x));
      target_queries.push_back({caches.back().feature, ref.class_id});
    }

    const BatchLossReport batch = total_loss(source_queries, target_queries,
                                             bank, loss_config, ctx.train_rng);
    loss_sum += batch.value;

    Gradients grads = ctx.encoder.zero_gradients();
    for (int i = 0; i < group; ++i) {
      grads.add_scaled(
          ctx.encoder.backward(caches[i], batch.source_reports[i].grad_query),
          grad_scale);
    }
    for (int i = 0; i < group; ++i) {
      grads.add_scaled(ctx.encoder.backward(caches[group + i],
                                            batch.target_reports[i].grad_query),
                       grad_scale);
    }
    adam_step(ctx.encoder, ctx.adam, grads, lr);

    // Memory refresh with this iteration's query features, one sampled class
    // per group, source first, both in draw order.
    for (int g = 0; g < config.p; ++g) {
      std::vector<FeatureVector> group_queries;
      group_queries.reserve(config.k);
      for (int i = 0; i < config.k; ++i) {
        group_queries.push_back(source_queries[g * config.k + i].feature);
      }
      bank.update_class(Domain::Source, batch_source[g * config.k].class_id,
                        group_queries, config.momentum);
    }
    for (int g = 0; g < config.p; ++g) {
      std::vector<FeatureVector> group_queries;
      group_queries.reserve(config.k);
      for (int i = 0; i < config.k; ++i) {
        group_queries.push_back(target_queries[g * config.k + i].feature);
      }
      bank.update_class(Domain::Target, batch_target[g * config.k].class_id,
                        group_queries, config.momentum);
    }
  }

  const double mean_loss =
      iterations > 0 ? loss_sum / static_cast<double>(iterations) : 0.0;
  MetricsRecord record = evaluate_epoch(ctx, epoch, mean_loss, data.target);
  ctx.bank = std::move(bank);
  return record;
}

Checkpoint make_checkpoint(const TrainContext& ctx) {
  Checkpoint state;
  state.format_version = kCheckpointVersion;
  state.config_hash = config_hash(ctx.config);
  state.completed_epochs = ctx.completed_epochs;
  state.encoder = ctx.encoder;
  state.adam = ctx.adam;
  if (ctx.bank.has_value()) {
    state.bank_k = ctx.bank->k();
    state.bank_n_source = ctx.bank->n_classes(Domain::Source);
    state.bank_n_target = ctx.bank->n_classes(Domain::Target);
    state.bank_dim = ctx.bank->feature_dim();
    state.bank_rows = ctx.bank->raw_rows();
  }
  state.rng_state = ctx.train_rng.serialize();
  return state;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  const auto dt = std::chrono::steady_clock::now() - t0;
  return std::chrono::duration<double>(dt).count();
}

RunResult run_loop(TrainContext& ctx, const RunOptions& options) {
  const ExperimentConfig& config = ctx.config;
  if (options.save_at_epoch >= 0) {
    if (options.save_path.empty()) {
      throw std::runtime_error("save_at_epoch set without a save path");
    }
    if (options.save_at_epoch > config.epochs) {
      throw std::runtime_error("save_at_epoch " +
                               std::to_string(options.save_at_epoch) +
                               " is past the last epoch " +
                               std::to_string(config.epochs));
    }
  }

  RunResult result;
  const auto emit = [&](const MetricsRecord& record) {
    if (options.metrics_out != nullptr) {
      *options.metrics_out << metrics_json_line(record) << '\n';
      options.metrics_out->flush();
    }
    if (options.log != nullptr) {
      std::ostringstream line;
      line.setf(std::ios::fixed);
      line.precision(4);
      line << "[epoch " << record.epoch << "/" << config.epochs
           << "] loss=" << record.mean_loss << " map=" << record.mean_ap
           << " cmc1=" << record.cmc1 << " purity=" << record.purity
           << " clusters=" << record.n_target_classes
           << " dd=" << record.domain_distance;
      line.precision(2);
      line << " (" << record.wall_clock_sec << "s)";
      *options.log << line.str() << '\n';
      options.log->flush();
    }
    result.records.push_back(record);
  };

  if (config.epochs == 0) {
    const auto t0 = std::chrono::steady_clock::now();
    const EpochData data = prepare_epoch(config, ctx.encoder, ctx.raw_source,
                                         ctx.raw_target, ctx.train_rng);
    MetricsRecord record = evaluate_epoch(ctx, 0, 0.0, data.target);
    record.wall_clock_sec = seconds_since(t0);
    emit(record);
    if (options.save_at_epoch == 0) {
      save_checkpoint(options.save_path, make_checkpoint(ctx));
    }
    return result;
  }

  if (options.save_at_epoch >= 0 &&
      options.save_at_epoch == ctx.completed_epochs) {
    save_checkpoint(options.save_path, make_checkpoint(ctx));
  }
  for (int epoch = ctx.completed_epochs + 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricsRecord record = run_epoch(ctx, epoch);
    ctx.completed_epochs = epoch;
    record.wall_clock_sec = seconds_since(t0);
    emit(record);
    if (options.save_at_epoch == epoch) {
      save_checkpoint(options.save_path, make_checkpoint(ctx));
    }
  }
  return result;
}

// ---- checkpoint byte helpers (explicit little-endian) ----

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) {
    bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

void put_f32(std::ostream& out, double x) {
  const float f = static_cast<float>(x);
  uint32_t bits = 0;
  std::memcpy(&bits, &f, sizeof(bits));
  put_u32(out, bits);
}

void put_tensor(std::ostream& out, const std::vector<double>& xs) {
  for (double x : xs) put_f32(out, x);
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) {
      throw std::runtime_error("cannot open checkpoint file: " + path);
    }
  }

  void read_exact(char* buf, std::size_t n) {
    in_.read(buf, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw std::runtime_error("checkpoint file is truncated: " + path_);
    }
  }

  uint32_t u32() {
    unsigned char bytes[4];
    read_exact(reinterpret_cast<char*>(bytes), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[i]) << (8 * i);
    return v;
  }

  uint64_t u64() {
    unsigned char bytes[8];
    read_exact(reinterpret_cast<char*>(bytes), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[i]) << (8 * i);
    return v;
  }

  double f32() {
    const uint32_t bits = u32();
    float f = 0.0f;
    std::memcpy(&f, &bits, sizeof(f));
    return static_cast<double>(f);
  }

  std::vector<double> tensor(std::size_t n) {
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = f32();
    return xs;
  }

  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    if (n > 0) read_exact(s.data(), n);
    return s;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  std::string path_;
};

void check_shapes(const std::vector<LayerTensors>& a,
                  const std::vector<LayerTensors>& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::runtime_error(std::string("checkpoint ") + what +
                             " does not match the parameter shapes");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].in != b[i].in || a[i].out != b[i].out) {
      throw std::runtime_error(std::string("checkpoint ") + what +
                               " does not match the parameter shapes");
    }
  }
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

void csv_metrics(std::ostream& out, const MetricsRecord& record) {
  out << record.epoch << ',' << fmt_double(record.mean_loss) << ','
      << fmt_double(record.mean_ap) << ',' << fmt_double(record.cmc1) << ','
      << fmt_double(record.cmc5) << ',' << fmt_double(record.cmc10) << ','
      << fmt_double(record.purity) << ',' << record.n_target_classes << ','
      << fmt_double(record.domain_distance);
}

}  // namespace

std::string metrics_json_line(const MetricsRecord& record) {
  std::ostringstream out;
  out << "{\"epoch\": " << record.epoch
      << ", \"mean_loss\": " << fmt_double(record.mean_loss)
      << ", \"map\": " << fmt_double(record.mean_ap)
      << ", \"cmc1\": " << fmt_double(record.cmc1)
      << ", \"cmc5\": " << fmt_double(record.cmc5)
      << ", \"cmc10\": " << fmt_double(record.cmc10)
      << ", \"purity\": " << fmt_double(record.purity)
      << ", \"n_target_classes\": " << record.n_target_classes
      << ", \"domain_distance\": " << fmt_double(record.domain_distance)
      << "}";
  return out.str();
}

RunResult run_experiment(const ExperimentConfig& config,
                         const RunOptions& options) {
  ExperimentConfig validated = config;
  validate_config(validated);
  TrainContext ctx = make_context(validated);
  return run_loop(ctx, options);
}

RunResult resume_experiment(const ExperimentConfig& config,
                            const std::string& checkpoint_path,
                            const RunOptions& options) {
  ExperimentConfig validated = config;
  validate_config(validated);
  Checkpoint state = load_checkpoint(checkpoint_path);
  if (state.config_hash != config_hash(validated)) {
    throw std::runtime_error(
        "checkpoint was written under a different config (hash mismatch)");
  }
  if (state.completed_epochs > validated.epochs) {
    throw std::runtime_error("checkpoint is ahead of the configured epochs");
  }

  TrainContext ctx = make_context(validated);
  check_shapes(state.encoder.layers(), ctx.encoder.layers(), "encoder");
  ctx.encoder = std::move(state.encoder);
  ctx.adam = std::move(state.adam);
  ctx.adam.config = AdamConfig{validated.adam_beta1, validated.adam_beta2,
                               validated.adam_eps, validated.weight_decay};
  ctx.train_rng = Rng::deserialize(state.rng_state);
  ctx.completed_epochs = state.completed_epochs;
  if (state.bank_k > 0) {
    ctx.bank = CentroidBank::from_rows(state.bank_k, state.bank_n_source,
                                       state.bank_n_target, state.bank_dim,
                                       std::move(state.bank_rows));
  }
  return run_loop(ctx, options);
}

MetricsRecord evaluate_checkpoint(const ExperimentConfig& config,
                                  const std::string& checkpoint_path) {
  ExperimentConfig validated = config;
  validate_config(validated);
  Checkpoint state = load_checkpoint(checkpoint_path);
  if (state.config_hash != config_hash(validated)) {
    throw std::runtime_error(
        "checkpoint was written under a different config (hash mismatch)");
  }
  TrainContext ctx = make_context(validated);
  check_shapes(state.encoder.layers(), ctx.encoder.layers(), "encoder");
  ctx.encoder = std::move(state.encoder);

  // Purity is reported on the plain clustering; label corruption is a
  // training-time injection and is not replayed here.
  const auto target_features = encode_all(ctx.encoder, ctx.raw_target.inputs);
  const ClusterLabeling labeling =
      dbscan(target_features, validated.dbscan_eps, validated.dbscan_min_pts);
  const PseudoDataset target_ds = build_pseudo_dataset(
      labeling, target_features, ctx.raw_target.true_ids, Domain::Target);
  return evaluate_epoch(ctx, state.completed_epochs, 0.0, target_ds);
}

std::string sweep(const ExperimentConfig& base, const std::string& param,
                  const std::vector<double>& values, std::ostream* log) {
  if (param != "k" && param != "alpha") {
    throw std::invalid_argument("sweep parameter must be \"k\" or \"alpha\"");
  }
  if (values.empty()) {
    throw std::invalid_argument("sweep needs at least one value");
  }
  std::ostringstream csv;
  csv << "param,value,epoch,mean_loss,map,cmc1,cmc5,cmc10,purity,"
         "n_target_classes,domain_distance\n";
  for (double value : values) {
    ExperimentConfig config = base;
    if (param == "k") {
      config.k = static_cast<int>(std::llround(value));
    } else {
      config.alpha = value;
    }
    if (log != nullptr) {
      *log << "[sweep] " << param << " = " << fmt_double(value) << '\n';
      log->flush();
    }
    RunOptions options;
    options.log = log;
    const RunResult result = run_experiment(config, options);
    csv << param << ',' << fmt_double(value) << ',';
    csv_metrics(csv, result.records.back());
    csv << '\n';
  }
  return csv.str();
}

std::string ablate(const ExperimentConfig& base, const std::string& preset,
                   int n_seeds, std::ostream* log) {
  if (n_seeds < 1) {
    throw std::invalid_argument("ablate needs at least one seed");
  }
  using Apply = std::function<void(ExperimentConfig&)>;
  std::vector<std::pair<std::string, Apply>> arms;
  if (preset == "table1") {
    const auto shared = [](ExperimentConfig& c) {
      c.scope = LossScope::Ucl;
      c.synthesis = SynthesisMethod::None;
      c.positive = PositiveStrategy::Moderate;
      c.negative = NegativeStrategy::Mean;
    };
    arms.emplace_back("multi", [shared](ExperimentConfig& c) {
      shared(c);
      c.representation = Representation::Multi;
    });
    arms.emplace_back("uni", [shared](ExperimentConfig& c) {
      shared(c);
      c.representation = Representation::Uni;
    });
  } else if (preset == "table2") {
    const auto shared = [](ExperimentConfig& c) {
      c.representation = Representation::Multi;
      c.scope = LossScope::Ucl;
      c.synthesis = SynthesisMethod::None;
    };
    const auto arm = [shared](PositiveStrategy p, NegativeStrategy n) {
      return [shared, p, n](ExperimentConfig& c) {
        shared(c);
        c.positive = p;
        c.negative = n;
      };
    };
    arms.emplace_back("least_mean",
                      arm(PositiveStrategy::Least, NegativeStrategy::Mean));
    arms.emplace_back("moderate_mean",
                      arm(PositiveStrategy::Moderate, NegativeStrategy::Mean));
    arms.emplace_back("most_mean",
                      arm(PositiveStrategy::Most, NegativeStrategy::Mean));
    arms.emplace_back("moderate_all",
                      arm(PositiveStrategy::Moderate, NegativeStrategy::All));
  } else if (preset == "table3") {
    const auto arm = [](SynthesisMethod method) {
      return [method](ExperimentConfig& c) {
        c.representation = Representation::Multi;
        c.scope = LossScope::Dscl;
        c.positive = PositiveStrategy::Moderate;
        c.negative = NegativeStrategy::Mean;
        c.synthesis = method;
      };
    };
    arms.emplace_back("none", arm(SynthesisMethod::None));
    arms.emplace_back("soni", arm(SynthesisMethod::Soni));
    arms.emplace_back("qnni", arm(SynthesisMethod::Qnni));
    arms.emplace_back("rnni", arm(SynthesisMethod::Rnni));
  } else if (preset == "dscl") {
    const auto arm = [](LossScope scope) {
      return [scope](ExperimentConfig& c) {
        c.representation = Representation::Multi;
        c.synthesis = SynthesisMethod::None;
        c.positive = PositiveStrategy::Moderate;
        c.negative = NegativeStrategy::Mean;
        c.scope = scope;
      };
    };
    arms.emplace_back("ucl", arm(LossScope::Ucl));
    arms.emplace_back("dscl", arm(LossScope::Dscl));
  } else {
    throw std::invalid_argument("unknown ablation preset: " + preset);
  }

  std::ostringstream csv;
  csv << "preset,arm,seed,epoch,mean_loss,map,cmc1,cmc5,cmc10,purity,"
         "n_target_classes,domain_distance\n";
  for (const auto& [name, apply] : arms) {
    std::vector<MetricsRecord> finals;
    for (int s = 0; s < n_seeds; ++s) {
      ExperimentConfig config = base;
      apply(config);
      config.seed = base.seed + static_cast<uint64_t>(s);
      if (log != nullptr) {
        *log << "[ablate " << preset << "] arm=" << name
             << " seed=" << config.seed << '\n';
        log->flush();
      }
      const RunResult result = run_experiment(config, {});
      const MetricsRecord& record = result.records.back();
      finals.push_back(record);
      csv << preset << ',' << name << ',' << config.seed << ',';
      csv_metrics(csv, record);
      csv << '\n';
    }
    const auto column = [&](double MetricsRecord::* field) {
      std::vector<double> xs;
      xs.reserve(finals.size());
      for (const auto& r : finals) xs.push_back(r.*field);
      return median_of(xs);
    };
    std::vector<double> classes;
    classes.reserve(finals.size());
    for (const auto& r : finals) {
      classes.push_back(static_cast<double>(r.n_target_classes));
    }
    csv << preset << ',' << name << ",median," << finals.back().epoch << ','
        << fmt_double(column(&MetricsRecord::mean_loss)) << ','
        << fmt_double(column(&MetricsRecord::mean_ap)) << ','
        << fmt_double(column(&MetricsRecord::cmc1)) << ','
        << fmt_double(column(&MetricsRecord::cmc5)) << ','
        << fmt_double(column(&MetricsRecord::cmc10)) << ','
        << fmt_double(column(&MetricsRecord::purity)) << ','
        << fmt_double(median_of(classes)) << ','
        << fmt_double(column(&MetricsRecord::domain_distance)) << '\n';
  }
  return csv.str();
}

void save_checkpoint(const std::string& path, const Checkpoint& state) {
  const std::size_t expected_rows =
      static_cast<std::size_t>(state.bank_n_source + state.bank_n_target) *
      static_cast<std::size_t>(state.bank_k);
  if (state.bank_rows.size() != expected_rows) {
    throw std::invalid_argument("checkpoint bank rows do not match its shape");
  }
  check_shapes(state.adam.m, state.encoder.layers(), "first moments");
  check_shapes(state.adam.v, state.encoder.layers(), "second moments");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open checkpoint file for writing: " +
                             path);
  }
  out.write(kMagic, 4);
  put_u32(out, state.format_version);
  put_u64(out, state.config_hash);
  put_u32(out, static_cast<uint32_t>(state.completed_epochs));
  put_u64(out, static_cast<uint64_t>(state.adam.step));

  const auto& layers = state.encoder.layers();
  put_u32(out, static_cast<uint32_t>(layers.size()));
  for (const auto& layer : layers) {
    put_u32(out, static_cast<uint32_t>(layer.in));
    put_u32(out, static_cast<uint32_t>(layer.out));
  }
  put_u32(out, static_cast<uint32_t>(state.bank_k));
  put_u32(out, static_cast<uint32_t>(state.bank_n_source));
  put_u32(out, static_cast<uint32_t>(state.bank_n_target));
  put_u32(out, static_cast<uint32_t>(state.bank_dim));

  for (const auto& layer : layers) {
    put_tensor(out, layer.w);
    put_tensor(out, layer.b);
  }
  for (const auto& row : state.bank_rows) {
    if (static_cast<int>(row.size()) != state.bank_dim) {
      throw std::invalid_argument("checkpoint bank row has the wrong size");
    }
    put_tensor(out, row);
  }
  for (const auto& layer : state.adam.m) {
    put_tensor(out, layer.w);
    put_tensor(out, layer.b);
  }
  for (const auto& layer : state.adam.v) {
    put_tensor(out, layer.w);
    put_tensor(out, layer.b);
  }

  put_u32(out, static_cast<uint32_t>(state.rng_state.size()));
  out.write(state.rng_state.data(),
            static_cast<std::streamsize>(state.rng_state.size()));
  out.flush();
  if (!out) {
    throw std::runtime_error("failed writing checkpoint file: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  ByteReader reader(path);
  char magic[4];
  reader.read_exact(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  }
  Checkpoint state;
  state.format_version = reader.u32();
  if (state.format_version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint format version " +
                             std::to_string(state.format_version));
  }
  state.config_hash = reader.u64();
  state.completed_epochs = static_cast<int>(reader.u32());
  const uint64_t adam_step = reader.u64();

  const uint32_t n_layers = reader.u32();
  if (n_layers == 0 || n_layers > 64) {
    throw std::runtime_error("checkpoint has an implausible layer count");
  }
  std::vector<LayerTensors> layers(n_layers);
  for (auto& layer : layers) {
    layer.in = static_cast<int>(reader.u32());
    layer.out = static_cast<int>(reader.u32());
    if (layer.in <= 0 || layer.out <= 0 || layer.in > (1 << 20) ||
        layer.out > (1 << 20)) {
      throw std::runtime_error("checkpoint has an implausible layer shape");
    }
  }
  state.bank_k = static_cast<int>(reader.u32());
  state.bank_n_source = static_cast<int>(reader.u32());
  state.bank_n_target = static_cast<int>(reader.u32());
  state.bank_dim = static_cast<int>(reader.u32());
  if (state.bank_k < 0 || state.bank_n_source < 0 || state.bank_n_target < 0 ||
      state.bank_dim < 0 || state.bank_k > (1 << 16) ||
      state.bank_n_source > (1 << 20) || state.bank_n_target > (1 << 20) ||
      state.bank_dim > (1 << 20)) {
    throw std::runtime_error("checkpoint has an implausible memory shape");
  }
  const std::size_t n_rows =
      static_cast<std::size_t>(state.bank_n_source + state.bank_n_target) *
      static_cast<std::size_t>(state.bank_k);
  if (n_rows > (1u << 24)) {
    throw std::runtime_error("checkpoint has an implausible memory size");
  }

  const auto read_stack = [&](std::vector<LayerTensors>& stack) {
    for (auto& layer : stack) {
      layer.w = reader.tensor(static_cast<std::size_t>(layer.in) *
                              static_cast<std::size_t>(layer.out));
      layer.b = reader.tensor(static_cast<std::size_t>(layer.out));
    }
  };
  read_stack(layers);
  state.encoder.mutable_layers() = layers;

  state.bank_rows.reserve(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    state.bank_rows.push_back(
        reader.tensor(static_cast<std::size_t>(state.bank_dim)));
  }

  for (auto& layer : layers) {
    layer.w.assign(layer.w.size(), 0.0);
    layer.b.assign(layer.b.size(), 0.0);
  }
  state.adam.m = layers;
  state.adam.v = layers;
  read_stack(state.adam.m);
  read_stack(state.adam.v);
  state.adam.step = static_cast<int64_t>(adam_step);

  const uint32_t rng_len = reader.u32();
  if (rng_len > (1u << 20)) {
    throw std::runtime_error("checkpoint has an implausible rng state size");
  }
  state.rng_state = reader.bytes(rng_len);
  if (!reader.at_end()) {
    throw std::runtime_error("checkpoint has trailing bytes: " + path);
  }
  return state;
}

CheckpointHeader read_checkpoint_header(const std::string& path) {
  ByteReader reader(path);
  char magic[4];
  reader.read_exact(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  }
  CheckpointHeader header;
  header.format_version = reader.u32();
  header.config_hash = reader.u64();
  header.completed_epochs = static_cast<int>(reader.u32());
  return header;
}

std::vector<char> query_split(const std::vector<int>& true_ids,
                              double query_fraction, uint64_t seed) {
  if (!(query_fraction > 0.0) || !(query_fraction < 1.0)) {
    throw std::invalid_argument("query fraction must lie in (0, 1)");
  }
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < true_ids.size(); ++i) {
    by_id[true_ids[i]].push_back(i);
  }
  std::vector<char> is_query(true_ids.size(), 0);
  for (const auto& [id, indices] : by_id) {
    const std::size_t n = indices.size();
    if (n < 2) continue;  // a lone sample stays in the gallery
    std::size_t n_query =
        static_cast<std::size_t>(query_fraction * static_cast<double>(n));
    if (n_query < 1) n_query = 1;
    if (n_query > n - 1) n_query = n - 1;
    std::vector<std::pair<uint64_t, std::size_t>> keyed;
    keyed.reserve(n);
    for (std::size_t index : indices) {
      keyed.emplace_back(Rng::mix(seed, static_cast<uint64_t>(index)), index);
    }
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t j = 0; j < n_query; ++j) {
      is_query[keyed[j].second] = 1;
    }
  }
  return is_query;
}

}  // namespace mcrn
