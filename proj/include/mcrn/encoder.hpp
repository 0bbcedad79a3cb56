#pragma once

#include "mcrn/common.hpp"

namespace mcrn {

struct LayerTensors {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // row-major, out x in
  std::vector<double> b;  // out
};

struct ForwardCache {
  uint64_t params_version = 0;
  std::vector<double> input;
  std::vector<std::vector<double>> hidden;  // post-tanh activations per layer
  std::vector<double> prenorm;              // final linear output
  double prenorm_norm = 0.0;
  FeatureVector feature;  // unit-normalized output
};

struct Gradients {
  std::vector<LayerTensors> layers;
  // this += other * scale, shapes must match
  void add_scaled(const Gradients& other, double scale);
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled; applied directly to parameters
};

struct AdamState {
  std::vector<LayerTensors> m;
  std::vector<LayerTensors> v;
  int64_t step = 0;
  AdamConfig config;
};

// MLP: input -> hidden layers with tanh -> linear -> l2_normalize. Parameters
// are float32-representable doubles (see quantize_f32). A version counter
// ties forward caches to the parameters that produced them.
class Encoder {
 public:
  static Encoder init(int input_dim, const std::vector<int>& hidden_dims,
                      int feature_dim, Rng& rng);

  int input_dim() const { return layers_.front().in; }
  int feature_dim() const { return layers_.back().out; }
  uint64_t version() const { return version_; }
  const std::vector<LayerTensors>& layers() const { return layers_; }
  std::vector<LayerTensors>& mutable_layers() { return layers_; }
  void bump_version() { ++version_; }

  // Throws DegenerateInput when the pre-normalization output is exactly zero
  // (e.g. an all-zero final layer).
  ForwardCache forward(const std::vector<double>& x) const;

  // Backpropagates d loss / d feature through the normalization and the
  // stack. The cache must come from the current parameter version.
  Gradients backward(const ForwardCache& cache,
                     const FeatureVector& grad_feature) const;

  Gradients zero_gradients() const;
  AdamState zero_adam_state(const AdamConfig& config) const;

 private:
  std::vector<LayerTensors> layers_;
  uint64_t version_ = 1;
};

// One Adam step with decoupled weight decay on every tensor, followed by
// float32 rounding of parameters and moments. Bumps the encoder version.
void adam_step(Encoder& encoder, AdamState& state, const Gradients& grads,
               double lr);

// In-place Adam update rule for one tensor; exposed so the update math can be
// exercised on scalar problems.
void adam_update(std::vector<double>& param, std::vector<double>& m,
                 std::vector<double>& v, const std::vector<double>& grad,
                 int64_t step, double lr, const AdamConfig& config);

// Step-decay schedule: base_lr * factor^floor(epoch / every). Epochs count
// from zero.
double lr_at(int epoch, double base_lr, double factor, int every);

}  // namespace mcrn
