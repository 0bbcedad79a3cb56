#include "mcrn/encoder.hpp"

#include <cmath>

#include "mcrn/numerics.hpp"

namespace mcrn {

void Gradients::add_scaled(const Gradients& other, double scale) {
  if (layers.size() != other.layers.size()) {
    throw std::invalid_argument("gradients: layer count mismatch");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.w.size() != b.w.size() || a.b.size() != b.b.size()) {
      throw std::invalid_argument("gradients: shape mismatch");
    }
    for (std::size_t i = 0; i < a.w.size(); ++i) a.w[i] += scale * b.w[i];
    for (std::size_t i = 0; i < a.b.size(); ++i) a.b[i] += scale * b.b[i];
  }
}

namespace {

// Random semi-orthogonal matrix (rows x cols, row-major): gaussian draws with
// the shorter side's vectors orthonormalized by modified Gram-Schmidt. The
// map preserves lengths and angles on its principal subspace, so a freshly
// initialized stack keeps distinct input directions distinct instead of
// collapsing them, which a product of unstructured random matrices does.
std::vector<double> semi_orthogonal(int rows, int cols, Rng& rng) {
  const bool tall = rows >= cols;
  const int n_vecs = tall ? cols : rows;
  const int length = tall ? rows : cols;

  std::vector<std::vector<double>> basis;
  basis.reserve(n_vecs);
  while (static_cast<int>(basis.size()) < n_vecs) {
    std::vector<double> v(length);
    for (double& x : v) x = rng.gaussian();
    for (const auto& prev : basis) {
      const double proj = dot(v, prev);
      for (int i = 0; i < length; ++i) v[i] -= proj * prev[i];
    }
    const double n2 = squared_norm(v);
    if (n2 <= 1e-12) continue;  // dependent draw, try again
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
    basis.push_back(std::move(v));
  }

  std::vector<double> w(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      w[static_cast<std::size_t>(r) * cols + c] =
          tall ? basis[c][r] : basis[r][c];
    }
  }
  return w;
}

}  // namespace

Encoder Encoder::init(int input_dim, const std::vector<int>& hidden_dims,
                      int feature_dim, Rng& rng) {
  if (input_dim < 1 || feature_dim < 1) {
    throw std::invalid_argument("encoder: bad dimensions");
  }
  std::vector<int> dims;
  dims.push_back(input_dim);
  for (int h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("encoder: bad hidden dim");
    dims.push_back(h);
  }
  dims.push_back(feature_dim);

  Encoder enc;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerTensors layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.w = semi_orthogonal(layer.out, layer.in, rng);
    layer.b.assign(layer.out, 0.0);
    quantize_f32(layer.w);
    enc.layers_.push_back(std::move(layer));
  }
  return enc;
}

ForwardCache Encoder::forward(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw std::invalid_argument("encoder: input dimension mismatch");
  }
  check_finite(x, "encoder input");

  ForwardCache cache;
  cache.params_version = version_;
  cache.input = x;

  const std::vector<double>* activation = &cache.input;
  const std::size_t n_layers = layers_.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const LayerTensors& layer = layers_[l];
    std::vector<double> z(layer.out);
    for (int o = 0; o < layer.out; ++o) {
      double acc = layer.b[o];
      const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) acc += wrow[i] * (*activation)[i];
      z[o] = acc;
    }
    if (l + 1 < n_layers) {
      for (double& v : z) v = std::tanh(v);
      cache.hidden.push_back(std::move(z));
      activation = &cache.hidden.back();
    } else {
      cache.prenorm = std::move(z);
    }
  }

  const double n2 = squared_norm(cache.prenorm);
  if (n2 == 0.0) {
    throw DegenerateInput("encoder: pre-normalization output is zero");
  }
  cache.prenorm_norm = std::sqrt(n2);
  cache.feature = l2_normalize(cache.prenorm);
  return cache;
}

Gradients Encoder::backward(const ForwardCache& cache,
                            const FeatureVector& grad_feature) const {
  if (cache.params_version != version_) {
    throw std::invalid_argument(
        "encoder: cache is stale (parameters changed since forward)");
  }
  if (grad_feature.size() != cache.feature.size()) {
    throw std::invalid_argument("encoder: gradient dimension mismatch");
  }

  // Through f = z / |z|: grad_z = (grad_f - (f . grad_f) f) / |z|.
  const std::size_t dim = cache.feature.size();
  double along = 0.0;
  for (std::size_t i = 0; i < dim; ++i) along += cache.feature[i] * grad_feature[i];
  std::vector<double> delta(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    delta[i] = (grad_feature[i] - along * cache.feature[i]) / cache.prenorm_norm;
  }

  Gradients grads = zero_gradients();
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const LayerTensors& layer = layers_[static_cast<std::size_t>(l)];
    const std::vector<double>& below =
        l == 0 ? cache.input : cache.hidden[static_cast<std::size_t>(l - 1)];
    LayerTensors& g = grads.layers[static_cast<std::size_t>(l)];
    for (int o = 0; o < layer.out; ++o) {
      g.b[o] = delta[o];
      double* grow = g.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) grow[i] = delta[o] * below[i];
    }
    if (l == 0) break;
    std::vector<double> next(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) next[i] += wrow[i] * delta[o];
    }
    // Through tanh: multiply by 1 - a^2 using the stored activation.
    const std::vector<double>& act = cache.hidden[static_cast<std::size_t>(l - 1)];
    for (int i = 0; i < layer.in; ++i) next[i] *= 1.0 - act[i] * act[i];
    delta = std::move(next);
  }
  return grads;
}

Gradients Encoder::zero_gradients() const {
  Gradients g;
  for (const auto& layer : layers_) {
    LayerTensors t;
    t.in = layer.in;
    t.out = layer.out;
    t.w.assign(layer.w.size(), 0.0);
    t.b.assign(layer.b.size(), 0.0);
    g.layers.push_back(std::move(t));
  }
  return g;
}

AdamState Encoder::zero_adam_state(const AdamConfig& config) const {
  AdamState s;
  s.config = config;
  const Gradients z = zero_gradients();
  s.m = z.layers;
  s.v = z.layers;
  return s;
}

void adam_update(std::vector<double>& param, std::vector<double>& m,
                 std::vector<double>& v, const std::vector<double>& grad,
                 int64_t step, double lr, const AdamConfig& config) {
  if (param.size() != grad.size() || m.size() != grad.size() ||
      v.size() != grad.size()) {
    throw std::invalid_argument("adam: shape mismatch");
  }
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= lr * (mhat / (std::sqrt(vhat) + config.eps) +
                      config.weight_decay * param[i]);
    param[i] = quantize_f32(param[i]);
    m[i] = quantize_f32(m[i]);
    v[i] = quantize_f32(v[i]);
  }
}

void adam_step(Encoder& encoder, AdamState& state, const Gradients& grads,
               double lr) {
  auto& layers = encoder.mutable_layers();
  if (grads.layers.size() != layers.size()) {
    throw std::invalid_argument("adam: gradient layer count mismatch");
  }
  ++state.step;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam_update(layers[l].w, state.m[l].w, state.v[l].w, grads.layers[l].w,
                state.step, lr, state.config);
    adam_update(layers[l].b, state.m[l].b, state.v[l].b, grads.layers[l].b,
                state.step, lr, state.config);
  }
  encoder.bump_version();
}

double lr_at(int epoch, double base_lr, double factor, int every) {
  if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
  if (every < 1) throw std::invalid_argument("lr_at: decay interval must be >= 1");
  return base_lr * std::pow(factor, static_cast<double>(epoch / every));
}

}  // namespace mcrn
