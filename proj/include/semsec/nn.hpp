#pragma once

#include "semsec/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace semsec::nn {

enum class LayerKind : std::uint8_t {
  dense = 0,
  relu = 1,
  tanh = 2,
  sigmoid = 3,
  reshape = 4,
  // Learned lookup table. Input rows hold token ids (stored as doubles),
  // output is the concatenation of their embedding vectors.
  embedding = 5,
};

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  Index in = 0;
  Index out = 0;
  Index vocab = 0;  // embedding only

  static LayerSpec dense(Index in, Index out) { return {LayerKind::dense, in, out, 0}; }
  static LayerSpec relu(Index n) { return {LayerKind::relu, n, n, 0}; }
  static LayerSpec tanh(Index n) { return {LayerKind::tanh, n, n, 0}; }
  static LayerSpec sigmoid(Index n) { return {LayerKind::sigmoid, n, n, 0}; }
  static LayerSpec reshape(Index n) { return {LayerKind::reshape, n, n, 0}; }
  static LayerSpec embedding(Index vocab, Index dim, Index tokens) {
    return {LayerKind::embedding, tokens, tokens * dim, vocab};
  }

  // Number of learnable scalars owned by this layer.
  Index param_count() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Throws ConfigError when consecutive layers disagree on sizes.
void validate(std::span<const LayerSpec> spec);

enum class OptimizerKind : std::uint8_t { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;

  void validate() const;
};

/// Sequential stack of differentiable layers.
///
/// Tensors are laid out one sample per column (features x batch). All
/// parameters live in one contiguous vector; each parametric layer owns a
/// slice of it (dense: column-major W of out x in, then b; embedding:
/// column-major table of dim x vocab). Gradients mirror that layout and
/// accumulate across backward calls until cleared.
///
/// A Network is single-writer: forward, backward and optimizer steps must not
/// run concurrently on one instance.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<LayerSpec> spec);

  Matrix forward(const Matrix& input);
  Matrix backward(const Matrix& output_grad);

  void zero_grad() { grads_.setZero(); }

  // A frozen network still propagates input gradients but never accumulates
  // parameter gradients.
  void set_trainable(bool trainable) { trainable_ = trainable; }
  bool trainable() const { return trainable_; }

  Index input_size() const { return layers_.empty() ? 0 : layers_.front().in; }
  Index output_size() const { return layers_.empty() ? 0 : layers_.back().out; }
  Index param_count() const { return params_.size(); }

  const std::vector<LayerSpec>& layers() const { return layers_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  Vector& grads() { return grads_; }
  const Vector& grads() const { return grads_; }

  // Offset of the parameter slice of layer i (meaningful for parametric layers).
  Index param_offset(std::size_t layer) const { return offsets_.at(layer); }

  Eigen::Map<Matrix> weight(std::size_t layer);
  Eigen::Map<Vector> bias(std::size_t layer);

  // Adam moments and step counter.
  struct OptState {
    Vector m;
    Vector v;
    long step = 0;
  };
  const OptState& opt_state() const { return opt_; }
  void reset_optimizer();

  friend void optimizer_step(Network& net, const OptimizerConfig& cfg);

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Index> offsets_;
  Vector params_;
  Vector grads_;
  OptState opt_;
  bool trainable_ = true;

  // Per-layer inputs plus final output of the last forward pass.
  std::vector<Matrix> cache_;
  bool has_cache_ = false;
};

Network init_network(std::vector<LayerSpec> spec, std::uint64_t seed);

// Applies one sgd/adam update with L2 decay added to the gradient, then clears
// the gradients. Throws NumericalError (leaving params untouched) on
// non-finite gradients.
void optimizer_step(Network& net, const OptimizerConfig& cfg);

// Scalar loss of a network output. Writes dLoss/dOutput into *grad when it is
// non-null.
using LossFn = std::function<double(const Matrix& output, Matrix* grad)>;

LossFn mse_loss(const Matrix& target);

// Central finite differences of `loss` with respect to every entry of
// `params`, perturbing in place and restoring afterwards.
Vector numerical_gradient(const std::function<double()>& loss, Vector& params, double eps);

// max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8)
double max_relative_error(const Vector& analytic, const Vector& numerical);

/// Compares analytic parameter gradients of `net` under `loss` with central
/// differences and returns the maximum relative error.
double grad_check(Network& net, const Matrix& input, const LossFn& loss, double eps = 1e-5);

// Versioned little-endian checkpoint records, see docs/checkpoint-format.md.
void save_network(std::ostream& out, const Network& net);
Network load_network(std::istream& in);

}  // namespace semsec::nn
