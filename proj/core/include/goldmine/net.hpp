#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace goldmine::net {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class HeadKind {
  scalar,   // one linear output
  vector,   // out_dim linear outputs
  softmax,  // log-probabilities over `bins` discrete values of the target
  mixture,  // diagonal Gaussian mixture over an out_dim target
};

struct HeadSpec {
  HeadKind kind = HeadKind::scalar;
  int out_dim = 1;     // vector outputs, or target dimension for the mixture
  int bins = 0;        // softmax
  int components = 0;  // mixture

  static HeadSpec scalar() { return {HeadKind::scalar, 1, 0, 0}; }
  static HeadSpec vector(int dim) { return {HeadKind::vector, dim, 0, 0}; }
  static HeadSpec softmax(int bins) { return {HeadKind::softmax, 1, bins, 0}; }
  static HeadSpec mixture(int components, int dim) { return {HeadKind::mixture, dim, 0, components}; }

  int raw_dim() const;
  /// Rows of the target matrix consumed by the head's log-value.
  int target_dim() const;
  bool operator==(const HeadSpec&) const = default;
};

/// Dense tanh network. The input column is [features; theta]; theta may be
/// empty (pure feature maps) and features may be empty (conditional
/// densities, where the observable is the head's target instead).
struct NetworkSpec {
  int feature_dim = 0;
  int theta_dim = 0;
  std::vector<int> hidden;
  HeadSpec head;

  void validate() const;
  int input_dim() const { return feature_dim + theta_dim; }
  std::size_t n_weights() const;
  bool operator==(const NetworkSpec&) const = default;
};

/// Elementwise standardization x' = (x - shift) / scale.
struct Standardizer {
  Vector shift;
  Vector scale;

  static Standardizer identity(int dim);
  static Standardizer fit(const Matrix& columns);  // rows are coordinates
  Matrix apply(const Matrix& columns) const;
};

inline constexpr double kMixtureScaleFloor = 1e-3;

class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const Vector& weights() const { return weights_; }
  Vector& weights() { return weights_; }

  Standardizer input_scaling;
  Standardizer target_scaling;  // mixture head only

  int n_layers() const { return static_cast<int>(offsets_.size()); }
  int layer_in(int l) const { return dims_[l]; }
  int layer_out(int l) const { return dims_[l + 1]; }
  Eigen::Map<const Matrix> layer_weight(int l) const;
  Eigen::Map<const Vector> layer_bias(int l) const;
  std::size_t weight_offset(int l) const { return offsets_[l]; }

 private:
  NetworkSpec spec_;
  std::vector<int> dims_;
  std::vector<std::size_t> offsets_;
  Vector weights_;
};

/// Uniform(-sqrt(6/(fan_in+fan_out)), +sqrt(...)) weights, zero biases.
void init_glorot(Network& net, std::uint64_t seed);

/// Activations of one forward pass over a batch (one example per column),
/// plus forward-mode tangents d/dtheta_k when requested.
struct Tape {
  Matrix input;                               // standardized
  std::vector<Matrix> hidden;                 // tanh outputs per hidden layer
  Matrix raw;                                 // head pre-activations
  std::vector<std::vector<Matrix>> hidden_dot;  // [layer][k]
  std::vector<Matrix> raw_dot;                // [k]

  int batch() const { return static_cast<int>(input.cols()); }
  bool has_tangents() const { return !raw_dot.empty(); }
};

Tape forward_tape(const Network& net, const Matrix& inputs, bool theta_tangents);

/// Reverse pass. grad_raw holds dL/d raw; grad_raw_dot[k] holds dL/d raw_dot[k]
/// (may be empty when the loss does not touch the tangents).
Vector backward(const Network& net, const Tape& tape, const Matrix& grad_raw,
                const std::vector<Matrix>& grad_raw_dot = {});

/// Per-example scalar read-out of the head: the raw output for scalar heads,
/// log p(target | theta) for softmax and mixture heads.
struct HeadValue {
  RowVector value;
  Matrix grad;  // d value / d raw, raw_dim x batch
};

HeadValue head_value(const Network& net, const Matrix& raw, const Matrix& targets);

/// Hessian of the per-example head value w.r.t. raw outputs applied to dir.
Matrix head_hvp(const Network& net, const Matrix& raw, const Matrix& targets, const Matrix& dir);

/// Stacks feature and theta columns into the network input layout.
Matrix make_inputs(const Matrix& features, const Matrix& thetas);

// ---- single-example conveniences ----

/// Natural head output: [value] for scalar, the vector output, log-probabilities
/// for softmax, or the raw mixture parameters.
Vector forward(const Network& net, const Vector& features, const Vector& theta);

struct MixtureParams {
  Vector log_weights;  // C
  Matrix means;        // out_dim x C, target units
  Matrix scales;       // out_dim x C, target units
};
MixtureParams mixture_params(const Network& net, const Vector& features, const Vector& theta);

/// Head value (see head_value) for one example.
double log_value(const Network& net, const Vector& features, const Vector& theta,
                 const Vector& target = {});

/// d log_value / d theta via forward-mode tangents.
Vector theta_gradient(const Network& net, const Vector& features, const Vector& theta,
                      const Vector& target = {});

/// Gradient of sum_b loss(value_b) w.r.t. weights. The callback receives the
/// per-example head values and must fill dL/dvalue; it returns the loss.
using ValueLoss = std::function<double(const RowVector& value, RowVector& dloss)>;
struct LossGradient {
  double loss = 0.0;
  Vector gradient;
};
LossGradient grad_weights(const Network& net, const Matrix& inputs, const Matrix& targets,
                          const ValueLoss& loss);

/// Penalty |target_score - theta_gradient|^2 for one example and its exact
/// gradient w.r.t. the weights (reverse-mode over the tangent pass).
LossGradient grad_weights_of_score_penalty(const Network& net, const Vector& features,
                                           const Vector& theta, const Vector& target,
                                           const Vector& target_score);

// ---- optimizer ----

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t step = 0;

  static AdamState zeros(std::size_t n);
};

void adam_step(AdamState& state, Vector& weights, const Vector& gradient, const AdamConfig& config);

}  // namespace goldmine::net
