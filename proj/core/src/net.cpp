#include "goldmine/net.hpp"

#include <cmath>
#include <string>

#include "goldmine/error.hpp"
#include "goldmine/rng.hpp"

namespace goldmine::net {

int HeadSpec::raw_dim() const {
  switch (kind) {
    case HeadKind::scalar: return 1;
    case HeadKind::vector: return out_dim;
    case HeadKind::softmax: return bins;
    case HeadKind::mixture: return components * (1 + 2 * out_dim);
  }
  return 0;
}

int HeadSpec::target_dim() const {
  switch (kind) {
    case HeadKind::softmax: return 1;
    case HeadKind::mixture: return out_dim;
    default: return 0;
  }
}

void NetworkSpec::validate() const {
  if (feature_dim < 0 || theta_dim < 0 || input_dim() < 1) {
    throw Error(ErrorCode::config, "net: input dimension must be >= 1");
  }
  for (int w : hidden) {
    if (w < 1) throw Error(ErrorCode::config, "net: hidden widths must be >= 1");
  }
  switch (head.kind) {
    case HeadKind::scalar: break;
    case HeadKind::vector:
      if (head.out_dim < 1) throw Error(ErrorCode::config, "net: vector head needs out_dim >= 1");
      break;
    case HeadKind::softmax:
      if (head.bins < 2) throw Error(ErrorCode::config, "net: softmax head needs >= 2 bins");
      break;
    case HeadKind::mixture:
      if (head.components < 1) throw Error(ErrorCode::config, "net: mixture needs >= 1 component");
      if (head.out_dim < 1) throw Error(ErrorCode::config, "net: mixture needs out_dim >= 1");
      break;
  }
}

std::size_t NetworkSpec::n_weights() const {
  std::size_t n = 0;
  int in = input_dim();
  for (int w : hidden) {
    n += static_cast<std::size_t>(w) * (in + 1);
    in = w;
  }
  return n + static_cast<std::size_t>(head.raw_dim()) * (in + 1);
}

Standardizer Standardizer::identity(int dim) {
  return {Vector::Zero(dim), Vector::Ones(dim)};
}

Standardizer Standardizer::fit(const Matrix& columns) {
  const Eigen::Index d = columns.rows();
  const double n = static_cast<double>(columns.cols());
  Standardizer s{Vector::Zero(d), Vector::Ones(d)};
  if (columns.cols() == 0) return s;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double mean = columns.row(i).sum() / n;
    const double var = (columns.row(i).array() - mean).square().sum() / n;
    s.shift(i) = mean;
    s.scale(i) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& columns) const {
  return ((columns.colwise() - shift).array().colwise() / scale.array()).matrix();
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  dims_.push_back(spec_.input_dim());
  for (int w : spec_.hidden) dims_.push_back(w);
  dims_.push_back(spec_.head.raw_dim());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(dims_[l + 1]) * (dims_[l] + 1);
  }
  weights_ = Vector::Zero(static_cast<Eigen::Index>(off));
  input_scaling = Standardizer::identity(spec_.input_dim());
  target_scaling = Standardizer::identity(spec_.head.kind == HeadKind::mixture ? spec_.head.out_dim : 0);
}

Eigen::Map<const Matrix> Network::layer_weight(int l) const {
  return {weights_.data() + offsets_[l], dims_[l + 1], dims_[l]};
}

Eigen::Map<const Vector> Network::layer_bias(int l) const {
  return {weights_.data() + offsets_[l] + static_cast<std::size_t>(dims_[l + 1]) * dims_[l], dims_[l + 1]};
}

void init_glorot(Network& net, std::uint64_t seed) {
  Rng rng(seed);
  Vector& w = net.weights();
  w.setZero();
  for (int l = 0; l < net.n_layers(); ++l) {
    const int in = net.layer_in(l);
    const int out = net.layer_out(l);
    const double limit = std::sqrt(6.0 / (in + out));
    const std::size_t off = net.weight_offset(l);
    for (std::size_t i = 0; i < static_cast<std::size_t>(in) * out; ++i) {
      w(static_cast<Eigen::Index>(off + i)) = rng.uniform(-limit, limit);
    }
  }
}

Tape forward_tape(const Network& net, const Matrix& inputs, bool theta_tangents) {
  const auto& spec = net.spec();
  if (inputs.rows() != spec.input_dim()) {
    throw Error(ErrorCode::config, "net: input has " + std::to_string(inputs.rows()) +
                                       " rows, network expects " + std::to_string(spec.input_dim()));
  }
  const int n_hidden = static_cast<int>(spec.hidden.size());
  const int n_dirs = theta_tangents ? spec.theta_dim : 0;
  const Eigen::Index batch = inputs.cols();

  Tape tape;
  tape.input = net.input_scaling.apply(inputs);
  tape.hidden.reserve(n_hidden);
  tape.hidden_dot.resize(n_hidden);

  // Layer-0 tangent of the standardized input along theta_k is the constant
  // column e_{feature_dim + k} / scale; it only selects a weight column.
  auto first_layer_dot = [&](int k) {
    const int col = spec.feature_dim + k;
    const Vector w_col = net.layer_weight(0).col(col) / net.input_scaling.scale(col);
    return Matrix(w_col.replicate(1, batch));
  };

  const Matrix* prev = &tape.input;
  for (int l = 0; l <= n_hidden; ++l) {
    Matrix pre = net.layer_weight(l) * (*prev);
    pre.colwise() += net.layer_bias(l);
    std::vector<Matrix> pre_dot;
    pre_dot.reserve(n_dirs);
    for (int k = 0; k < n_dirs; ++k) {
      if (l == 0) {
        pre_dot.push_back(first_layer_dot(k));
      } else {
        pre_dot.push_back(net.layer_weight(l) * tape.hidden_dot[l - 1][k]);
      }
    }
    if (l == n_hidden) {
      tape.raw = std::move(pre);
      tape.raw_dot = std::move(pre_dot);
    } else {
      Matrix h = pre.array().tanh().matrix();
      const Matrix deriv = (1.0 - h.array().square()).matrix();
      for (int k = 0; k < n_dirs; ++k) {
        tape.hidden_dot[l].push_back(deriv.cwiseProduct(pre_dot[k]));
      }
      tape.hidden.push_back(std::move(h));
      prev = &tape.hidden.back();
    }
  }
  return tape;
}

Vector backward(const Network& net, const Tape& tape, const Matrix& grad_raw,
                const std::vector<Matrix>& grad_raw_dot) {
  const auto& spec = net.spec();
  const int n_hidden = static_cast<int>(spec.hidden.size());
  const int n_dirs = static_cast<int>(grad_raw_dot.size());
  if (n_dirs > 0 && !tape.has_tangents()) {
    throw Error(ErrorCode::config, "net: tangent gradients supplied for a tape without tangents");
  }

  Vector grad = Vector::Zero(net.weights().size());
  Matrix g_pre = grad_raw;
  std::vector<Matrix> g_pre_dot = grad_raw_dot;

  for (int l = n_hidden; l >= 0; --l) {
    const Matrix& prev = l == 0 ? tape.input : tape.hidden[l - 1];
    const int in = net.layer_in(l);
    const int out = net.layer_out(l);
    Eigen::Map<Matrix> g_w(grad.data() + net.weight_offset(l), out, in);
    Eigen::Map<Vector> g_b(grad.data() + net.weight_offset(l) + static_cast<std::size_t>(out) * in, out);

    g_w.noalias() += g_pre * prev.transpose();
    g_b += g_pre.rowwise().sum();
    for (int k = 0; k < n_dirs; ++k) {
      if (l == 0) {
        const int col = spec.feature_dim + k;
        g_w.col(col) += g_pre_dot[k].rowwise().sum() / net.input_scaling.scale(col);
      } else {
        g_w.noalias() += g_pre_dot[k] * tape.hidden_dot[l - 1][k].transpose();
      }
    }
    if (l == 0) break;

    // back through tanh of layer l-1: h = tanh(a), h_dot = (1 - h^2) a_dot
    const auto W = net.layer_weight(l);
    const Matrix& h = tape.hidden[l - 1];
    const Matrix deriv = (1.0 - h.array().square()).matrix();
    Matrix g_h = W.transpose() * g_pre;
    Matrix next = g_h.cwiseProduct(deriv);
    std::vector<Matrix> next_dot(n_dirs);
    for (int k = 0; k < n_dirs; ++k) {
      const Matrix g_hdot = W.transpose() * g_pre_dot[k];
      // a_dot = h_dot / (1 - h^2); d(1 - h^2)/da = -2 h (1 - h^2)
      const Matrix& h_dot = tape.hidden_dot[l - 1][k];
      next.array() -= 2.0 * g_hdot.array() * h.array() * h_dot.array();
      next_dot[k] = g_hdot.cwiseProduct(deriv);
    }
    g_pre = std::move(next);
    g_pre_dot = std::move(next_dot);
  }
  return grad;
}

Matrix make_inputs(const Matrix& features, const Matrix& thetas) {
  const Eigen::Index batch = features.rows() > 0 ? features.cols() : thetas.cols();
  if (features.rows() > 0 && thetas.rows() > 0 && features.cols() != thetas.cols()) {
    throw Error(ErrorCode::config, "net: feature and theta batches differ in size");
  }
  Matrix in(features.rows() + thetas.rows(), batch);
  if (features.rows() > 0) in.topRows(features.rows()) = features;
  if (thetas.rows() > 0) in.bottomRows(thetas.rows()) = thetas;
  return in;
}

namespace {

Matrix single_inputs(const Network& net, const Vector& features, const Vector& theta) {
  if (features.size() != net.spec().feature_dim || theta.size() != net.spec().theta_dim) {
    throw Error(ErrorCode::config, "net: feature/theta dimension mismatch");
  }
  Matrix in(net.spec().input_dim(), 1);
  in.col(0) << features, theta;
  return in;
}

Matrix single_target(const Network& net, const Vector& target) {
  const int td = net.spec().head.target_dim();
  if (target.size() != td) throw Error(ErrorCode::config, "net: target dimension mismatch");
  Matrix t(td, 1);
  if (td > 0) t.col(0) = target;
  return t;
}

}  // namespace

Vector forward(const Network& net, const Vector& features, const Vector& theta) {
  const Tape tape = forward_tape(net, single_inputs(net, features, theta), false);
  Vector raw = tape.raw.col(0);
  if (net.spec().head.kind == HeadKind::softmax) {
    const double m = raw.maxCoeff();
    const double lse = m + std::log((raw.array() - m).exp().sum());
    raw.array() -= lse;
  }
  return raw;
}

MixtureParams mixture_params(const Network& net, const Vector& features, const Vector& theta) {
  const auto& head = net.spec().head;
  if (head.kind != HeadKind::mixture) throw Error(ErrorCode::config, "net: not a mixture head");
  const Vector raw = forward_tape(net, single_inputs(net, features, theta), false).raw.col(0);
  const int C = head.components;
  const int D = head.out_dim;
  MixtureParams p;
  const Vector logits = raw.head(C);
  const double m = logits.maxCoeff();
  p.log_weights = logits.array() - (m + std::log((logits.array() - m).exp().sum()));
  p.means.resize(D, C);
  p.scales.resize(D, C);
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < D; ++i) {
      const double mu = raw(C + c * D + i);
      const double s = raw(C + C * D + c * D + i);
      const double sp = std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s)));
      p.means(i, c) = net.target_scaling.shift(i) + net.target_scaling.scale(i) * mu;
      p.scales(i, c) = net.target_scaling.scale(i) * (sp + kMixtureScaleFloor);
    }
  }
  return p;
}

double log_value(const Network& net, const Vector& features, const Vector& theta, const Vector& target) {
  const Tape tape = forward_tape(net, single_inputs(net, features, theta), false);
  return head_value(net, tape.raw, single_target(net, target)).value(0);
}

Vector theta_gradient(const Network& net, const Vector& features, const Vector& theta, const Vector& target) {
  const Tape tape = forward_tape(net, single_inputs(net, features, theta), true);
  const HeadValue hv = head_value(net, tape.raw, single_target(net, target));
  Vector g(net.spec().theta_dim);
  for (int k = 0; k < g.size(); ++k) g(k) = hv.grad.col(0).dot(tape.raw_dot[k].col(0));
  return g;
}

LossGradient grad_weights(const Network& net, const Matrix& inputs, const Matrix& targets,
                          const ValueLoss& loss) {
  const Tape tape = forward_tape(net, inputs, false);
  const HeadValue hv = head_value(net, tape.raw, targets);
  RowVector dloss = RowVector::Zero(hv.value.size());
  LossGradient out;
  out.loss = loss(hv.value, dloss);
  if (!std::isfinite(out.loss)) throw Error(ErrorCode::numeric, "net: non-finite loss");
  const Matrix grad_raw = hv.grad * dloss.asDiagonal();
  out.gradient = backward(net, tape, grad_raw);
  return out;
}

LossGradient grad_weights_of_score_penalty(const Network& net, const Vector& features,
                                           const Vector& theta, const Vector& target,
                                           const Vector& target_score) {
  const int d = net.spec().theta_dim;
  if (target_score.size() != d) throw Error(ErrorCode::config, "net: score dimension mismatch");
  const Tape tape = forward_tape(net, single_inputs(net, features, theta), true);
  const Matrix tgt = single_target(net, target);
  const HeadValue hv = head_value(net, tape.raw, tgt);

  LossGradient out;
  Matrix grad_raw = Matrix::Zero(tape.raw.rows(), 1);
  std::vector<Matrix> grad_raw_dot(d);
  for (int k = 0; k < d; ++k) {
    const double model_score = hv.grad.col(0).dot(tape.raw_dot[k].col(0));
    const double resid = model_score - target_score(k);
    out.loss += resid * resid;
    // d/d raw of g_k = grad . raw_dot_k  is  H raw_dot_k;  d/d raw_dot_k is grad
    grad_raw += 2.0 * resid * head_hvp(net, tape.raw, tgt, tape.raw_dot[k]);
    grad_raw_dot[k] = 2.0 * resid * hv.grad;
  }
  if (!std::isfinite(out.loss)) throw Error(ErrorCode::numeric, "net: non-finite score penalty");
  out.gradient = backward(net, tape, grad_raw, grad_raw_dot);
  return out;
}

}  // namespace goldmine::net
