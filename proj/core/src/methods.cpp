#include "goldmine/methods.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "goldmine/error.hpp"
#include "goldmine/rng.hpp"

namespace goldmine::methods {
namespace {

double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

bool has_penalty(const MethodKind& kind) {
  return needs_joint_score(kind.method) && kind.alpha != 0.0;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t tag) {
  return seed ^ (tag * 0x9E3779B97F4A7C15ULL);
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::numeric, std::string("methods: non-finite ") + what);
}

bool same_point(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a - b).cwiseAbs().maxCoeff() <= 1e-12;
}

}  // namespace

std::string_view name(Method m) {
  switch (m) {
    case Method::carl: return "carl";
    case Method::nde: return "nde";
    case Method::rolr: return "rolr";
    case Method::rascal: return "rascal";
    case Method::cascal: return "cascal";
    case Method::scandal: return "scandal";
    case Method::sally: return "sally";
    case Method::sallino: return "sallino";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Method m : all_methods()) {
    if (name(m) == lower) return m;
  }
  throw Error(ErrorCode::config, "unknown method '" + std::string(text) + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> v{Method::carl,   Method::nde,     Method::rolr,  Method::rascal,
                                     Method::cascal, Method::scandal, Method::sally, Method::sallino};
  return v;
}

Family family(Method m) {
  switch (m) {
    case Method::nde:
    case Method::scandal: return Family::density;
    case Method::sally:
    case Method::sallino: return Family::local;
    default: return Family::ratio;
  }
}

bool needs_joint_ratio(Method m) { return m == Method::rolr || m == Method::rascal; }

bool needs_joint_score(Method m) {
  return m == Method::rascal || m == Method::cascal || m == Method::scandal || m == Method::sally ||
         m == Method::sallino;
}

double default_alpha(Method m) {
  switch (m) {
    case Method::rascal:
    case Method::cascal: return 5.0;
    case Method::scandal: return 1.0;
    default: return 0.0;
  }
}

// ---- batches ----

Batch Batch::from_pairs(std::span<const TrainingPair> pairs, std::span<const std::size_t> rows) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(pairs.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Batch b;
  if (n == 0) return b;
  const TrainingPair& first = pairs[rows[0]];
  b.x.resize(first.x.size(), n);
  b.theta0.resize(first.theta0.size(), n);
  b.theta1.resize(first.theta1.size(), n);
  b.theta_gen.resize(first.theta_gen.size(), n);
  b.y.resize(n);
  b.log_r.resize(n);
  bool have_r = true;
  bool have_t = first.joint_score.size() > 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const TrainingPair& p = pairs[rows[j]];
    if (p.x.size() != b.x.rows() || p.theta0.size() != b.theta0.rows() ||
        p.theta1.size() != b.theta1.rows() || p.theta_gen.size() != b.theta_gen.rows()) {
      throw Error(ErrorCode::data, "methods: training pairs have inconsistent dimensions");
    }
    b.x.col(j) = p.x;
    b.theta0.col(j) = p.theta0;
    b.theta1.col(j) = p.theta1;
    b.theta_gen.col(j) = p.theta_gen;
    b.y(j) = p.y;
    have_r = have_r && p.log_joint_ratio.has_value();
    b.log_r(j) = p.log_joint_ratio.value_or(std::numeric_limits<double>::quiet_NaN());
    have_t = have_t && p.joint_score.size() == first.joint_score.size();
  }
  if (!have_r) b.log_r.resize(0);
  if (have_t) {
    b.score.resize(first.joint_score.size(), n);
    for (Eigen::Index j = 0; j < n; ++j) b.score.col(j) = pairs[rows[j]].joint_score;
  }
  return b;
}

Matrix network_inputs(Method m, const Batch& batch) {
  const Eigen::Index n = batch.size();
  switch (family(m)) {
    case Family::ratio: return net::make_inputs(batch.x, batch.theta0);
    case Family::density: return net::make_inputs(Matrix(0, n), batch.theta_gen);
    case Family::local: return net::make_inputs(batch.x, Matrix(0, n));
  }
  return {};
}

Matrix network_targets(Method m, const Batch& batch) {
  if (family(m) == Family::density) return batch.x;
  return Matrix(0, batch.size());
}

// ---- losses ----

LossValue evaluate_loss(const MethodKind& kind, const net::Network& net, const Batch& batch,
                        bool with_gradient) {
  const Method m = kind.method;
  const Eigen::Index n = batch.size();
  if (n == 0) throw Error(ErrorCode::data, "methods: empty batch");
  if (kind.alpha < 0 || !std::isfinite(kind.alpha)) {
    throw Error(ErrorCode::config, "methods: alpha must be a finite non-negative number");
  }
  const bool penalty = has_penalty(kind) && family(m) != Family::local;
  const bool local = family(m) == Family::local;
  if ((penalty || local) && batch.score.rows() == 0) {
    throw Error(ErrorCode::data, "MissingAugmentation: " + std::string(name(m)) + " needs joint scores");
  }
  if (needs_joint_ratio(m) && batch.log_r.size() == 0) {
    throw Error(ErrorCode::data, "MissingAugmentation: " + std::string(name(m)) + " needs joint ratios");
  }

  const Matrix inputs = network_inputs(m, batch);
  const Matrix targets = network_targets(m, batch);
  const net::Tape tape = net::forward_tape(net, inputs, penalty);
  const double inv_n = 1.0 / static_cast<double>(n);

  LossValue out;
  Matrix grad_raw;
  std::vector<Matrix> grad_raw_dot;

  if (local) {
    if (batch.score.rows() != tape.raw.rows()) {
      throw Error(ErrorCode::data, "methods: score dimension does not match the network output");
    }
    const Matrix diff = tape.raw - batch.score;
    out.value = diff.squaredNorm() * inv_n;
    if (with_gradient) grad_raw = 2.0 * inv_n * diff;
  } else {
    const net::HeadValue hv = net::head_value(net, tape.raw, targets);
    RowVector dval(n);
    double total = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
      const double v = hv.value(b);
      check_finite(v, "network output");
      const double y = batch.y(b);
      switch (m) {
        case Method::carl:
        case Method::cascal:
          total += y * softplus(-v) + (1.0 - y) * softplus(v);
          dval(b) = (sigmoid(v) - y) * inv_n;
          break;
        case Method::nde:
        case Method::scandal:
          total -= v;
          dval(b) = -inv_n;
          break;
        case Method::rolr:
        case Method::rascal: {
          const double lr = std::clamp(v, -kLogRatioClamp, kLogRatioClamp);
          const bool saturated = lr != v;
          out.saturated += saturated ? 1 : 0;
          const double r = std::exp(batch.log_r(b));
          double d = 0.0;
          if (y == 1.0) {
            const double rh = std::exp(lr);
            total += (r - rh) * (r - rh);
            d = -2.0 * (r - rh) * rh;
          } else {
            const double inv_rh = std::exp(-lr);
            total += (1.0 / r - inv_rh) * (1.0 / r - inv_rh);
            d = 2.0 * (1.0 / r - inv_rh) * inv_rh;
          }
          dval(b) = saturated ? 0.0 : d * inv_n;
          break;
        }
        default:
          break;
      }
    }
    out.value = total * inv_n;
    if (with_gradient) grad_raw = hv.grad * dval.asDiagonal();

    if (penalty) {
      const int d = net.spec().theta_dim;
      if (batch.score.rows() != d) {
        throw Error(ErrorCode::data, "methods: score dimension does not match theta");
      }
      const double sign = m == Method::cascal ? -1.0 : 1.0;
      const RowVector mask = (1.0 - batch.y.array()).matrix();
      double pen = 0.0;
      if (with_gradient) grad_raw_dot.resize(d);
      for (int k = 0; k < d; ++k) {
        const RowVector model_score = sign * hv.grad.cwiseProduct(tape.raw_dot[k]).colwise().sum();
        const RowVector resid = batch.score.row(k) - model_score;
        pen += mask.cwiseProduct(resid.cwiseProduct(resid)).sum();
        if (!with_gradient) continue;
        const RowVector c = (-2.0 * kind.alpha * inv_n * sign) * mask.cwiseProduct(resid);
        grad_raw_dot[k] = hv.grad * c.asDiagonal();
        if (net.spec().head.kind != net::HeadKind::scalar) {
          grad_raw += net::head_hvp(net, tape.raw, targets, tape.raw_dot[k]) * c.asDiagonal();
        }
      }
      out.value += kind.alpha * inv_n * pen;
    }
  }
  check_finite(out.value, "loss");
  if (with_gradient) out.gradient = net::backward(net, tape, grad_raw, grad_raw_dot);
  return out;
}

LossValue loss_xe(const net::Network& net, const Batch& batch, bool g) {
  return evaluate_loss({Method::carl, 0.0}, net, batch, g);
}
LossValue loss_mle(const net::Network& net, const Batch& batch, bool g) {
  return evaluate_loss({Method::nde, 0.0}, net, batch, g);
}
LossValue loss_rolr(const net::Network& net, const Batch& batch, bool g) {
  return evaluate_loss({Method::rolr, 0.0}, net, batch, g);
}
LossValue loss_rascal(const net::Network& net, const Batch& batch, double alpha, bool g) {
  return evaluate_loss({Method::rascal, alpha}, net, batch, g);
}
LossValue loss_cascal(const net::Network& net, const Batch& batch, double alpha, bool g) {
  return evaluate_loss({Method::cascal, alpha}, net, batch, g);
}
LossValue loss_scandal(const net::Network& net, const Batch& batch, double alpha, bool g) {
  return evaluate_loss({Method::scandal, alpha}, net, batch, g);
}
LossValue loss_sally(const net::Network& net, const Batch& batch, bool g) {
  return evaluate_loss({Method::sally, 0.0}, net, batch, g);
}

// ---- training ----

net::NetworkSpec network_spec(Method m, const ObservableInfo& info, const TrainConfig& config) {
  net::NetworkSpec spec;
  spec.hidden = config.hidden;
  switch (family(m)) {
    case Family::ratio:
      spec.feature_dim = info.x_dim;
      spec.theta_dim = info.theta_dim;
      spec.head = net::HeadSpec::scalar();
      break;
    case Family::density:
      spec.feature_dim = 0;
      spec.theta_dim = info.theta_dim;
      spec.head = info.discrete() ? net::HeadSpec::softmax(info.n_bins)
                                  : net::HeadSpec::mixture(config.mixture_components, info.x_dim);
      break;
    case Family::local:
      spec.feature_dim = info.x_dim;
      spec.theta_dim = 0;
      spec.head = net::HeadSpec::vector(info.theta_dim);
      break;
  }
  spec.validate();
  return spec;
}

int effective_epochs(const TrainConfig& config, std::size_t n_train) {
  if (config.min_steps <= 0 || n_train == 0) return config.epochs;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const long per_epoch = static_cast<long>((n_train + bs - 1) / bs);
  return static_cast<int>(std::max<long>(config.epochs, (config.min_steps + per_epoch - 1) / per_epoch));
}

SurrogateModel train(const MethodKind& kind, std::span<const TrainingPair> pairs,
                     const ObservableInfo& info, const TrainConfig& config, std::uint64_t seed) {
  const Method m = kind.method;
  if (pairs.empty()) throw Error(ErrorCode::data, "methods: empty training set");
  if (config.epochs < 0 || config.min_steps < 0 || config.batch_size <= 0 || config.learning_rate <= 0 ||
      config.validation_fraction < 0 || config.validation_fraction >= 1) {
    throw Error(ErrorCode::config, "methods: invalid training hyperparameters");
  }
  const bool need_score = has_penalty(kind) || family(m) == Family::local;
  for (const TrainingPair& p : pairs) {
    if (needs_joint_ratio(m) && !p.log_joint_ratio) {
      throw Error(ErrorCode::data, "MissingAugmentation: " + std::string(name(m)) + " needs joint ratios");
    }
    if (need_score && p.joint_score.size() != info.theta_dim) {
      throw Error(ErrorCode::data, "MissingAugmentation: " + std::string(name(m)) + " needs joint scores");
    }
    if (p.x.size() != info.x_dim || p.theta0.size() != info.theta_dim ||
        p.theta1.size() != info.theta_dim || p.theta_gen.size() != info.theta_dim) {
      throw Error(ErrorCode::data, "methods: training pair dimensions do not match the dataset");
    }
  }

  SurrogateModel model{kind, info, net::Network(network_spec(m, info, config)), {}, {}, {}, seed, {}, {}};
  switch (family(m)) {
    case Family::ratio:
      model.theta_ref = pairs[0].theta1;
      for (const TrainingPair& p : pairs) {
        if (!same_point(p.theta1, model.theta_ref)) {
          throw Error(ErrorCode::config, "methods: ratio models need a single reference theta1");
        }
      }
      break;
    case Family::local:
      model.theta_ref = pairs[0].theta_gen;
      for (const TrainingPair& p : pairs) {
        if (!same_point(p.theta_gen, model.theta_ref)) {
          throw Error(ErrorCode::config, "methods: local models need samples from a single theta_ref");
        }
      }
      break;
    case Family::density:
      if (has_penalty(kind)) {
        for (const TrainingPair& p : pairs) {
          if (p.y == 0 && !same_point(p.theta0, p.theta_gen)) {
            throw Error(ErrorCode::data, "methods: y = 0 samples must be generated at theta0");
          }
        }
      }
      break;
  }

  // Validation split.
  const std::size_t n = pairs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(stream_seed(seed, 1));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[split_rng.below(i)]);
  std::size_t n_val = static_cast<std::size_t>(config.validation_fraction * static_cast<double>(n));
  if (n_val >= n) n_val = 0;
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  net::Network& network = model.network;
  net::init_glorot(network, stream_seed(seed, 0));
  {
    const Batch all_train = Batch::from_pairs(pairs, train_rows);
    network.input_scaling = net::Standardizer::fit(network_inputs(m, all_train));
    if (network.spec().head.kind == net::HeadKind::mixture) {
      network.target_scaling = net::Standardizer::fit(all_train.x);
    }
  }
  const Batch val_batch = n_val > 0 ? Batch::from_pairs(pairs, val_rows) : Batch{};

  model.optimizer = net::AdamState::zeros(network.weights().size());
  const net::AdamConfig adam{config.learning_rate};
  Rng shuffle_rng(stream_seed(seed, 2));
  Vector best_weights = network.weights();
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const auto bs = static_cast<std::size_t>(config.batch_size);

  const int epochs = effective_epochs(config, train_rows.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = train_rows.size(); i > 1; --i) {
      std::swap(train_rows[i - 1], train_rows[shuffle_rng.below(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_rows.size(); start += bs) {
      const std::size_t len = std::min(bs, train_rows.size() - start);
      const Batch mb = Batch::from_pairs(pairs, std::span(train_rows).subspan(start, len));
      const LossValue lv = evaluate_loss(kind, network, mb, true);
      model.log.saturated += lv.saturated;
      epoch_loss += lv.value * static_cast<double>(len);
      net::adam_step(model.optimizer, network.weights(), lv.gradient, adam);
    }
    model.log.train_loss.push_back(epoch_loss / static_cast<double>(train_rows.size()));

    const double monitored = n_val > 0 ? evaluate_loss(kind, network, val_batch, false).value
                                       : model.log.train_loss.back();
    if (n_val > 0) model.log.validation_loss.push_back(monitored);
    if (monitored < best) {
      best = monitored;
      best_weights = network.weights();
      model.log.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  network.weights() = best_weights;
  model.n_train = n;
  return model;
}

// ---- read-outs ----

namespace {

void check_reference(const SurrogateModel& model, const Matrix& theta1s) {
  for (Eigen::Index j = 0; j < theta1s.cols(); ++j) {
    if (!same_point(theta1s.col(j), model.theta_ref)) {
      throw Error(ErrorCode::config, "ReferenceMismatch: ratio model was trained against a different theta1");
    }
  }
}

const LocalCalibration& find_calibration(const SurrogateModel& model, const Vector& t0, const Vector& t1) {
  for (const LocalCalibration& c : model.calibrations) {
    if (same_point(c.theta0, t0) && same_point(c.theta1, t1)) return c;
  }
  throw Error(ErrorCode::config, "methods: no local calibration for the requested parameter pair");
}

RowVector density_log(const net::Network& net, const Matrix& xs, const Matrix& thetas) {
  const net::Tape tape = net::forward_tape(net, net::make_inputs(Matrix(0, thetas.cols()), thetas), false);
  return net::head_value(net, tape.raw, xs).value;
}

}  // namespace

RowVector evaluate_log_ratio_batch(const SurrogateModel& model, const Matrix& xs, const Matrix& theta0s,
                                   const Matrix& theta1s, std::size_t* empty_bins) {
  const Eigen::Index n = xs.cols();
  if (theta0s.cols() != n || theta1s.cols() != n) {
    throw Error(ErrorCode::config, "methods: evaluation batches differ in size");
  }
  const Method m = model.kind.method;
  RowVector out(n);
  switch (family(m)) {
    case Family::ratio: {
      check_reference(model, theta1s);
      const net::Tape tape = net::forward_tape(model.network, net::make_inputs(xs, theta0s), false);
      out = tape.raw.row(0);
      if (m == Method::carl || m == Method::cascal) out = -out;
      break;
    }
    case Family::density:
      out = density_log(model.network, xs, theta0s) - density_log(model.network, xs, theta1s);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (theta0s.col(j) == theta1s.col(j)) out(j) = 0.0;
      }
      break;
    case Family::local: {
      std::size_t empty = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const LocalCalibration& cal = find_calibration(model, theta0s.col(j), theta1s.col(j));
        const Matrix stat = local_statistic(model.network, m, xs.col(j), cal.theta0, cal.theta1);
        const std::span<const double> point(stat.data(), static_cast<std::size_t>(stat.rows()));
        if (cal.numerator.empty_at(point) || cal.denominator.empty_at(point)) ++empty;
        out(j) = std::log(cal.numerator.density(point)) - std::log(cal.denominator.density(point));
      }
      if (empty_bins) *empty_bins = empty;
      break;
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) check_finite(out(j), "log ratio");
  return out;
}

double evaluate_log_ratio(const SurrogateModel& model, const Vector& x, const Vector& theta0,
                          const Vector& theta1) {
  return evaluate_log_ratio_batch(model, Matrix(x), Matrix(theta0), Matrix(theta1))(0);
}

Vector estimated_score(const SurrogateModel& model, const Vector& x, const Vector& theta) {
  switch (family(model.kind.method)) {
    case Family::local:
      return net::forward(model.network, x, Vector(0));
    case Family::density:
      return net::theta_gradient(model.network, Vector(0), theta, x);
    case Family::ratio: {
      Vector g = net::theta_gradient(model.network, x, theta);
      const Method m = model.kind.method;
      return (m == Method::carl || m == Method::cascal) ? Vector(-g) : g;
    }
  }
  return {};
}

void calibrate(SurrogateModel& model, const ObservableSampler& simulator, const Vector& theta0,
               const Vector& theta1, std::size_t n_sims, int bins_per_dim, std::uint64_t seed) {
  const Method m = model.kind.method;
  if (family(m) != Family::local) {
    throw Error(ErrorCode::unsupported, "methods: only local models need calibration");
  }
  // Shared seed: identical draws at theta0 = theta1 give identical histograms.
  const Matrix x0 = simulator(theta0, n_sims, seed);
  const Matrix x1 = simulator(theta1, n_sims, seed);
  const Matrix s0 = local_statistic(model.network, m, x0, theta0, theta1);
  const Matrix s1 = local_statistic(model.network, m, x1, theta0, theta1);
  Matrix pooled(s0.rows(), s0.cols() + s1.cols());
  pooled << s0, s1;
  const Binning binning = Binning::from_samples(pooled, bins_per_dim);

  auto replay = [](const Matrix& xs) -> ObservableSampler {
    return [&xs](const Vector&, std::size_t, std::uint64_t) { return xs; };
  };
  LocalCalibration cal{theta0, theta1,
                       calibrate_local(model.network, m, replay(x0), theta0, theta0, theta1, n_sims, binning, seed),
                       calibrate_local(model.network, m, replay(x1), theta1, theta0, theta1, n_sims, binning, seed)};
  std::erase_if(model.calibrations, [&](const LocalCalibration& c) {
    return same_point(c.theta0, theta0) && same_point(c.theta1, theta1);
  });
  model.calibrations.push_back(std::move(cal));
}

}  // namespace goldmine::methods
