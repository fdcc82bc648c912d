#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "goldmine/net.hpp"
#include "goldmine/sample.hpp"

namespace goldmine::methods {

using net::Matrix;
using net::RowVector;
using net::Vector;

enum class Method { carl, nde, rolr, rascal, cascal, scandal, sally, sallino };

/// How training parameter points are chosen: pairs (theta0, theta1) with both
/// labels, single generating points, or a fixed reference point.
enum class Family { ratio, density, local };

std::string_view name(Method m);
Method parse_method(std::string_view text);
Family family(Method m);
bool needs_joint_ratio(Method m);
bool needs_joint_score(Method m);
double default_alpha(Method m);
const std::vector<Method>& all_methods();

struct MethodKind {
  Method method = Method::carl;
  double alpha = 0.0;  // weight of the score term (RASCAL, CASCAL, SCANDAL)

  static MethodKind with_default_alpha(Method m) { return {m, default_alpha(m)}; }
};

/// Column-major view of a set of TrainingPairs.
struct Batch {
  Matrix x;
  Matrix theta0;
  Matrix theta1;
  Matrix theta_gen;
  RowVector y;
  RowVector log_r;
  Matrix score;

  static Batch from_pairs(std::span<const TrainingPair> pairs, std::span<const std::size_t> rows = {});
  Eigen::Index size() const { return y.size(); }
};

struct LossValue {
  double value = 0.0;
  Vector gradient;             // empty unless requested
  std::size_t saturated = 0;   // ROLR/RASCAL log-ratio clamp activations
};

inline constexpr double kLogRatioClamp = 30.0;

/// Network input and head target matrices for a method.
Matrix network_inputs(Method m, const Batch& batch);
Matrix network_targets(Method m, const Batch& batch);

/// Mean loss of `kind` over the batch, optionally with its weight gradient.
LossValue evaluate_loss(const MethodKind& kind, const net::Network& net, const Batch& batch,
                        bool with_gradient = true);

LossValue loss_xe(const net::Network& net, const Batch& batch, bool with_gradient = true);
LossValue loss_mle(const net::Network& net, const Batch& batch, bool with_gradient = true);
LossValue loss_rolr(const net::Network& net, const Batch& batch, bool with_gradient = true);
LossValue loss_rascal(const net::Network& net, const Batch& batch, double alpha, bool with_gradient = true);
LossValue loss_cascal(const net::Network& net, const Batch& batch, double alpha, bool with_gradient = true);
LossValue loss_scandal(const net::Network& net, const Batch& batch, double alpha, bool with_gradient = true);
LossValue loss_sally(const net::Network& net, const Batch& batch, bool with_gradient = true);

// ---- local (score-space) calibration ----

/// Regular grid over a box; values outside the box fall into the edge cells.
struct Binning {
  std::vector<double> lo;
  std::vector<double> hi;
  int bins_per_dim = 20;

  int dim() const { return static_cast<int>(lo.size()); }
  std::size_t n_cells() const;
  std::size_t cell(std::span<const double> point) const;
  double cell_volume() const;

  /// Per-dimension bounds at the central `coverage` quantiles of the columns.
  static Binning from_samples(const Matrix& columns, int bins_per_dim, double coverage = 0.999);
};

/// Normalized histogram density over a Binning.
struct Histogram {
  Binning binning;
  std::vector<double> mass;  // per cell, sums to 1
  std::vector<std::uint64_t> counts;
  std::size_t n_samples = 0;

  double density(std::span<const double> point) const;
  /// True when no calibration sample landed in the point's cell.
  bool empty_at(std::span<const double> point) const;
  double integral() const;
};

/// Returns n simulated observables (one per column) at theta.
using ObservableSampler = std::function<Matrix(const Vector& theta, std::size_t n, std::uint64_t seed)>;

/// Statistic the local methods histogram: the estimated score (SALLY) or its
/// projection onto theta0 - theta1 (SALLINO).
Matrix local_statistic(const net::Network& score_net, Method m, const Matrix& x,
                       const Vector& theta0, const Vector& theta1);

/// Histogram of the local statistic of n_sims observables simulated at theta_eval.
/// Counts are smoothed additively by 1/(n_sims * n_cells) per cell.
Histogram calibrate_local(const net::Network& score_net, Method m, const ObservableSampler& simulator,
                          const Vector& theta_eval, const Vector& theta0, const Vector& theta1,
                          std::size_t n_sims, const Binning& binning, std::uint64_t seed);

struct LocalCalibration {
  Vector theta0;
  Vector theta1;
  Histogram numerator;    // statistic distribution at theta0
  Histogram denominator;  // at theta1
};

// ---- training ----

struct TrainConfig {
  std::vector<int> hidden{10};
  int mixture_components = 10;
  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double validation_fraction = 0.2;
  int patience = 10;  // epochs without validation improvement before stopping; <= 0 disables
  long min_steps = 0;  // raises the epoch count until at least this many optimizer steps run
};

/// Epochs actually run for n_train training rows.
int effective_epochs(const TrainConfig& config, std::size_t n_train);

struct TrainingLog {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
  std::size_t saturated = 0;
};

struct SurrogateModel {
  MethodKind kind;
  ObservableInfo info;
  net::Network network;
  Vector theta_ref;  // fixed denominator for ratio models, expansion point for local models
  net::AdamState optimizer;
  TrainingLog log;
  std::uint64_t seed = 0;
  std::string dataset_digest;
  std::vector<LocalCalibration> calibrations;
  std::size_t n_train = 0;
};

net::NetworkSpec network_spec(Method m, const ObservableInfo& info, const TrainConfig& config);

/// Trains a surrogate. Throws Error(data) (MissingAugmentation) when the
/// pairs lack a field the method needs, Error(config) for inconsistent
/// references.
SurrogateModel train(const MethodKind& kind, std::span<const TrainingPair> pairs,
                     const ObservableInfo& info, const TrainConfig& config, std::uint64_t seed);

/// Adds (or replaces) the score-space calibration for (theta0, theta1).
void calibrate(SurrogateModel& model, const ObservableSampler& simulator, const Vector& theta0,
               const Vector& theta1, std::size_t n_sims, int bins_per_dim, std::uint64_t seed);

/// log r_hat(x | theta0, theta1) through the read-out matching the model's
/// method. Ratio models throw Error(config) (ReferenceMismatch) unless theta1
/// is their training reference; local models need a calibration for the pair.
double evaluate_log_ratio(const SurrogateModel& model, const Vector& x, const Vector& theta0,
                          const Vector& theta1);

/// Batched variant; columns of xs, theta0s and theta1s line up.
/// `empty_bins`, when given, receives the number of local read-outs that hit a
/// cell without calibration samples (their density is the smoothing floor).
RowVector evaluate_log_ratio_batch(const SurrogateModel& model, const Matrix& xs, const Matrix& theta0s,
                                   const Matrix& theta1s, std::size_t* empty_bins = nullptr);

/// Estimated score t_hat(x) for local models, or d/dtheta log p_hat / log r_hat otherwise.
Vector estimated_score(const SurrogateModel& model, const Vector& x, const Vector& theta);

}  // namespace goldmine::methods
