#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "goldmine/dataset.hpp"
#include "goldmine/methods.hpp"

namespace goldmine::eval {

using methods::Matrix;
using methods::RowVector;
using methods::Vector;

/// Columns of x, theta0 and theta1 line up.
struct EvalPoints {
  Matrix x;
  Matrix theta0;
  Matrix theta1;

  Eigen::Index size() const { return x.cols(); }
};

/// Galton bins [first_bin, last_bin] at one (theta0, theta1).
EvalPoints galton_points(double theta0, double theta1, int first_bin = 5, int last_bin = 15);
/// Exact log r for galton_points.
RowVector galton_reference(const galton::Config& config, const EvalPoints& points);

/// n_x observables simulated at theta1, each paired with n_theta theta0
/// draws from the box around theta1 (n_x * n_theta points).
EvalPoints lotka_points(const data::SimulatorConfig& simulator, const Vector& theta1, double half_width,
                        std::size_t n_x, std::size_t n_theta, std::uint64_t seed);

/// Mean squared difference; throws Error(data) on size mismatch or a
/// non-finite reference value.
double mse(const RowVector& estimate, const RowVector& reference);
double mse_log_ratio(const methods::SurrogateModel& model, const RowVector& reference, const EvalPoints& points);

struct MseReport {
  std::string method;
  std::size_t n_train = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> mse;

  double median() const;
  double stddev() const;  // sample standard deviation, 0 for fewer than two runs
  nlohmann::json to_json() const;
};

double median(std::vector<double> values);

struct ScoreDiagnostics {
  std::size_t n_score = 0;       // samples generated at their theta0
  Vector mean_score;
  std::optional<Vector> score_se;
  std::optional<Vector> score_z;
  std::size_t n_ratio = 0;       // samples generated at their theta1
  std::optional<double> mean_ratio;
  std::optional<double> ratio_se;
  std::optional<double> ratio_z;

  nlohmann::json to_json() const;
};

/// Checks E[t(x,z|theta0)] = 0 over samples drawn at theta0 and
/// E[r(x,z|theta0,theta1)] = 1 over samples drawn at theta1.
ScoreDiagnostics score_diagnostics(std::span<const TrainingPair> records);

struct ConfidenceRegion {
  std::vector<Vector> grid;
  std::vector<double> q;  // -2 log likelihood ratio against theta_hat
  Vector theta_hat;
  std::vector<double> levels;
  std::vector<double> thresholds;

  bool contains(std::size_t grid_index, std::size_t level_index) const;
  std::size_t count(std::size_t level_index) const;
};

/// Probabilities of 1, 2 and 3 standard deviations.
std::vector<double> standard_levels();
double chi2_threshold(int dof, double level);

/// Sum over the observations of log r_hat(x_i | theta, anchor) for a fixed anchor.
using LogLikelihoodRatio = std::function<double(const Vector& theta)>;

ConfidenceRegion confidence_region(const LogLikelihoodRatio& llr, const std::vector<Vector>& grid,
                                   const std::vector<double>& levels);
ConfidenceRegion confidence_region(const methods::SurrogateModel& model, const Matrix& observed,
                                   const std::vector<Vector>& grid, const std::vector<double>& levels);

struct EnsembleReference {
  std::vector<methods::SurrogateModel> members;

  RowVector predict(const EvalPoints& points) const;
};

/// Pointwise median across member predictions (one RowVector per member).
RowVector pointwise_median(const std::vector<RowVector>& predictions);

EnsembleReference build_ensemble_reference(const methods::MethodKind& kind, std::span<const TrainingPair> pairs,
                                           const ObservableInfo& info, const methods::TrainConfig& config,
                                           const std::vector<std::uint64_t>& seeds);

}  // namespace goldmine::eval
