#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace goldmine {

/// One augmented simulator output with the parameter points it was
/// generated and evaluated at. y = 0 marks a draw from theta0, y = 1 a draw
/// from theta1; the joint ratio compares theta0 against theta1 and the
/// joint score is taken at theta0, both along the realized trace.
struct TrainingPair {
  Eigen::VectorXd x;  // observable; a single bin index for discrete simulators
  int y = 0;
  Eigen::VectorXd theta0;
  Eigen::VectorXd theta1;
  Eigen::VectorXd theta_gen;
  std::optional<double> log_joint_ratio;
  Eigen::VectorXd joint_score;  // empty when the simulator did not provide it
};

/// Shape of the observables in a dataset.
struct ObservableInfo {
  int x_dim = 1;
  int theta_dim = 1;
  int n_bins = 0;  // > 0 when x is a bin index in [0, n_bins)

  bool discrete() const { return n_bins > 0; }
};

}  // namespace goldmine
