#pragma once

#include <cstdint>
#include <vector>

namespace goldmine::galton {

/// Board geometry. Row v (0-based) holds nails at every reachable lateral
/// position; after k right moves in v rows the ball sits at k - v/2, which
/// is normalized to z_h = (k - v/2)/n_rows + 1/2 and z_v = v/(n_rows - 1).
struct Config {
  int n_rows = 20;
  double curvature = 5.0;  // the constant inside the sigmoid argument

  void validate() const;
  int n_bins() const { return n_rows + 1; }
};

struct NailPosition {
  double z_h;
  double z_v;
};

NailPosition nail_position(const Config& config, int row, int rights);

/// Probability of bouncing left at a nail:
/// (1 - f(z_v))/2 + f(z_v) sigmoid(c theta (z_h - 1/2)), f(z_v) = sin(pi z_v).
double nail_prob_left(double z_h, double z_v, double theta, double curvature = 5.0);

/// Analytic d/dtheta of nail_prob_left.
double nail_prob_left_dtheta(double z_h, double z_v, double theta, double curvature = 5.0);

struct TraceAccumulators {
  double log_joint_ratio = 0.0;  // log p(x,z|theta0) - log p(x,z|theta1)
  double joint_score = 0.0;      // d/dtheta log p(x,z|theta) at theta0
};

struct Sample {
  int bin = 0;  // number of right moves
  TraceAccumulators acc;
  std::vector<bool> moves;  // true = right; filled only when requested
};

/// Runs one ball through the board under theta_gen and accumulates the joint
/// log-ratio at (theta0, theta1) and the joint score at theta0 along the
/// realized trace. Throws Error(numeric) if a step probability leaves
/// [1e-12, 1 - 1e-12], Error(config) on non-finite parameters.
Sample simulate(const Config& config, double theta_gen, double theta0, double theta1,
                std::uint64_t seed, bool keep_trace = false);

/// Batch of n samples with per-sample seeds base_seed + i.
std::vector<Sample> simulate_batch(const Config& config, double theta_gen, double theta0,
                                   double theta1, std::uint64_t base_seed, std::size_t n);

/// Exact p(x|theta) for x = 0..n_rows by propagating row-by-row occupation.
std::vector<double> exact_density(const Config& config, double theta);

/// Exact log p(x|theta0) - log p(x|theta1) per bin. Throws Error(numeric)
/// if either density underflows to zero in some bin.
std::vector<double> exact_log_ratio(const Config& config, double theta0, double theta1);

/// Exact score d/dtheta log p(x|theta) per bin, differentiating the
/// occupation recursion alongside the probabilities.
std::vector<double> exact_score(const Config& config, double theta);

}  // namespace goldmine::galton
