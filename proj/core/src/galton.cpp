#include "goldmine/galton.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "goldmine/error.hpp"
#include "goldmine/rng.hpp"

namespace goldmine::galton {
namespace {

constexpr double kProbFloor = 1e-12;

double sigmoid(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::config, std::string("galton: non-finite ") + name);
  }
}

double checked(double p) {
  if (!(p >= kProbFloor && p <= 1.0 - kProbFloor)) {
    throw Error(ErrorCode::numeric,
                "galton: DegenerateStep, step probability " + std::to_string(p) +
                    " outside [1e-12, 1-1e-12]");
  }
  return p;
}

}  // namespace

void Config::validate() const {
  if (n_rows < 1) throw Error(ErrorCode::config, "galton: n_rows must be >= 1");
  if (!std::isfinite(curvature)) throw Error(ErrorCode::config, "galton: non-finite curvature");
}

NailPosition nail_position(const Config& config, int row, int rights) {
  const double n = config.n_rows;
  const double pos = rights - 0.5 * row;
  const double z_v = config.n_rows > 1 ? static_cast<double>(row) / (n - 1.0) : 0.0;
  return {pos / n + 0.5, z_v};
}

double nail_prob_left(double z_h, double z_v, double theta, double curvature) {
  const double f = std::sin(std::numbers::pi * z_v);
  return 0.5 * (1.0 - f) + f * sigmoid(curvature * theta * (z_h - 0.5));
}

double nail_prob_left_dtheta(double z_h, double z_v, double theta, double curvature) {
  const double f = std::sin(std::numbers::pi * z_v);
  const double s = sigmoid(curvature * theta * (z_h - 0.5));
  return f * s * (1.0 - s) * curvature * (z_h - 0.5);
}

Sample simulate(const Config& config, double theta_gen, double theta0, double theta1,
                std::uint64_t seed, bool keep_trace) {
  config.validate();
  require_finite(theta_gen, "theta_gen");
  require_finite(theta0, "theta0");
  require_finite(theta1, "theta1");

  Rng rng(seed);
  Sample out;
  if (keep_trace) out.moves.reserve(config.n_rows);
  int rights = 0;
  for (int row = 0; row < config.n_rows; ++row) {
    const auto [z_h, z_v] = nail_position(config, row, rights);
    const double p_gen = checked(nail_prob_left(z_h, z_v, theta_gen, config.curvature));
    const double p0 = checked(nail_prob_left(z_h, z_v, theta0, config.curvature));
    const double p1 = checked(nail_prob_left(z_h, z_v, theta1, config.curvature));
    const double dp0 = nail_prob_left_dtheta(z_h, z_v, theta0, config.curvature);

    const bool right = rng.uniform() >= p_gen;
    if (right) {
      out.acc.log_joint_ratio += std::log1p(-p0) - std::log1p(-p1);
      out.acc.joint_score += -dp0 / (1.0 - p0);
      ++rights;
    } else {
      out.acc.log_joint_ratio += std::log(p0) - std::log(p1);
      out.acc.joint_score += dp0 / p0;
    }
    if (keep_trace) out.moves.push_back(right);
  }
  out.bin = rights;
  return out;
}

std::vector<Sample> simulate_batch(const Config& config, double theta_gen, double theta0,
                                   double theta1, std::uint64_t base_seed, std::size_t n) {
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(simulate(config, theta_gen, theta0, theta1, derive_seed(base_seed, i)));
  }
  return out;
}

std::vector<double> exact_density(const Config& config, double theta) {
  config.validate();
  require_finite(theta, "theta");
  std::vector<double> occ(config.n_bins(), 0.0);
  std::vector<double> next(config.n_bins(), 0.0);
  occ[0] = 1.0;
  for (int row = 0; row < config.n_rows; ++row) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int k = 0; k <= row; ++k) {
      if (occ[k] == 0.0) continue;
      const auto [z_h, z_v] = nail_position(config, row, k);
      const double left = nail_prob_left(z_h, z_v, theta, config.curvature);
      next[k] += occ[k] * left;
      next[k + 1] += occ[k] * (1.0 - left);
    }
    occ.swap(next);
  }
  return occ;
}

std::vector<double> exact_log_ratio(const Config& config, double theta0, double theta1) {
  const auto p0 = exact_density(config, theta0);
  const auto p1 = exact_density(config, theta1);
  std::vector<double> out(p0.size());
  for (std::size_t x = 0; x < p0.size(); ++x) {
    if (!(p0[x] > 0.0) || !(p1[x] > 0.0)) {
      throw Error(ErrorCode::numeric,
                  "galton: NonpositiveDensity in bin " + std::to_string(x));
    }
    out[x] = std::log(p0[x]) - std::log(p1[x]);
  }
  return out;
}

std::vector<double> exact_score(const Config& config, double theta) {
  config.validate();
  require_finite(theta, "theta");
  const int bins = config.n_bins();
  std::vector<double> occ(bins, 0.0), docc(bins, 0.0);
  std::vector<double> next(bins), dnext(bins);
  occ[0] = 1.0;
  for (int row = 0; row < config.n_rows; ++row) {
    std::fill(next.begin(), next.end(), 0.0);
    std::fill(dnext.begin(), dnext.end(), 0.0);
    for (int k = 0; k <= row; ++k) {
      const auto [z_h, z_v] = nail_position(config, row, k);
      const double left = nail_prob_left(z_h, z_v, theta, config.curvature);
      const double dleft = nail_prob_left_dtheta(z_h, z_v, theta, config.curvature);
      next[k] += occ[k] * left;
      next[k + 1] += occ[k] * (1.0 - left);
      dnext[k] += docc[k] * left + occ[k] * dleft;
      dnext[k + 1] += docc[k] * (1.0 - left) - occ[k] * dleft;
    }
    occ.swap(next);
    docc.swap(dnext);
  }
  std::vector<double> score(bins);
  for (int x = 0; x < bins; ++x) score[x] = occ[x] > 0.0 ? docc[x] / occ[x] : 0.0;
  return score;
}

}  // namespace goldmine::galton
