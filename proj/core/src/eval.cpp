#include "goldmine/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>

#include "goldmine/error.hpp"
#include "goldmine/galton.hpp"
#include "goldmine/rng.hpp"

namespace goldmine::eval {

using nlohmann::json;

EvalPoints galton_points(double theta0, double theta1, int first_bin, int last_bin) {
  if (last_bin < first_bin) throw Error(ErrorCode::config, "eval: empty bin range");
  const int n = last_bin - first_bin + 1;
  EvalPoints p{Matrix(1, n), Matrix::Constant(1, n, theta0), Matrix::Constant(1, n, theta1)};
  for (int i = 0; i < n; ++i) p.x(0, i) = first_bin + i;
  return p;
}

RowVector galton_reference(const galton::Config& config, const EvalPoints& points) {
  RowVector out(points.size());
  for (Eigen::Index j = 0; j < points.size(); ++j) {
    const auto lr = galton::exact_log_ratio(config, points.theta0(0, j), points.theta1(0, j));
    const auto bin = static_cast<std::size_t>(points.x(0, j));
    if (bin >= lr.size()) throw Error(ErrorCode::data, "eval: bin outside the board");
    out(j) = lr[bin];
  }
  return out;
}

EvalPoints lotka_points(const data::SimulatorConfig& simulator, const Vector& theta1, double half_width,
                        std::size_t n_x, std::size_t n_theta, std::uint64_t seed) {
  const Matrix xs = data::simulate_observables(simulator, theta1, n_x, seed);
  Rng rng(~seed);
  Matrix thetas(theta1.size(), static_cast<Eigen::Index>(n_theta));
  for (Eigen::Index t = 0; t < thetas.cols(); ++t) {
    for (Eigen::Index k = 0; k < theta1.size(); ++k) thetas(k, t) = theta1(k) + rng.uniform(-half_width, half_width);
  }
  const auto n = static_cast<Eigen::Index>(n_x * n_theta);
  EvalPoints p{Matrix(xs.rows(), n), Matrix(theta1.size(), n), Matrix(theta1.size(), n)};
  Eigen::Index j = 0;
  for (Eigen::Index t = 0; t < thetas.cols(); ++t) {
    for (Eigen::Index i = 0; i < xs.cols(); ++i, ++j) {
      p.x.col(j) = xs.col(i);
      p.theta0.col(j) = thetas.col(t);
      p.theta1.col(j) = theta1;
    }
  }
  return p;
}

double mse(const RowVector& estimate, const RowVector& reference) {
  if (estimate.size() != reference.size() || reference.size() == 0) {
    throw Error(ErrorCode::data, "eval: estimate and reference differ in size");
  }
  if (!reference.allFinite()) throw Error(ErrorCode::data, "eval: reference undefined at an evaluation point");
  return (estimate - reference).squaredNorm() / static_cast<double>(reference.size());
}

double mse_log_ratio(const methods::SurrogateModel& model, const RowVector& reference, const EvalPoints& points) {
  return mse(methods::evaluate_log_ratio_batch(model, points.x, points.theta0, points.theta1), reference);
}

double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorCode::data, "median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double MseReport::median() const { return eval::median(mse); }

double MseReport::stddev() const {
  if (mse.size() < 2) return 0.0;
  double m = 0.0;
  for (double v : mse) m += v;
  m /= static_cast<double>(mse.size());
  double s = 0.0;
  for (double v : mse) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(mse.size() - 1));
}

json MseReport::to_json() const {
  return {{"method", method}, {"n_train", n_train}, {"seeds", seeds},
          {"mse", mse},       {"median", median()}, {"stddev", stddev()}};
}

// ---- diagnostics ----

json ScoreDiagnostics::to_json() const {
  json j{{"n_score", n_score}, {"mean_score", data::vector_json(mean_score)}, {"n_ratio", n_ratio}};
  j["score_se"] = score_se ? data::vector_json(*score_se) : json(nullptr);
  j["score_z"] = score_z ? data::vector_json(*score_z) : json(nullptr);
  j["mean_ratio"] = mean_ratio ? json(*mean_ratio) : json(nullptr);
  j["ratio_se"] = ratio_se ? json(*ratio_se) : json(nullptr);
  j["ratio_z"] = ratio_z ? json(*ratio_z) : json(nullptr);
  return j;
}

ScoreDiagnostics score_diagnostics(std::span<const TrainingPair> records) {
  if (records.empty()) throw Error(ErrorCode::data, "score diagnostics: empty dataset");
  ScoreDiagnostics d;
  std::vector<const Vector*> scores;
  std::vector<double> ratios;
  for (const TrainingPair& p : records) {
    if (p.joint_score.size() > 0 && p.theta_gen == p.theta0) scores.push_back(&p.joint_score);
    if (p.log_joint_ratio && p.theta_gen == p.theta1) ratios.push_back(std::exp(*p.log_joint_ratio));
  }
  d.n_score = scores.size();
  d.n_ratio = ratios.size();
  if (!scores.empty()) {
    const Eigen::Index dim = scores.front()->size();
    d.mean_score = Vector::Zero(dim);
    for (const Vector* s : scores) d.mean_score += *s;
    d.mean_score /= static_cast<double>(scores.size());
    if (scores.size() > 1) {
      Vector var = Vector::Zero(dim);
      for (const Vector* s : scores) var += (*s - d.mean_score).cwiseAbs2();
      const double n = static_cast<double>(scores.size());
      d.score_se = (var / (n - 1.0) / n).cwiseSqrt();
      d.score_z = d.mean_score.cwiseQuotient(*d.score_se);
    }
  }
  if (!ratios.empty()) {
    const double n = static_cast<double>(ratios.size());
    double m = 0.0;
    for (double r : ratios) m += r;
    m /= n;
    d.mean_ratio = m;
    if (ratios.size() > 1) {
      double s = 0.0;
      for (double r : ratios) s += (r - m) * (r - m);
      d.ratio_se = std::sqrt(s / (n - 1.0) / n);
      d.ratio_z = (m - 1.0) / *d.ratio_se;
    }
  }
  return d;
}

// ---- confidence regions ----

std::vector<double> standard_levels() {
  return {std::erf(1.0 / std::numbers::sqrt2), std::erf(2.0 / std::numbers::sqrt2),
          std::erf(3.0 / std::numbers::sqrt2)};
}

double chi2_threshold(int dof, double level) {
  if (dof < 1 || !(level > 0.0 && level < 1.0)) throw Error(ErrorCode::config, "eval: bad confidence level");
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), level);
}

bool ConfidenceRegion::contains(std::size_t grid_index, std::size_t level_index) const {
  return q.at(grid_index) <= thresholds.at(level_index);
}

std::size_t ConfidenceRegion::count(std::size_t level_index) const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < q.size(); ++i) c += contains(i, level_index) ? 1 : 0;
  return c;
}

ConfidenceRegion confidence_region(const LogLikelihoodRatio& llr, const std::vector<Vector>& grid,
                                   const std::vector<double>& levels) {
  if (grid.size() < 2) throw Error(ErrorCode::config, "eval: confidence grid needs at least two points");
  const int dof = static_cast<int>(grid.front().size());
  ConfidenceRegion region;
  region.grid = grid;
  region.levels = levels;
  for (double level : levels) region.thresholds.push_back(chi2_threshold(dof, level));

  std::vector<double> sums(grid.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sums[i] = llr(grid[i]);
    if (!std::isfinite(sums[i])) throw Error(ErrorCode::numeric, "eval: non-finite log likelihood ratio");
    if (sums[i] > sums[best]) best = i;
  }
  region.theta_hat = grid[best];
  region.q.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) region.q[i] = -2.0 * (sums[i] - sums[best]);
  return region;
}

ConfidenceRegion confidence_region(const methods::SurrogateModel& model, const Matrix& observed,
                                   const std::vector<Vector>& grid, const std::vector<double>& levels) {
  if (observed.cols() == 0) throw Error(ErrorCode::data, "eval: no observations");
  if (grid.empty()) throw Error(ErrorCode::config, "eval: empty grid");
  const bool fixed_ref = methods::family(model.kind.method) == methods::Family::ratio;
  const Vector anchor = fixed_ref ? model.theta_ref : grid.front();
  const Matrix anchors = anchor.replicate(1, observed.cols());
  return confidence_region(
      [&](const Vector& theta) {
        if (methods::family(model.kind.method) == methods::Family::local) {
          throw Error(ErrorCode::unsupported, "eval: local models are calibrated per parameter pair");
        }
        return methods::evaluate_log_ratio_batch(model, observed, theta.replicate(1, observed.cols()), anchors).sum();
      },
      grid, levels);
}

// ---- ensembles ----

RowVector pointwise_median(const std::vector<RowVector>& predictions) {
  if (predictions.empty()) throw Error(ErrorCode::data, "eval: no ensemble predictions");
  const Eigen::Index n = predictions.front().size();
  RowVector out(n);
  std::vector<double> column(predictions.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    for (std::size_t m = 0; m < predictions.size(); ++m) {
      if (predictions[m].size() != n) throw Error(ErrorCode::data, "eval: ensemble predictions differ in size");
      column[m] = predictions[m](j);
    }
    out(j) = median(column);
  }
  return out;
}

RowVector EnsembleReference::predict(const EvalPoints& points) const {
  std::vector<RowVector> preds;
  preds.reserve(members.size());
  for (const auto& m : members) {
    preds.push_back(methods::evaluate_log_ratio_batch(m, points.x, points.theta0, points.theta1));
  }
  return pointwise_median(preds);
}

EnsembleReference build_ensemble_reference(const methods::MethodKind& kind, std::span<const TrainingPair> pairs,
                                           const ObservableInfo& info, const methods::TrainConfig& config,
                                           const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 3) throw Error(ErrorCode::config, "eval: an ensemble reference needs at least three members");
  EnsembleReference ref;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    try {
      ref.members.push_back(methods::train(kind, pairs, info, config, seeds[i]));
    } catch (const Error& e) {
      throw Error(e.code(), "ensemble member " + std::to_string(i) + ": " + e.what());
    }
  }
  return ref;
}

}  // namespace goldmine::eval
