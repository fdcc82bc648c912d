#include <algorithm>
#include <cmath>

#include "goldmine/error.hpp"
#include "goldmine/methods.hpp"

namespace goldmine::methods {

std::size_t Binning::n_cells() const {
  std::size_t n = 1;
  for (int i = 0; i < dim(); ++i) n *= static_cast<std::size_t>(bins_per_dim);
  return n;
}

std::size_t Binning::cell(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != dim()) {
    throw Error(ErrorCode::config, "binning: point dimension mismatch");
  }
  std::size_t index = 0;
  for (int i = 0; i < dim(); ++i) {
    const double u = (point[i] - lo[i]) / (hi[i] - lo[i]) * bins_per_dim;
    const double clamped = std::clamp(std::floor(u), 0.0, static_cast<double>(bins_per_dim - 1));
    index = index * static_cast<std::size_t>(bins_per_dim) + static_cast<std::size_t>(clamped);
  }
  return index;
}

double Binning::cell_volume() const {
  double v = 1.0;
  for (int i = 0; i < dim(); ++i) v *= (hi[i] - lo[i]) / bins_per_dim;
  return v;
}

Binning Binning::from_samples(const Matrix& columns, int bins_per_dim, double coverage) {
  if (bins_per_dim < 1) throw Error(ErrorCode::config, "binning: need at least one bin");
  if (columns.cols() == 0) throw Error(ErrorCode::data, "binning: no samples");
  Binning b;
  b.bins_per_dim = bins_per_dim;
  const double tail = 0.5 * (1.0 - coverage);
  const auto last = static_cast<double>(columns.cols() - 1);
  for (Eigen::Index i = 0; i < columns.rows(); ++i) {
    std::vector<double> v(columns.row(i).begin(), columns.row(i).end());
    std::sort(v.begin(), v.end());
    double lo = v[static_cast<std::size_t>(std::floor(tail * last))];
    double hi = v[static_cast<std::size_t>(std::ceil((1.0 - tail) * last))];
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
      throw Error(ErrorCode::numeric, "binning: non-finite statistic");
    }
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) {
      lo -= 0.5;
      hi += 0.5;
    }
    b.lo.push_back(lo);
    b.hi.push_back(hi);
  }
  return b;
}

double Histogram::density(std::span<const double> point) const {
  return mass[binning.cell(point)] / binning.cell_volume();
}

bool Histogram::empty_at(std::span<const double> point) const {
  return counts[binning.cell(point)] == 0;
}

double Histogram::integral() const {
  double s = 0.0;
  for (double m : mass) s += m;
  return s;
}

Matrix local_statistic(const net::Network& score_net, Method m, const Matrix& x, const Vector& theta0,
                       const Vector& theta1) {
  const net::Tape tape = net::forward_tape(score_net, net::make_inputs(x, Matrix(0, x.cols())), false);
  if (m == Method::sallino) return (theta0 - theta1).transpose() * tape.raw;
  return tape.raw;
}

Histogram calibrate_local(const net::Network& score_net, Method m, const ObservableSampler& simulator,
                          const Vector& theta_eval, const Vector& theta0, const Vector& theta1,
                          std::size_t n_sims, const Binning& binning, std::uint64_t seed) {
  if (m != Method::sally && m != Method::sallino) {
    throw Error(ErrorCode::unsupported, "calibration: only SALLY and SALLINO use score histograms");
  }
  if (n_sims == 0) throw Error(ErrorCode::config, "calibration: n_sims must be positive");
  const Matrix x = simulator(theta_eval, n_sims, seed);
  const Matrix stat = local_statistic(score_net, m, x, theta0, theta1);
  if (stat.rows() != binning.dim()) throw Error(ErrorCode::config, "calibration: binning dimension mismatch");

  Histogram h;
  h.binning = binning;
  h.n_samples = static_cast<std::size_t>(stat.cols());
  const std::size_t cells = binning.n_cells();
  h.counts.assign(cells, 0);
  for (Eigen::Index j = 0; j < stat.cols(); ++j) {
    ++h.counts[binning.cell(std::span<const double>(stat.col(j).data(), static_cast<std::size_t>(stat.rows())))];
  }
  const double n = static_cast<double>(h.n_samples);
  const double eps = 1.0 / (n * static_cast<double>(cells));
  const double norm = 1.0 + eps * static_cast<double>(cells);
  h.mass.resize(cells);
  for (std::size_t c = 0; c < cells; ++c) h.mass[c] = (static_cast<double>(h.counts[c]) / n + eps) / norm;
  return h;
}

}  // namespace goldmine::methods
