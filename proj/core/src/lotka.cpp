#include "goldmine/lotka.hpp"

#include <cmath>
#include <string>

#include "goldmine/error.hpp"
#include "goldmine/rng.hpp"

namespace goldmine::lotka {
namespace {

void require_finite(const LogRates& p, const char* name) {
  for (double v : p) {
    if (!std::isfinite(v)) throw Error(ErrorCode::config, std::string("lotka: non-finite ") + name);
  }
}

std::array<double, kNumParams> exp_rates(const LogRates& p) {
  return {std::exp(p[0]), std::exp(p[1]), std::exp(p[2]), std::exp(p[3])};
}

std::array<double, kNumParams> rates_from_coeffs(std::int64_t x, std::int64_t y,
                                                 const std::array<double, kNumParams>& c) {
  const double fx = static_cast<double>(x);
  const double fy = static_cast<double>(y);
  return {c[0] * fx * fy, c[1] * fx, c[2] * fy, c[3] * fx * fy};
}

double total(const std::array<double, kNumParams>& r) { return r[0] + r[1] + r[2] + r[3]; }

}  // namespace

void Settings::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw Error(ErrorCode::config, "lotka: horizon must be > 0");
  if (!(record_dt > 0.0) || !std::isfinite(record_dt)) throw Error(ErrorCode::config, "lotka: record_dt must be > 0");
  if (initial_predators < 0 || initial_prey < 0) throw Error(ErrorCode::config, "lotka: negative initial population");
  if (population_cap < 1) throw Error(ErrorCode::config, "lotka: population cap must be >= 1");
}

std::size_t Settings::n_snapshots() const {
  return static_cast<std::size_t>(std::floor(horizon / record_dt + 1e-9)) + 1;
}

std::array<double, kNumParams> rates(std::int64_t predators, std::int64_t prey,
                                     const LogRates& log_rates) {
  return rates_from_coeffs(predators, prey, exp_rates(log_rates));
}

Result simulate(const Settings& settings, const LogRates& params_gen, const LogRates& theta0,
                const LogRates& theta1, std::uint64_t seed, bool keep_trace) {
  settings.validate();
  require_finite(params_gen, "params_gen");
  require_finite(theta0, "theta0");
  require_finite(theta1, "theta1");

  const auto c_gen = exp_rates(params_gen);
  const auto c0 = exp_rates(theta0);
  const auto c1 = exp_rates(theta1);

  Rng rng(seed);
  Result out;
  const std::size_t n_snap = settings.n_snapshots();
  out.series.reserve(n_snap);
  if (keep_trace) out.trace.emplace();

  std::int64_t x = settings.initial_predators;
  std::int64_t y = settings.initial_prey;
  double t = 0.0;
  std::size_t next_snap = 0;
  auto record_until = [&](double t_stop, bool inclusive) {
    while (next_snap < n_snap) {
      const double ts = static_cast<double>(next_snap) * settings.record_dt;
      if (inclusive ? ts > t_stop : ts >= t_stop) break;
      out.series.push_back({x, y, ts});
      ++next_snap;
    }
  };

  auto accumulate_wait = [&](double wait) {
    const auto r0 = rates_from_coeffs(x, y, c0);
    const auto r1 = rates_from_coeffs(x, y, c1);
    for (int k = 0; k < kNumParams; ++k) out.acc.joint_score[k] -= r0[k] * wait;
    out.acc.log_joint_ratio -= (total(r0) - total(r1)) * wait;
  };

  while (true) {
    const auto r_gen = rates_from_coeffs(x, y, c_gen);
    const double lambda = total(r_gen);
    if (lambda <= 0.0) {
      out.extinct = true;
      break;
    }
    const double wait = rng.exponential(lambda);
    if (t + wait > settings.horizon) break;

    const double u = rng.uniform() * lambda;
    int kind = kNumParams - 1;
    double cum = 0.0;
    for (int k = 0; k < kNumParams; ++k) {
      cum += r_gen[k];
      if (u < cum) {
        kind = k;
        break;
      }
    }
    // guard against u landing on a zero-rate tail through rounding
    while (r_gen[kind] <= 0.0) --kind;

    accumulate_wait(wait);
    out.acc.joint_score[kind] += 1.0;
    out.acc.log_joint_ratio += theta0[kind] - theta1[kind];
    if (keep_trace) out.trace->events.push_back({x, y, wait, kind});

    t += wait;
    record_until(t, false);
    switch (kind) {
      case 0: ++x; break;
      case 1: --x; break;
      case 2: ++y; break;
      default: --y; break;
    }
    ++out.n_events;
    if (x > settings.population_cap || y > settings.population_cap) {
      out.exploded = true;
      return out;
    }
  }

  const double censor = settings.horizon - t;
  accumulate_wait(censor);
  record_until(settings.horizon, true);
  if (keep_trace) {
    out.trace->final_predators = x;
    out.trace->final_prey = y;
    out.trace->censor_wait = censor;
  }
  return out;
}

Summary summarize(std::span<const State> series) {
  if (series.empty()) throw Error(ErrorCode::data, "lotka: cannot summarize an empty series");

  std::vector<double> xs, ys;
  xs.reserve(series.size());
  ys.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i > 0 && series[i].time == series[i - 1].time) continue;
    xs.push_back(static_cast<double>(series[i].predators));
    ys.push_back(static_cast<double>(series[i].prey));
  }
  const double n = static_cast<double>(xs.size());

  auto mean_var = [n](const std::vector<double>& v) {
    double m = 0.0;
    for (double a : v) m += a;
    m /= n;
    double s = 0.0;
    for (double a : v) s += (a - m) * (a - m);
    return std::pair{m, s / n};
  };
  const auto [mx, vx] = mean_var(xs);
  const auto [my, vy] = mean_var(ys);

  auto standardized = [](const std::vector<double>& v, double m, double var) {
    std::vector<double> out(v.size(), 0.0);
    if (var <= 0.0) return out;
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - m) / sd;
    return out;
  };
  const auto zx = standardized(xs, mx, vx);
  const auto zy = standardized(ys, my, vy);

  auto lagged = [n](const std::vector<double>& a, const std::vector<double>& b, std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < a.size(); ++i) s += a[i] * b[i + lag];
    return s / n;
  };

  return {mx,
          my,
          std::log(vx + 1.0),
          std::log(vy + 1.0),
          lagged(zx, zx, 1),
          lagged(zx, zx, 2),
          lagged(zy, zy, 1),
          lagged(zy, zy, 2),
          lagged(zx, zy, 0)};
}

}  // namespace goldmine::lotka
