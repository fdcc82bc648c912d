#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace goldmine::lotka {

inline constexpr int kNumParams = 4;
inline constexpr int kNumSummaries = 9;

/// Log-space rate parameters, ordered (predator birth, predator death,
/// prey birth, prey consumed).
using LogRates = std::array<double, kNumParams>;
using Summary = std::array<double, kNumSummaries>;

inline constexpr LogRates kReferenceLogRates{-4.61, -0.69, 0.00, -4.61};

struct State {
  std::int64_t predators = 0;
  std::int64_t prey = 0;
  double time = 0.0;
};

struct Settings {
  std::int64_t initial_predators = 50;
  std::int64_t initial_prey = 100;
  double horizon = 30.0;
  double record_dt = 0.2;
  std::int64_t population_cap = 100000;

  void validate() const;
  std::size_t n_snapshots() const;
};

struct TraceAccumulators {
  double log_joint_ratio = 0.0;
  std::array<double, kNumParams> joint_score{};
};

/// One Gillespie step: the state the event fired from, the waiting time
/// before it, and the event kind (index into the rate vector).
struct Event {
  std::int64_t predators;
  std::int64_t prey;
  double wait;
  int kind;
};

/// Full event history, enough to re-evaluate the trace density at any theta.
struct Trace {
  std::vector<Event> events;
  std::int64_t final_predators = 0;
  std::int64_t final_prey = 0;
  double censor_wait = 0.0;  // horizon minus time of the last event
};

struct Result {
  std::vector<State> series;  // snapshots every record_dt, t = 0 .. horizon
  TraceAccumulators acc;
  std::size_t n_events = 0;
  bool exploded = false;  // a population exceeded the cap; sample is invalid
  bool extinct = false;   // all rates vanished before the horizon
  std::optional<Trace> trace;
};

/// Event rates: exp(theta_1) X Y, exp(theta_2) X, exp(theta_3) Y, exp(theta_4) X Y
/// with X predators and Y prey.
std::array<double, kNumParams> rates(std::int64_t predators, std::int64_t prey,
                                     const LogRates& log_rates);

/// Gillespie simulation under params_gen with joint score (at theta0) and
/// joint log-ratio (theta0 vs theta1) accumulated along the trace, including
/// the survival interval between the last event and the horizon.
Result simulate(const Settings& settings, const LogRates& params_gen, const LogRates& theta0,
                const LogRates& theta1, std::uint64_t seed, bool keep_trace = false);

/// Nine summary statistics of a recorded series: means (2), log(variance+1)
/// (2), lag-1 and lag-2 autocorrelations of the standardized predator and
/// prey series (4), and their cross-correlation (1). Correlations of a
/// zero-variance series are 0. Consecutive snapshots with equal time stamps
/// are counted once.
Summary summarize(std::span<const State> series);

}  // namespace goldmine::lotka
