#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "goldmine/galton.hpp"
#include "goldmine/lotka.hpp"
#include "goldmine/methods.hpp"
#include "goldmine/sample.hpp"

namespace goldmine::data {

using methods::Vector;

enum class SimulatorKind { galton, lotka };

std::string_view name(SimulatorKind kind);
SimulatorKind parse_simulator(std::string_view text);

struct SimulatorConfig {
  SimulatorKind kind = SimulatorKind::galton;
  galton::Config galton;
  lotka::Settings lotka;

  void validate() const;
  ObservableInfo info() const;
  nlohmann::json to_json() const;
  static SimulatorConfig from_json(const nlohmann::json& j);
  std::string digest() const;
};

/// How parameter points are assigned to records.
///  ratio:   y alternates 0,1; theta0 cycles through `grid` (or is drawn
///           uniformly from the box around theta1); x is drawn at theta0 for
///           y = 0 and at theta1 for y = 1.
///  density: y = 0, x drawn at theta0 = theta_gen chosen as above.
///  local:   y = 0, theta0 = theta_gen = theta_ref.
struct ThetaSampling {
  methods::Family family = methods::Family::ratio;
  std::vector<Vector> grid;
  double box_half_width = 0.01;
  Vector theta1;
  Vector theta_ref;

  void validate(int theta_dim) const;
  nlohmann::json to_json() const;
  static ThetaSampling from_json(const nlohmann::json& j);

  /// Galton: ten points on [-1, -0.4], theta1 = -0.6, theta_ref = -0.7.
  /// Lotka-Volterra: +-0.01 box around the reference log rates.
  static ThetaSampling defaults(SimulatorKind kind, methods::Family family);
};

struct DatasetHeader {
  SimulatorConfig simulator;
  std::string config_digest;
  ThetaSampling sampling;
  std::uint64_t base_seed = 0;
  std::string created;
  std::size_t n_records = 0;
  std::size_t n_invalid = 0;  // simulations discarded (population explosions)
  std::string records_digest;
};

struct Dataset {
  DatasetHeader header;
  std::vector<TrainingPair> records;
};

/// Simulates n valid records. Attempt i uses seed base_seed + i; invalid
/// attempts are skipped and counted.
Dataset generate(const SimulatorConfig& simulator, const ThetaSampling& sampling, std::size_t n,
                 std::uint64_t base_seed);

/// Observables only, for calibration and evaluation sets.
methods::Matrix simulate_observables(const SimulatorConfig& simulator, const Vector& theta,
                                     std::size_t n, std::uint64_t base_seed);
methods::ObservableSampler observable_sampler(const SimulatorConfig& simulator);

nlohmann::json record_to_json(const TrainingPair& pair, const ObservableInfo& info);
TrainingPair record_from_json(const nlohmann::json& j, const ObservableInfo& info);

/// Newline-delimited JSON: a header line, then one line per record.
void write(const Dataset& dataset, std::ostream& out);
Dataset read(std::istream& in);
void save(const Dataset& dataset, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

/// ISO-8601 time from SOURCE_DATE_EPOCH, or the Unix epoch when unset, so
/// repeated runs produce identical files.
std::string creation_time();

nlohmann::json vector_json(const Vector& v);
Vector json_vector(const nlohmann::json& j);

}  // namespace goldmine::data
