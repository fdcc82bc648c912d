#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "goldmine/dataset.hpp"
#include "goldmine/methods.hpp"

namespace goldmine::cli {

using methods::Vector;

struct ConfidenceConfig {
  Vector theta_true;
  std::size_t n_obs = 100;
  double grid_lo = -1.2;
  double grid_hi = -0.4;
  int grid_n = 81;
  std::uint64_t seed = 11;
};

struct EvaluationConfig {
  Vector theta0;
  Vector theta1;
  // Galton
  int first_bin = 5;
  int last_bin = 15;
  // Lotka-Volterra: observables at theta1 crossed with theta0 draws from the box
  std::size_t n_x = 500;
  std::size_t n_theta = 100;
  double half_width = 0.01;
  std::uint64_t seed = 7;
  // ensemble reference
  methods::Method reference_method = methods::Method::scandal;
  double reference_alpha = 1.0;
  std::size_t reference_models = 5;
  std::size_t reference_n = 20000;
  // local methods
  std::size_t calibration_sims = 100000;
  int bins_per_dim = 20;
  std::optional<ConfidenceConfig> confidence;
};

struct ExperimentConfig {
  data::SimulatorConfig simulator;
  std::vector<methods::Method> methods;
  std::map<methods::Method, double> alpha;
  methods::TrainConfig training;
  std::vector<std::size_t> sizes;
  std::size_t seeds = 5;
  std::uint64_t base_seed = 1;
  nlohmann::json sampling_overrides = nlohmann::json::object();
  EvaluationConfig evaluation;

  static ExperimentConfig defaults(data::SimulatorKind kind);
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);

  void validate() const;
  methods::MethodKind kind(methods::Method m) const;
  data::ThetaSampling sampling(methods::Family family) const;
};

}  // namespace goldmine::cli
