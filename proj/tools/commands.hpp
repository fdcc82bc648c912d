#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "experiment.hpp"
#include "goldmine/eval.hpp"

namespace goldmine::cli {

namespace fs = std::filesystem;

struct MseRow {
  std::string method;
  std::size_t n_train = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
};

struct Report {
  std::vector<MseRow> rows;
  std::vector<eval::MseReport> reports;  // grouped by (method, n_train)
  std::optional<double> zero_mse;        // MSE of log r_hat = 0 against the reference
};

/// Evaluation points with reference log-ratios.
struct Reference {
  eval::EvalPoints points;
  methods::RowVector values;
  std::string description;
};

void cmd_simulate(const ExperimentConfig& config, methods::Family family, std::size_t n, std::uint64_t seed,
                  const fs::path& out);

methods::SurrogateModel cmd_train(const ExperimentConfig& config, const fs::path& dataset,
                                  const methods::MethodKind& kind, std::uint64_t seed, const fs::path& out);

/// Reference from the exact oracle (Galton) or, when `reference` is non-empty,
/// from the median of those checkpoints.
Report cmd_evaluate(const ExperimentConfig& config, const std::vector<fs::path>& checkpoints,
                    const std::vector<fs::path>& reference, const fs::path& out);

void cmd_oracle(const ExperimentConfig& config, const Vector& theta0, const Vector& theta1, std::ostream& out);

/// Full ladder over methods x sizes x seeds. Writes <out>.csv and <out>.json.
Report cmd_figure2(const ExperimentConfig& config, const fs::path& out, std::ostream* progress = nullptr);

Reference oracle_reference(const ExperimentConfig& config);
Reference ensemble_reference(const ExperimentConfig& config, const std::vector<methods::SurrogateModel>& members);

/// Calibrates local models for every (theta0, theta1) pair in the points that lacks one.
void ensure_calibrated(methods::SurrogateModel& model, const ExperimentConfig& config, const eval::EvalPoints& points);

/// Runs fn(0..n-1) on up to GOLDMINE_THREADS threads; rethrows the first failure by index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);
std::size_t thread_budget();

void write_report(const Report& report, const fs::path& out, const nlohmann::json& extra = nlohmann::json::object());

}  // namespace goldmine::cli
