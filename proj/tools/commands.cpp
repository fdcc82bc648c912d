#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include "goldmine/checkpoint.hpp"
#include "goldmine/error.hpp"
#include "goldmine/galton.hpp"

namespace goldmine::cli {

using methods::Method;
using methods::RowVector;
using nlohmann::json;

namespace {

std::string number(double v) { return json(v).dump(); }

fs::path with_extension(const fs::path& out, const char* ext) {
  fs::path p = out;
  if (p.extension() == ".csv" || p.extension() == ".json") p.replace_extension();
  p += ext;
  return p;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::ofstream open_out(const fs::path& p) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::config, "cannot write " + p.string());
  return out;
}

std::vector<eval::MseReport> group(const std::vector<MseRow>& rows) {
  std::vector<eval::MseReport> out;
  for (const MseRow& r : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const eval::MseReport& m) { return m.method == r.method && m.n_train == r.n_train; });
    if (it == out.end()) {
      out.push_back({r.method, r.n_train, {}, {}});
      it = out.end() - 1;
    }
    it->seeds.push_back(r.seed);
    it->mse.push_back(r.mse);
  }
  return out;
}

/// Observables per seed: datasets for a ladder are prefixes of one stream.
std::uint64_t dataset_seed(const ExperimentConfig& c, std::size_t seed_index) {
  return c.base_seed + (static_cast<std::uint64_t>(seed_index) << 32);
}

}  // namespace

std::size_t thread_budget() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GOLDMINE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw Error(ErrorCode::config, "GOLDMINE_THREADS must be a positive integer");
    }
    n = static_cast<std::size_t>(v);
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_budget(), n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---- simulate / train ----

void cmd_simulate(const ExperimentConfig& config, methods::Family family, std::size_t n, std::uint64_t seed,
                  const fs::path& out) {
  const data::Dataset ds = data::generate(config.simulator, config.sampling(family), n, seed);
  ensure_parent(out);
  data::save(ds, out);
}

methods::SurrogateModel cmd_train(const ExperimentConfig& config, const fs::path& dataset,
                                  const methods::MethodKind& kind, std::uint64_t seed, const fs::path& out) {
  const data::Dataset ds = data::load(dataset);
  methods::SurrogateModel model =
      methods::train(kind, ds.records, ds.header.simulator.info(), config.training, seed);
  model.dataset_digest = ds.header.records_digest;
  if (methods::family(kind.method) == methods::Family::local && ds.header.simulator.kind == data::SimulatorKind::galton) {
    ExperimentConfig local = config;
    local.simulator = ds.header.simulator;
    ensure_calibrated(model, local, oracle_reference(local).points);
  }
  ensure_parent(out);
  checkpoint::save(model, out);
  return model;
}

// ---- references ----

Reference oracle_reference(const ExperimentConfig& config) {
  if (config.simulator.kind != data::SimulatorKind::galton) {
    throw Error(ErrorCode::unsupported,
                "no exact reference: the Lotka-Volterra likelihood is intractable; pass --reference checkpoints");
  }
  const EvaluationConfig& e = config.evaluation;
  Reference r;
  r.points = eval::galton_points(e.theta0(0), e.theta1(0), e.first_bin, e.last_bin);
  r.values = eval::galton_reference(config.simulator.galton, r.points);
  r.description = "exact";
  return r;
}

Reference ensemble_reference(const ExperimentConfig& config, const std::vector<methods::SurrogateModel>& members) {
  if (members.empty()) throw Error(ErrorCode::config, "ensemble reference needs at least one model");
  const EvaluationConfig& e = config.evaluation;
  Reference r;
  if (config.simulator.kind == data::SimulatorKind::galton) {
    r.points = eval::galton_points(e.theta0(0), e.theta1(0), e.first_bin, e.last_bin);
  } else {
    r.points = eval::lotka_points(config.simulator, e.theta1, e.half_width, e.n_x, e.n_theta, e.seed);
  }
  eval::EnsembleReference ens{members};
  for (auto& m : ens.members) ensure_calibrated(m, config, r.points);
  r.values = ens.predict(r.points);
  r.description = "ensemble median of " + std::to_string(members.size()) + " models";
  return r;
}

void ensure_calibrated(methods::SurrogateModel& model, const ExperimentConfig& config, const eval::EvalPoints& points) {
  if (methods::family(model.kind.method) != methods::Family::local) return;
  const auto sampler = data::observable_sampler(config.simulator);
  for (Eigen::Index j = 0; j < points.size(); ++j) {
    const Vector t0 = points.theta0.col(j), t1 = points.theta1.col(j);
    const bool known = std::any_of(model.calibrations.begin(), model.calibrations.end(),
                                   [&](const methods::LocalCalibration& c) { return c.theta0 == t0 && c.theta1 == t1; });
    if (!known) {
      methods::calibrate(model, sampler, t0, t1, config.evaluation.calibration_sims, config.evaluation.bins_per_dim,
                         config.evaluation.seed + 1);
    }
  }
}

// ---- evaluate ----

void write_report(const Report& report, const fs::path& out, const json& extra) {
  {
    std::ofstream csv = open_out(with_extension(out, ".csv"));
    csv << "method,n_train,seed,mse\n";
    for (const MseRow& r : report.rows) csv << r.method << ',' << r.n_train << ',' << r.seed << ',' << number(r.mse) << '\n';
  }
  json j = extra;
  j["reports"] = json::array();
  for (const auto& m : report.reports) j["reports"].push_back(m.to_json());
  if (report.zero_mse) j["zero_predictor_mse"] = *report.zero_mse;
  std::ofstream js = open_out(with_extension(out, ".json"));
  js << j.dump(2) << '\n';
}

Report cmd_evaluate(const ExperimentConfig& config, const std::vector<fs::path>& checkpoints,
                    const std::vector<fs::path>& reference, const fs::path& out) {
  std::vector<methods::SurrogateModel> models;
  for (const fs::path& p : checkpoints) models.push_back(checkpoint::load(p));
  Reference ref;
  if (reference.empty()) {
    ref = oracle_reference(config);
  } else {
    std::vector<methods::SurrogateModel> members;
    for (const fs::path& p : reference) members.push_back(checkpoint::load(p));
    ref = ensemble_reference(config, members);
  }
  Report report;
  report.zero_mse = eval::mse(RowVector::Zero(ref.values.size()), ref.values);
  for (auto& m : models) {
    ensure_calibrated(m, config, ref.points);
    report.rows.push_back({std::string(methods::name(m.kind.method)), m.n_train, m.seed,
                           eval::mse_log_ratio(m, ref.values, ref.points)});
  }
  report.reports = group(report.rows);

  json extra{{"simulator", config.simulator.to_json()}, {"reference", ref.description}};
  write_report(report, out, extra);

  if (config.evaluation.confidence && config.simulator.kind == data::SimulatorKind::galton) {
    const ConfidenceConfig& cc = *config.evaluation.confidence;
    const methods::Matrix observed =
        data::simulate_observables(config.simulator, cc.theta_true, cc.n_obs, cc.seed);
    std::vector<Vector> grid;
    for (int i = 0; i < cc.grid_n; ++i) {
      grid.push_back(Vector::Constant(1, cc.grid_lo + (cc.grid_hi - cc.grid_lo) * i / (cc.grid_n - 1)));
    }
    std::ofstream csv = open_out(with_extension(out, "_confidence.csv"));
    csv << "method,seed,theta,q,in_1sigma,in_2sigma,in_3sigma\n";
    for (const auto& m : models) {
      if (methods::family(m.kind.method) == methods::Family::local) continue;
      const eval::ConfidenceRegion r = eval::confidence_region(m, observed, grid, eval::standard_levels());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        csv << methods::name(m.kind.method) << ',' << m.seed << ',' << number(grid[i](0)) << ',' << number(r.q[i]);
        for (std::size_t l = 0; l < 3; ++l) csv << ',' << (r.contains(i, l) ? 1 : 0);
        csv << '\n';
      }
    }
  }
  return report;
}

// ---- oracle ----

void cmd_oracle(const ExperimentConfig& config, const Vector& theta0, const Vector& theta1, std::ostream& out) {
  if (config.simulator.kind != data::SimulatorKind::galton) {
    throw Error(ErrorCode::unsupported,
                "oracle: the Lotka-Volterra likelihood is intractable, no exact density is available");
  }
  if (theta0.size() != 1 || theta1.size() != 1) throw Error(ErrorCode::config, "oracle: theta must be a scalar");
  const auto p0 = galton::exact_density(config.simulator.galton, theta0(0));
  const auto p1 = galton::exact_density(config.simulator.galton, theta1(0));
  out << "bin,p_theta0,p_theta1,log_r\n";
  for (std::size_t x = 0; x < p0.size(); ++x) {
    const double lr = theta0(0) == theta1(0) ? 0.0 : std::log(p0[x]) - std::log(p1[x]);
    out << x << ',' << number(p0[x]) << ',' << number(p1[x]) << ',' << number(lr) << '\n';
  }
}

// ---- figure 2 ladder ----

Report cmd_figure2(const ExperimentConfig& config, const fs::path& out, std::ostream* progress) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!progress) return;
    const double t = std::chrono::duration<double>(clock::now() - start).count();
    std::lock_guard lock(log_mutex);
    *progress << "[" << static_cast<long>(t) << "s] " << msg << std::endl;
  };
  if (config.methods.empty() || config.sizes.empty()) throw Error(ErrorCode::config, "figure2: nothing to run");
  const ObservableInfo info = config.simulator.info();
  const std::size_t max_n = config.sizes.back();

  // datasets per (family, seed), generated at the largest size
  std::vector<methods::Family> families;
  for (Method m : config.methods) {
    if (std::find(families.begin(), families.end(), methods::family(m)) == families.end()) {
      families.push_back(methods::family(m));
    }
  }
  std::vector<data::Dataset> datasets(families.size() * config.seeds);
  parallel_for(datasets.size(), [&](std::size_t i) {
    const methods::Family f = families[i / config.seeds];
    const std::size_t s = i % config.seeds;
    datasets[i] = data::generate(config.simulator, config.sampling(f), max_n, dataset_seed(config, s));
  });
  log("generated " + std::to_string(datasets.size()) + " datasets of " + std::to_string(max_n) + " samples");

  // reference
  Reference ref;
  if (config.simulator.kind == data::SimulatorKind::galton) {
    ref = oracle_reference(config);
  } else {
    const EvaluationConfig& e = config.evaluation;
    const methods::MethodKind rk{e.reference_method, e.reference_alpha};
    const data::Dataset full = data::generate(config.simulator, config.sampling(methods::family(rk.method)),
                                              e.reference_n, config.base_seed + (std::uint64_t{1} << 48));
    std::vector<std::optional<methods::SurrogateModel>> trained(e.reference_models);
    parallel_for(trained.size(), [&](std::size_t m) {
      try {
        trained[m] = methods::train(rk, full.records, info, config.training, config.base_seed + 1000 + m);
      } catch (const Error& err) {
        throw Error(err.code(), "ensemble member " + std::to_string(m) + ": " + err.what());
      }
    });
    std::vector<methods::SurrogateModel> members;
    for (auto& t : trained) members.push_back(std::move(*t));
    log("trained " + std::to_string(members.size()) + " reference models");
    ref = ensemble_reference(config, members);
  }

  struct Cell {
    Method method;
    std::size_t size;
    std::size_t seed;
  };
  std::vector<Cell> cells;
  for (Method m : config.methods) {
    for (std::size_t n : config.sizes) {
      for (std::size_t s = 0; s < config.seeds; ++s) cells.push_back({m, n, s});
    }
  }
  std::vector<MseRow> rows(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    const Cell& c = cells[i];
    const std::size_t fi =
        static_cast<std::size_t>(std::find(families.begin(), families.end(), methods::family(c.method)) - families.begin());
    const auto& records = datasets[fi * config.seeds + c.seed].records;
    const std::span<const TrainingPair> subset(records.data(), c.size);
    const std::uint64_t train_seed = config.base_seed + c.seed;
    methods::SurrogateModel model = methods::train(config.kind(c.method), subset, info, config.training, train_seed);
    ensure_calibrated(model, config, ref.points);
    rows[i] = {std::string(methods::name(c.method)), c.size, train_seed, eval::mse_log_ratio(model, ref.values, ref.points)};
    log(rows[i].method + " n=" + std::to_string(c.size) + " seed=" + std::to_string(train_seed) +
        " mse=" + number(rows[i].mse));
  });

  Report report;
  report.rows = std::move(rows);
  report.reports = group(report.rows);
  report.zero_mse = eval::mse(RowVector::Zero(ref.values.size()), ref.values);
  const json extra{{"simulator", config.simulator.to_json()},
                   {"reference", ref.description},
                   {"sizes", config.sizes},
                   {"seeds", config.seeds},
                   {"base_seed", config.base_seed}};
  if (!out.empty()) write_report(report, out, extra);
  log("done");
  return report;
}

}  // namespace goldmine::cli
