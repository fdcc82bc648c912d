#include "experiment.hpp"

#include <fstream>
#include <set>

#include "goldmine/error.hpp"

namespace goldmine::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::config, "config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void read_vector(const json& j, const char* key, Vector& out) {
  if (!j.contains(key)) return;
  try {
    out = data::json_vector(j.at(key));
  } catch (const Error& e) {
    throw Error(ErrorCode::config, std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(data::SimulatorKind kind) {
  using methods::Method;
  ExperimentConfig c;
  c.simulator.kind = kind;
  for (Method m : methods::all_methods()) {
    if (methods::default_alpha(m) > 0) c.alpha[m] = methods::default_alpha(m);
  }
  // every run gets a converged fit: full budget, best-validation weights kept
  c.training.patience = 0;
  c.training.min_steps = 10000;
  const data::ThetaSampling s = data::ThetaSampling::defaults(kind, methods::Family::ratio);
  c.evaluation.theta1 = s.theta1;
  if (kind == data::SimulatorKind::galton) {
    c.methods = {Method::carl, Method::rolr, Method::rascal, Method::cascal, Method::nde, Method::scandal};
    c.sizes = {100, 1000, 10000, 100000};
    c.evaluation.theta0 = Vector::Constant(1, -0.8);
  } else {
    c.methods = {Method::nde, Method::scandal};
    c.sizes = {2000};
    c.evaluation.theta0 = s.theta1;
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::config, "config: expected a JSON object");
  reject_unknown(j, {"simulator", "methods", "alpha", "network", "training", "sizes", "seeds", "base_seed", "sampling",
                     "evaluation"},
                 "the top level");
  data::SimulatorKind kind = data::SimulatorKind::galton;
  if (j.contains("simulator")) {
    const json& s = j.at("simulator");
    kind = data::parse_simulator(s.is_string() ? s.get<std::string>() : s.value("name", "galton"));
  }
  ExperimentConfig c = defaults(kind);
  if (j.contains("simulator")) {
    try {
      c.simulator = data::SimulatorConfig::from_json(j.at("simulator"));
    } catch (const Error& e) {
      throw Error(ErrorCode::config, e.what());
    }
  }
  if (j.contains("methods")) {
    c.methods.clear();
    for (const json& m : j.at("methods")) c.methods.push_back(methods::parse_method(m.get<std::string>()));
  }
  if (j.contains("alpha")) {
    const json& a = j.at("alpha");
    if (a.is_number()) {
      for (auto& [m, v] : c.alpha) v = a.get<double>();
    } else {
      for (const auto& [name, v] : a.items()) c.alpha[methods::parse_method(name)] = v.get<double>();
    }
  }
  if (j.contains("network")) {
    const json& n = j.at("network");
    reject_unknown(n, {"hidden", "mixture_components"}, "network");
    read(n, "hidden", c.training.hidden);
    read(n, "mixture_components", c.training.mixture_components);
  }
  if (j.contains("training")) {
    const json& t = j.at("training");
    reject_unknown(t, {"epochs", "batch_size", "learning_rate", "validation_fraction", "patience", "min_steps"},
                  "training");
    read(t, "epochs", c.training.epochs);
    read(t, "batch_size", c.training.batch_size);
    read(t, "learning_rate", c.training.learning_rate);
    read(t, "validation_fraction", c.training.validation_fraction);
    read(t, "patience", c.training.patience);
    read(t, "min_steps", c.training.min_steps);
  }
  read(j, "sizes", c.sizes);
  read(j, "seeds", c.seeds);
  read(j, "base_seed", c.base_seed);
  if (j.contains("sampling")) {
    c.sampling_overrides = j.at("sampling");
    reject_unknown(c.sampling_overrides, {"grid", "box_half_width", "theta1", "theta_ref"}, "sampling");
  }
  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    reject_unknown(e, {"theta0", "theta1", "first_bin", "last_bin", "n_x", "n_theta", "half_width", "seed",
                       "reference_method", "reference_alpha", "reference_models", "reference_n", "calibration_sims",
                       "bins_per_dim", "confidence"},
                   "evaluation");
    EvaluationConfig& ev = c.evaluation;
    read_vector(e, "theta0", ev.theta0);
    read_vector(e, "theta1", ev.theta1);
    read(e, "first_bin", ev.first_bin);
    read(e, "last_bin", ev.last_bin);
    read(e, "n_x", ev.n_x);
    read(e, "n_theta", ev.n_theta);
    read(e, "half_width", ev.half_width);
    read(e, "seed", ev.seed);
    if (e.contains("reference_method")) ev.reference_method = methods::parse_method(e.at("reference_method").get<std::string>());
    read(e, "reference_alpha", ev.reference_alpha);
    read(e, "reference_models", ev.reference_models);
    read(e, "reference_n", ev.reference_n);
    read(e, "calibration_sims", ev.calibration_sims);
    read(e, "bins_per_dim", ev.bins_per_dim);
    if (e.contains("confidence")) {
      const json& cj = e.at("confidence");
      reject_unknown(cj, {"theta_true", "n_obs", "grid_lo", "grid_hi", "grid_n", "seed"}, "evaluation.confidence");
      ConfidenceConfig cc;
      cc.theta_true = ev.theta0;
      read_vector(cj, "theta_true", cc.theta_true);
      read(cj, "n_obs", cc.n_obs);
      read(cj, "grid_lo", cc.grid_lo);
      read(cj, "grid_hi", cc.grid_hi);
      read(cj, "grid_n", cc.grid_n);
      read(cj, "seed", cc.seed);
      ev.confidence = cc;
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::not_found, "no such config: " + path.string());
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, "config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::validate() const {
  simulator.validate();
  if (seeds < 1) throw Error(ErrorCode::config, "config: seeds must be at least 1");
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw Error(ErrorCode::config, "config: sizes must be strictly increasing");
  }
  for (const auto& [m, a] : alpha) {
    if (!(a >= 0)) throw Error(ErrorCode::config, "config: alpha must be non-negative");
  }
  const int d = simulator.info().theta_dim;
  if (evaluation.theta0.size() != d || evaluation.theta1.size() != d) {
    throw Error(ErrorCode::config, "config: evaluation theta0/theta1 must have dimension " + std::to_string(d));
  }
  if (evaluation.reference_models < 1 || evaluation.n_x < 1 || evaluation.n_theta < 1) {
    throw Error(ErrorCode::config, "config: evaluation sizes must be positive");
  }
  if (evaluation.confidence) {
    const ConfidenceConfig& cc = *evaluation.confidence;
    if (cc.grid_n < 2 || !(cc.grid_hi > cc.grid_lo) || cc.n_obs < 1 || cc.theta_true.size() != d) {
      throw Error(ErrorCode::config, "config: bad confidence grid");
    }
  }
  methods::TrainConfig t = training;
  if (t.epochs < 0 || t.min_steps < 0 || t.batch_size < 1 || !(t.learning_rate > 0) || t.validation_fraction < 0 ||
      t.validation_fraction >= 1) {
    throw Error(ErrorCode::config, "config: bad training settings");
  }
  for (methods::Family f : {methods::Family::ratio, methods::Family::density, methods::Family::local}) {
    sampling(f).validate(d);
  }
}

methods::MethodKind ExperimentConfig::kind(methods::Method m) const {
  const auto it = alpha.find(m);
  return {m, it == alpha.end() ? 0.0 : it->second};
}

data::ThetaSampling ExperimentConfig::sampling(methods::Family family) const {
  data::ThetaSampling s = data::ThetaSampling::defaults(simulator.kind, family);
  const json& o = sampling_overrides;
  try {
    if (o.contains("grid")) {
      s.grid.clear();
      for (const json& g : o.at("grid")) s.grid.push_back(data::json_vector(g));
    }
    read(o, "box_half_width", s.box_half_width);
    read_vector(o, "theta1", s.theta1);
    read_vector(o, "theta_ref", s.theta_ref);
  } catch (const Error& e) {
    throw Error(ErrorCode::config, e.what());
  }
  return s;
}

}  // namespace goldmine::cli
