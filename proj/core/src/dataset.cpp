#include "goldmine/dataset.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "goldmine/digest.hpp"
#include "goldmine/error.hpp"
#include "goldmine/rng.hpp"

namespace goldmine::data {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "goldmine-dataset/1";

lotka::LogRates to_rates(const Vector& v) {
  lotka::LogRates r{};
  for (int k = 0; k < lotka::kNumParams; ++k) r[k] = v(k);
  return r;
}

std::string_view family_name(methods::Family f) {
  switch (f) {
    case methods::Family::ratio: return "ratio";
    case methods::Family::density: return "density";
    case methods::Family::local: return "local";
  }
  return "?";
}

methods::Family parse_family(std::string_view s) {
  if (s == "ratio") return methods::Family::ratio;
  if (s == "density") return methods::Family::density;
  if (s == "local") return methods::Family::local;
  throw Error(ErrorCode::config, "unknown theta sampling family '" + std::string(s) + "'");
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::data, std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::data, std::string("bad field '") + key + "': " + e.what());
  }
}

struct Draw {
  Vector x;
  double log_r;
  Vector score;
};

/// One simulation; nullopt for an invalid (exploded) Lotka-Volterra run.
std::optional<Draw> simulate_one(const SimulatorConfig& sim, const Vector& theta_gen, const Vector& theta0,
                                 const Vector& theta1, std::uint64_t seed) {
  if (sim.kind == SimulatorKind::galton) {
    const galton::Sample s = galton::simulate(sim.galton, theta_gen(0), theta0(0), theta1(0), seed);
    return Draw{Vector::Constant(1, s.bin), s.acc.log_joint_ratio, Vector::Constant(1, s.acc.joint_score)};
  }
  const lotka::Result r =
      lotka::simulate(sim.lotka, to_rates(theta_gen), to_rates(theta0), to_rates(theta1), seed);
  if (r.exploded) return std::nullopt;
  const lotka::Summary s = lotka::summarize(r.series);
  Draw d{Vector(lotka::kNumSummaries), r.acc.log_joint_ratio, Vector(lotka::kNumParams)};
  for (int i = 0; i < lotka::kNumSummaries; ++i) d.x(i) = s[i];
  for (int k = 0; k < lotka::kNumParams; ++k) d.score(k) = r.acc.joint_score[k];
  return d;
}

std::string record_line(const TrainingPair& p, const ObservableInfo& info) {
  return record_to_json(p, info).dump();
}

std::string records_digest(const std::vector<TrainingPair>& records, const ObservableInfo& info) {
  Digest d;
  for (const TrainingPair& p : records) {
    d.update(record_line(p, info));
    d.update("\n");
  }
  return d.hex();
}

json header_json(const DatasetHeader& h) {
  return json{{"format", kFormat},
              {"simulator", h.simulator.to_json()},
              {"config_digest", h.config_digest},
              {"theta_sampling", h.sampling.to_json()},
              {"base_seed", h.base_seed},
              {"created", h.created},
              {"n_records", h.n_records},
              {"n_invalid", h.n_invalid},
              {"records_digest", h.records_digest}};
}

}  // namespace

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector json_vector(const json& j) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw Error(ErrorCode::data, "expected a number array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::data, "expected a number array");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

std::string_view name(SimulatorKind kind) { return kind == SimulatorKind::galton ? "galton" : "lotka"; }

SimulatorKind parse_simulator(std::string_view text) {
  if (text == "galton") return SimulatorKind::galton;
  if (text == "lotka" || text == "lotka-volterra" || text == "lv") return SimulatorKind::lotka;
  throw Error(ErrorCode::config, "unknown simulator '" + std::string(text) + "'");
}

// ---- simulator config ----

void SimulatorConfig::validate() const {
  if (kind == SimulatorKind::galton) {
    galton.validate();
  } else {
    lotka.validate();
  }
}

ObservableInfo SimulatorConfig::info() const {
  if (kind == SimulatorKind::galton) return {1, 1, galton.n_rows + 1};
  return {lotka::kNumSummaries, lotka::kNumParams, 0};
}

json SimulatorConfig::to_json() const {
  if (kind == SimulatorKind::galton) {
    return {{"name", "galton"}, {"n_rows", galton.n_rows}, {"curvature", galton.curvature}};
  }
  return {{"name", "lotka"},
          {"initial_predators", lotka.initial_predators},
          {"initial_prey", lotka.initial_prey},
          {"horizon", lotka.horizon},
          {"record_dt", lotka.record_dt},
          {"population_cap", lotka.population_cap}};
}

SimulatorConfig SimulatorConfig::from_json(const json& j) {
  SimulatorConfig c;
  c.kind = parse_simulator(j.is_string() ? j.get<std::string>() : field<std::string>(j, "name"));
  if (j.is_object()) {
    if (c.kind == SimulatorKind::galton) {
      c.galton.n_rows = j.value("n_rows", c.galton.n_rows);
      c.galton.curvature = j.value("curvature", c.galton.curvature);
    } else {
      c.lotka.initial_predators = j.value("initial_predators", c.lotka.initial_predators);
      c.lotka.initial_prey = j.value("initial_prey", c.lotka.initial_prey);
      c.lotka.horizon = j.value("horizon", c.lotka.horizon);
      c.lotka.record_dt = j.value("record_dt", c.lotka.record_dt);
      c.lotka.population_cap = j.value("population_cap", c.lotka.population_cap);
    }
  }
  c.validate();
  return c;
}

std::string SimulatorConfig::digest() const { return digest_hex(to_json().dump()); }

// ---- theta sampling ----

void ThetaSampling::validate(int theta_dim) const {
  auto check = [&](const Vector& v, const char* what) {
    if (v.size() != theta_dim || !v.allFinite()) {
      throw Error(ErrorCode::config, std::string("theta sampling: bad ") + what);
    }
  };
  check(theta1, "theta1");
  if (family == methods::Family::local) {
    check(theta_ref, "theta_ref");
    return;
  }
  for (const Vector& g : grid) check(g, "grid point");
  if (grid.empty() && !(box_half_width >= 0 && std::isfinite(box_half_width))) {
    throw Error(ErrorCode::config, "theta sampling: box half width must be non-negative");
  }
}

json ThetaSampling::to_json() const {
  json g = json::array();
  for (const Vector& v : grid) g.push_back(vector_json(v));
  return {{"family", family_name(family)},
          {"grid", g},
          {"box_half_width", box_half_width},
          {"theta1", vector_json(theta1)},
          {"theta_ref", vector_json(theta_ref)}};
}

ThetaSampling ThetaSampling::from_json(const json& j) {
  ThetaSampling s;
  s.family = parse_family(field<std::string>(j, "family"));
  if (j.contains("grid")) {
    for (const json& g : j.at("grid")) s.grid.push_back(json_vector(g));
  }
  s.box_half_width = j.value("box_half_width", s.box_half_width);
  s.theta1 = json_vector(j.at("theta1"));
  if (j.contains("theta_ref")) s.theta_ref = json_vector(j.at("theta_ref"));
  return s;
}

ThetaSampling ThetaSampling::defaults(SimulatorKind kind, methods::Family family) {
  ThetaSampling s;
  s.family = family;
  if (kind == SimulatorKind::galton) {
    for (int i = 0; i < 10; ++i) s.grid.push_back(Vector::Constant(1, -1.0 + 0.6 * i / 9.0));
    s.theta1 = Vector::Constant(1, -0.6);
    s.theta_ref = Vector::Constant(1, -0.7);
  } else {
    s.theta1.resize(lotka::kNumParams);
    for (int k = 0; k < lotka::kNumParams; ++k) s.theta1(k) = lotka::kReferenceLogRates[k];
    s.theta_ref = s.theta1;
    s.box_half_width = 0.01;
  }
  return s;
}

// ---- generation ----

Dataset generate(const SimulatorConfig& simulator, const ThetaSampling& sampling, std::size_t n,
                 std::uint64_t base_seed) {
  simulator.validate();
  const ObservableInfo info = simulator.info();
  sampling.validate(info.theta_dim);

  Dataset ds;
  ds.header.simulator = simulator;
  ds.header.config_digest = simulator.digest();
  ds.header.sampling = sampling;
  ds.header.base_seed = base_seed;
  ds.header.created = creation_time();
  ds.records.reserve(n);

  const std::size_t max_attempts = 10 * n + 1000;
  std::size_t attempt = 0;
  while (ds.records.size() < n) {
    if (attempt >= max_attempts) {
      throw Error(ErrorCode::numeric, "generate: too many invalid simulations");
    }
    const std::uint64_t seed = derive_seed(base_seed, attempt++);
    TrainingPair p;
    p.theta1 = sampling.theta1;
    const std::size_t i = ds.records.size();
    if (sampling.family == methods::Family::local) {
      p.y = 0;
      p.theta0 = sampling.theta_ref;
    } else {
      p.y = sampling.family == methods::Family::ratio ? static_cast<int>(i % 2) : 0;
      const std::size_t slot = sampling.family == methods::Family::ratio ? i / 2 : i;
      if (!sampling.grid.empty()) {
        p.theta0 = sampling.grid[slot % sampling.grid.size()];
      } else {
        Rng theta_rng(~seed);
        p.theta0 = sampling.theta1;
        for (Eigen::Index k = 0; k < p.theta0.size(); ++k) {
          p.theta0(k) += theta_rng.uniform(-sampling.box_half_width, sampling.box_half_width);
        }
      }
    }
    p.theta_gen = p.y == 0 ? p.theta0 : p.theta1;
    const auto draw = simulate_one(simulator, p.theta_gen, p.theta0, p.theta1, seed);
    if (!draw) {
      ++ds.header.n_invalid;
      continue;
    }
    p.x = draw->x;
    p.log_joint_ratio = draw->log_r;
    p.joint_score = draw->score;
    ds.records.push_back(std::move(p));
  }
  ds.header.n_records = ds.records.size();
  ds.header.records_digest = records_digest(ds.records, info);
  return ds;
}

methods::Matrix simulate_observables(const SimulatorConfig& simulator, const Vector& theta, std::size_t n,
                                     std::uint64_t base_seed) {
  const ObservableInfo info = simulator.info();
  if (theta.size() != info.theta_dim) throw Error(ErrorCode::config, "simulate: theta dimension mismatch");
  methods::Matrix xs(info.x_dim, static_cast<Eigen::Index>(n));
  std::size_t filled = 0;
  std::size_t attempt = 0;
  while (filled < n) {
    if (attempt >= 10 * n + 1000) throw Error(ErrorCode::numeric, "simulate: too many invalid simulations");
    const auto draw = simulate_one(simulator, theta, theta, theta, derive_seed(base_seed, attempt++));
    if (draw) xs.col(static_cast<Eigen::Index>(filled++)) = draw->x;
  }
  return xs;
}

methods::ObservableSampler observable_sampler(const SimulatorConfig& simulator) {
  return [simulator](const Vector& theta, std::size_t n, std::uint64_t seed) {
    return simulate_observables(simulator, theta, n, seed);
  };
}

// ---- serialization ----

json record_to_json(const TrainingPair& p, const ObservableInfo& info) {
  json j;
  if (info.discrete()) {
    j["x"] = static_cast<std::int64_t>(p.x(0));
  } else {
    j["x"] = vector_json(p.x);
  }
  j["y"] = p.y;
  j["theta0"] = vector_json(p.theta0);
  j["theta1"] = vector_json(p.theta1);
  j["theta_gen"] = vector_json(p.theta_gen);
  if (p.log_joint_ratio) j["log_joint_ratio"] = *p.log_joint_ratio;
  if (p.joint_score.size() > 0) j["joint_score"] = vector_json(p.joint_score);
  return j;
}

TrainingPair record_from_json(const json& j, const ObservableInfo& info) {
  if (!j.is_object()) throw Error(ErrorCode::data, "dataset record is not an object");
  TrainingPair p;
  p.x = json_vector(j.at("x"));
  p.y = field<int>(j, "y");
  p.theta0 = json_vector(j.at("theta0"));
  p.theta1 = json_vector(j.at("theta1"));
  p.theta_gen = json_vector(j.at("theta_gen"));
  if (j.contains("log_joint_ratio")) p.log_joint_ratio = field<double>(j, "log_joint_ratio");
  if (j.contains("joint_score")) p.joint_score = json_vector(j.at("joint_score"));
  if (p.y != 0 && p.y != 1) throw Error(ErrorCode::data, "dataset record label must be 0 or 1");
  if (p.x.size() != info.x_dim || p.theta0.size() != info.theta_dim || p.theta1.size() != info.theta_dim ||
      p.theta_gen.size() != info.theta_dim) {
    throw Error(ErrorCode::data, "dataset record dimensions do not match the simulator");
  }
  const bool finite = p.x.allFinite() && p.theta0.allFinite() && p.theta1.allFinite() &&
                      p.theta_gen.allFinite() && p.joint_score.allFinite() &&
                      (!p.log_joint_ratio || std::isfinite(*p.log_joint_ratio));
  if (!finite) throw Error(ErrorCode::data, "dataset record holds non-finite values");
  return p;
}

void write(const Dataset& ds, std::ostream& out) {
  const ObservableInfo info = ds.header.simulator.info();
  DatasetHeader h = ds.header;
  h.n_records = ds.records.size();
  h.records_digest = records_digest(ds.records, info);
  h.config_digest = h.simulator.digest();
  out << header_json(h).dump() << '\n';
  for (const TrainingPair& p : ds.records) out << record_line(p, info) << '\n';
  if (!out) throw Error(ErrorCode::data, "dataset: write failed");
}

Dataset read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::data, "dataset: missing header line");
  json hj;
  try {
    hj = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::data, std::string("dataset: bad header: ") + e.what());
  }
  if (hj.value("format", "") != kFormat) throw Error(ErrorCode::data, "dataset: unknown format");
  Dataset ds;
  DatasetHeader& h = ds.header;
  h.simulator = SimulatorConfig::from_json(hj.at("simulator"));
  h.config_digest = field<std::string>(hj, "config_digest");
  h.sampling = ThetaSampling::from_json(hj.at("theta_sampling"));
  h.base_seed = field<std::uint64_t>(hj, "base_seed");
  h.created = field<std::string>(hj, "created");
  h.n_records = field<std::size_t>(hj, "n_records");
  h.n_invalid = field<std::size_t>(hj, "n_invalid");
  h.records_digest = field<std::string>(hj, "records_digest");
  if (h.config_digest != h.simulator.digest()) {
    throw Error(ErrorCode::data, "DigestMismatch: simulator config digest does not match the header");
  }

  const ObservableInfo info = h.simulator.info();
  Digest digest;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rj;
    try {
      rj = json::parse(line);
    } catch (const json::exception&) {
      throw Error(ErrorCode::data, "DigestMismatch: unreadable record " + std::to_string(ds.records.size()));
    }
    ds.records.push_back(record_from_json(rj, info));
    digest.update(line);
    digest.update("\n");
  }
  if (ds.records.size() != h.n_records) {
    throw Error(ErrorCode::data, "DigestMismatch: header announces " + std::to_string(h.n_records) +
                                     " records, file holds " + std::to_string(ds.records.size()));
  }
  if (digest.hex() != h.records_digest) {
    throw Error(ErrorCode::data, "DigestMismatch: record digest does not match the header");
  }
  return ds;
}

void save(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::config, "cannot write " + path.string());
  write(ds, out);
}

Dataset load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::not_found, "no such dataset: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::data, "cannot read " + path.string());
  return read(in);
}

std::string creation_time() {
  std::time_t t = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && *end == '\0' && v >= 0) t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace goldmine::data
