#include "goldmine/checkpoint.hpp"

#include <fstream>

#include "goldmine/dataset.hpp"
#include "goldmine/digest.hpp"
#include "goldmine/error.hpp"

namespace goldmine::checkpoint {

using nlohmann::json;
using data::json_vector;
using data::vector_json;

namespace {

constexpr const char* kFormat = "goldmine-checkpoint/1";

std::string_view head_name(net::HeadKind k) {
  switch (k) {
    case net::HeadKind::scalar: return "scalar";
    case net::HeadKind::vector: return "vector";
    case net::HeadKind::softmax: return "softmax";
    case net::HeadKind::mixture: return "mixture";
  }
  return "?";
}

net::HeadKind parse_head(const std::string& s) {
  if (s == "scalar") return net::HeadKind::scalar;
  if (s == "vector") return net::HeadKind::vector;
  if (s == "softmax") return net::HeadKind::softmax;
  if (s == "mixture") return net::HeadKind::mixture;
  throw Error(ErrorCode::data, "checkpoint: unknown head '" + s + "'");
}

json scaling_json(const net::Standardizer& s) {
  return {{"shift", vector_json(s.shift)}, {"scale", vector_json(s.scale)}};
}

net::Standardizer json_scaling(const json& j, int dim) {
  net::Standardizer s{json_vector(j.at("shift")), json_vector(j.at("scale"))};
  if (s.shift.size() != dim || s.scale.size() != dim) {
    throw Error(ErrorCode::data, "checkpoint: scaling dimension mismatch");
  }
  return s;
}

json histogram_json(const methods::Histogram& h) {
  json lo = json::array(), hi = json::array();
  for (double v : h.binning.lo) lo.push_back(v);
  for (double v : h.binning.hi) hi.push_back(v);
  return {{"lo", lo},
          {"hi", hi},
          {"bins_per_dim", h.binning.bins_per_dim},
          {"n_samples", h.n_samples},
          {"counts", h.counts},
          {"mass", h.mass}};
}

methods::Histogram json_histogram(const json& j) {
  methods::Histogram h;
  h.binning.lo = j.at("lo").get<std::vector<double>>();
  h.binning.hi = j.at("hi").get<std::vector<double>>();
  h.binning.bins_per_dim = j.at("bins_per_dim").get<int>();
  h.n_samples = j.at("n_samples").get<std::size_t>();
  h.counts = j.at("counts").get<std::vector<std::uint64_t>>();
  h.mass = j.at("mass").get<std::vector<double>>();
  if (h.binning.lo.size() != h.binning.hi.size() || h.mass.size() != h.binning.n_cells() ||
      h.counts.size() != h.mass.size()) {
    throw Error(ErrorCode::data, "checkpoint: malformed histogram");
  }
  return h;
}

}  // namespace

json training_log_json(const methods::TrainingLog& log) {
  return {{"train_loss", log.train_loss},
          {"validation_loss", log.validation_loss},
          {"best_epoch", log.best_epoch},
          {"saturated", log.saturated}};
}

json to_json(const methods::SurrogateModel& m) {
  const net::NetworkSpec& spec = m.network.spec();
  json calibrations = json::array();
  for (const methods::LocalCalibration& c : m.calibrations) {
    calibrations.push_back({{"theta0", vector_json(c.theta0)},
                            {"theta1", vector_json(c.theta1)},
                            {"numerator", histogram_json(c.numerator)},
                            {"denominator", histogram_json(c.denominator)}});
  }
  return {{"format", kFormat},
          {"method", methods::name(m.kind.method)},
          {"alpha", m.kind.alpha},
          {"observables", {{"x_dim", m.info.x_dim}, {"theta_dim", m.info.theta_dim}, {"n_bins", m.info.n_bins}}},
          {"network",
           {{"feature_dim", spec.feature_dim},
            {"theta_dim", spec.theta_dim},
            {"hidden", spec.hidden},
            {"head",
             {{"kind", head_name(spec.head.kind)},
              {"out_dim", spec.head.out_dim},
              {"bins", spec.head.bins},
              {"components", spec.head.components}}}}},
          {"weights", vector_json(m.network.weights())},
          {"input_scaling", scaling_json(m.network.input_scaling)},
          {"target_scaling", scaling_json(m.network.target_scaling)},
          {"theta_ref", vector_json(m.theta_ref)},
          {"seed", m.seed},
          {"dataset_digest", m.dataset_digest},
          {"n_train", m.n_train},
          {"best_epoch", m.log.best_epoch},
          {"calibrations", calibrations}};
}

methods::SurrogateModel from_json(const json& j) {
  try {
    if (j.value("format", "") != kFormat) throw Error(ErrorCode::data, "checkpoint: unknown format");
    const json& nj = j.at("network");
    net::NetworkSpec spec;
    spec.feature_dim = nj.at("feature_dim").get<int>();
    spec.theta_dim = nj.at("theta_dim").get<int>();
    spec.hidden = nj.at("hidden").get<std::vector<int>>();
    const json& hj = nj.at("head");
    spec.head = {parse_head(hj.at("kind").get<std::string>()), hj.at("out_dim").get<int>(),
                 hj.at("bins").get<int>(), hj.at("components").get<int>()};
    try {
      spec.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::data, std::string("checkpoint: ") + e.what());
    }

    methods::SurrogateModel m{{methods::parse_method(j.at("method").get<std::string>()), j.at("alpha").get<double>()},
                              {},
                              net::Network(spec),
                              json_vector(j.at("theta_ref")),
                              {},
                              {},
                              j.at("seed").get<std::uint64_t>(),
                              j.at("dataset_digest").get<std::string>(),
                              {}};
    const json& oj = j.at("observables");
    m.info = {oj.at("x_dim").get<int>(), oj.at("theta_dim").get<int>(), oj.at("n_bins").get<int>()};
    const methods::Vector w = json_vector(j.at("weights"));
    if (static_cast<std::size_t>(w.size()) != spec.n_weights()) {
      throw Error(ErrorCode::data, "checkpoint: weight count does not match the network");
    }
    m.network.weights() = w;
    m.network.input_scaling = json_scaling(j.at("input_scaling"), spec.input_dim());
    const int target_dim = spec.head.kind == net::HeadKind::mixture ? spec.head.out_dim : 0;
    const json& tj = j.at("target_scaling");
    m.network.target_scaling = json_vector(tj.at("shift")).size() == 0
                                   ? net::Standardizer::identity(target_dim)
                                   : json_scaling(tj, target_dim);
    m.log.best_epoch = j.value("best_epoch", -1);
    m.n_train = j.value("n_train", std::size_t{0});
    for (const json& c : j.at("calibrations")) {
      m.calibrations.push_back({json_vector(c.at("theta0")), json_vector(c.at("theta1")),
                                json_histogram(c.at("numerator")), json_histogram(c.at("denominator"))});
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::data, std::string("checkpoint: ") + e.what());
  }
}

void save(const methods::SurrogateModel& model, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::config, "cannot write " + path.string());
    out << to_json(model).dump() << '\n';
  }
  std::ofstream log(path.string() + ".log.json", std::ios::binary);
  if (!log) throw Error(ErrorCode::config, "cannot write training log next to " + path.string());
  log << training_log_json(model.log).dump(1) << '\n';
}

methods::SurrogateModel load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::not_found, "no such checkpoint: " + path.string());
  std::ifstream in(path, std::ios::binary);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::data, "checkpoint: unreadable " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string weights_digest(const methods::SurrogateModel& m) {
  Digest d;
  d.update(std::span<const double>(m.network.weights().data(), static_cast<std::size_t>(m.network.weights().size())));
  d.update(std::span<const double>(m.network.input_scaling.shift.data(), static_cast<std::size_t>(m.network.input_scaling.shift.size())));
  d.update(std::span<const double>(m.network.input_scaling.scale.data(), static_cast<std::size_t>(m.network.input_scaling.scale.size())));
  return d.hex();
}

}  // namespace goldmine::checkpoint
